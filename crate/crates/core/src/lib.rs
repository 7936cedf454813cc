//! Spectral simulation and verification of the stochastic fractional wave
//! equation `∂²ₜu + (−Δ)^k u = σ(u)Ḟ + b(u)` driven by spatially homogeneous
//! Gaussian noise.
//!
//! * [`model`]: spectral measures, integrability conditions, exponents.
//! * [`propagator`]: Fourier multipliers of the fundamental solution.
//! * [`quadrature`]: deterministic spectral functionals.
//! * [`lattice`]: periodic grid, transforms and Sobolev norms.
//! * [`noise`]: lattice noise increments.
//! * [`solver`]: stochastic trigonometric time stepping.
//! * [`estimators`]: Monte-Carlo moments and scaling fits.

pub mod acceptance;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod model;
pub mod noise;
pub mod propagator;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
