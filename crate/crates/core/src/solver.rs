//! Stochastic trigonometric time stepping of the mild equation on the lattice.
//!
//! Each mode is rotated exactly over a step; the forcing
//! `F = σ(u)·ΔW + b(u)·dt`, evaluated at the left endpoint in physical
//! space, enters position through `ℱG(dt)` and velocity through `cos(dt·ω)`.
//! Two paths are packed into one complex transform where possible.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{sobolev_norm_sq_with, sobolev_weights, FftEngine, GridSpec, SpectralField, StateVector};
use crate::model::{ModelParams, SpectralMeasure};
use crate::noise::NoiseSpec;
use crate::propagator::Propagator;
use crate::rng::{stream, Domain};

/// Any lattice value above this magnitude aborts the path.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

type NamedFn = fn(f64) -> f64;

/// Registry of named coefficients: `(name, f, C)` with `|f(z)| ≤ C|z|`.
pub const REGISTRY: &[(&str, NamedFn, f64)] = &[
    ("tanh", f64::tanh, 1.0),
    ("arctan", f64::atan, 1.0),
    ("softsign", softsign, 1.0),
];

fn softsign(z: f64) -> f64 {
    z / (1.0 + z.abs())
}

/// Diffusion or drift coefficient, each with `|f(z)| ≤ C|z|`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFn {
    Zero,
    Linear { lambda: f64 },
    /// `z ↦ λ sin z`.
    SineBounded { lambda: f64 },
    /// `z ↦ λ f(z)` for a registry entry `f`.
    Named { name: String, lambda: f64 },
}

impl CoefficientFn {
    fn lookup(name: &str) -> Option<&'static (&'static str, NamedFn, f64)> {
        REGISTRY.iter().find(|e| e.0 == name)
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = match self {
            CoefficientFn::Zero => return Ok(()),
            CoefficientFn::Linear { lambda } | CoefficientFn::SineBounded { lambda } => *lambda,
            CoefficientFn::Named { name, lambda } => {
                if Self::lookup(name).is_none() {
                    let known: Vec<&str> = REGISTRY.iter().map(|e| e.0).collect();
                    return Err(Error::domain("solver", format!("unknown coefficient {name:?}; known: {known:?}")));
                }
                *lambda
            }
        };
        if lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::domain("solver", format!("coefficient lambda must be finite, got {lambda}")))
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            CoefficientFn::Zero => 0.0,
            CoefficientFn::Linear { lambda } => lambda * z,
            CoefficientFn::SineBounded { lambda } => lambda * z.sin(),
            CoefficientFn::Named { name, lambda } => lambda * Self::lookup(name).map_or(0.0, |e| (e.1)(z)),
        }
    }

    /// The constant `C` in `|f(z)| ≤ C|z|`.
    pub fn growth_constant(&self) -> f64 {
        match self {
            CoefficientFn::Zero => 0.0,
            CoefficientFn::Linear { lambda } | CoefficientFn::SineBounded { lambda } => lambda.abs(),
            CoefficientFn::Named { name, lambda } => lambda.abs() * Self::lookup(name).map_or(0.0, |e| e.2),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoefficientFn::Zero => true,
            CoefficientFn::Linear { lambda } | CoefficientFn::SineBounded { lambda } | CoefficientFn::Named { lambda, .. } => {
                *lambda == 0.0
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub params: ModelParams,
    pub measure: SpectralMeasure,
    pub grid: GridSpec,
    pub dt: f64,
    pub sigma: CoefficientFn,
    pub b: CoefficientFn,
    /// Initial position `v_0`, lattice values.
    pub v0: Vec<f64>,
    /// Initial velocity `ṽ_0`, lattice values.
    pub v0_tilde: Vec<f64>,
    /// Sobolev order used for norm summaries.
    pub alpha: f64,
    pub seed: u64,
    /// Fixed field replacing `σ(u)`: the equation becomes linear in the noise.
    pub forced_z: Option<Vec<f64>>,
    /// Times at which states are recorded; `0` is always recorded.
    pub snapshot_times: Vec<f64>,
    /// Keep full states in the trajectory, not only norm summaries.
    pub store_states: bool,
    /// Each step's noise is the sum of this many finer increments, so runs
    /// with `dt` and `dt/m` see the same Brownian path.
    pub noise_substeps: usize,
    /// Zero the forcing above two thirds of the band.
    pub dealias: bool,
}

impl SolverConfig {
    /// Zero data and coefficients, `dt = T/2¹⁰`, a single snapshot at `T`.
    pub fn new(params: ModelParams, measure: SpectralMeasure, grid: GridSpec) -> Self {
        let len = grid.len();
        SolverConfig {
            params,
            measure,
            grid,
            dt: params.horizon / 1024.0,
            sigma: CoefficientFn::Zero,
            b: CoefficientFn::Zero,
            v0: vec![0.0; len],
            v0_tilde: vec![0.0; len],
            alpha: 0.0,
            seed: 0,
            forced_z: None,
            snapshot_times: vec![params.horizon],
            store_states: false,
            noise_substeps: 1,
            dealias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::domain("solver", m));
        let d = self.params.d;
        if self.grid.d != d || self.measure.dim() != d {
            return err(format!(
                "dimensions differ: model d = {d}, grid d = {}, measure d = {}",
                self.grid.d,
                self.measure.dim()
            ));
        }
        if !(self.dt > 0.0 && self.dt <= self.params.horizon) {
            return err(format!("need 0 < dt <= T, got dt = {}, T = {}", self.dt, self.params.horizon));
        }
        let len = self.grid.len();
        for (name, field) in [("v0", &self.v0), ("v0_tilde", &self.v0_tilde)] {
            if field.len() != len {
                return err(format!("{name} has {} samples, grid has {len}", field.len()));
            }
            if field.iter().any(|v| !v.is_finite()) {
                return err(format!("{name} has non-finite values"));
            }
        }
        if let Some(z) = &self.forced_z {
            if z.len() != len || z.iter().any(|v| !v.is_finite()) {
                return err("forced Z must be a finite field on the grid".into());
            }
        }
        if !self.alpha.is_finite() {
            return err(format!("alpha must be finite, got {}", self.alpha));
        }
        if self.noise_substeps == 0 {
            return err("noise_substeps must be at least 1".into());
        }
        self.sigma.validate()?;
        self.b.validate()?;
        for &t in &self.snapshot_times {
            if !(0.0..=self.params.horizon).contains(&t) {
                return err(format!("snapshot time {t} outside [0, T]"));
            }
        }
        self.snapshot_steps().map(|_| ())
    }

    /// `n = ⌈T/dt⌉` and the uniform step `T/n`.
    pub fn steps(&self) -> (usize, f64) {
        let t = self.params.horizon;
        let n = ((t / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, t / n as f64)
    }

    /// Step indices of the recorded times, starting with 0.
    fn snapshot_steps(&self) -> Result<Vec<usize>> {
        let (n, h) = self.steps();
        let mut out = vec![0usize];
        for &t in &self.snapshot_times {
            let m = (t / h).round();
            if (m * h - t).abs() > 1e-9 * h.max(t) || m > n as f64 {
                return Err(Error::domain(
                    "solver",
                    format!("snapshot time {t} is not on the step grid (step {h})"),
                ));
            }
            out.push(m as usize);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn digest(&self) -> u64 {
        // FNV-1a over the debug rendering; stable for identical configs
        let text = format!("{self:?}");
        text.bytes()
            .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub sobolev_norm_sq_alpha: f64,
    pub l2_norm_sq: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Full states, present when `store_states` is set.
    pub states: Vec<StateVector>,
    pub norms: Vec<NormSample>,
    pub seed: u64,
    pub path: u64,
    pub config_digest: u64,
}

/// Per-mode step multipliers.
#[derive(Debug, Clone)]
struct StepFactors {
    cos: Vec<f64>,
    g: Vec<f64>,
    /// `−ω sin(dt ω)`.
    msin: Vec<f64>,
}

impl StepFactors {
    fn new(grid: &GridSpec, k: f64, dt: f64) -> Self {
        let prop = Propagator { k, horizon: f64::MAX };
        let len = grid.len();
        let (mut cos, mut g, mut msin) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for i in 0..len {
            let r = grid.mode_radius(i);
            let w = prop.omega(r);
            cos[i] = (dt * w).cos();
            g[i] = prop.fourier_g(dt, r);
            msin[i] = -w * (dt * w).sin();
        }
        StepFactors { cos, g, msin }
    }
}

/// `(û, v̂) ← (cos û + G v̂, −ω sin û + cos v̂)` per mode, exact for the
/// linear wave part; the zero mode gets `û ← û + dt v̂`.
pub fn linear_propagate(state: &StateVector, dt: f64, k: f64) -> Result<StateVector> {
    if !(dt >= 0.0) || !(k > 0.0) {
        return Err(Error::domain("solver", format!("need dt >= 0 and k > 0, got dt = {dt}, k = {k}")));
    }
    let grid = state.position.grid;
    let f = StepFactors::new(&grid, k, dt);
    let mut out = state.clone();
    for i in 0..grid.len() {
        let (u, v) = (state.position.coeffs[i], state.velocity.coeffs[i]);
        out.position.coeffs[i] = f.cos[i] * u + f.g[i] * v;
        out.velocity.coeffs[i] = f.msin[i] * u + f.cos[i] * v;
    }
    Ok(out)
}

/// One stochastic trigonometric step driven by the lattice increment
/// `increment` (a real field): left-endpoint forcing `σ(u)·ΔW + b(u)·dt`.
pub fn step(
    state: &StateVector,
    increment: &crate::noise::NoiseIncrement,
    sigma: &CoefficientFn,
    b: &CoefficientFn,
    dt: f64,
    k: f64,
    engine: &mut FftEngine,
) -> Result<StateVector> {
    if (increment.dt - dt).abs() > 1e-15 * dt {
        return Err(Error::domain("solver", format!("increment dt {} differs from step dt {dt}", increment.dt)));
    }
    let mut next = linear_propagate(state, dt, k)?;
    if sigma.is_zero() && b.is_zero() {
        return Ok(next);
    }
    let (u, _) = engine.inverse(&state.position)?;
    let magnitude = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(magnitude <= BLOW_UP_THRESHOLD) {
        return Err(Error::BlowUp { path: 0, step: 0, magnitude });
    }
    let forcing: Vec<f64> = u
        .iter()
        .zip(&increment.field)
        .map(|(&u, &w)| sigma.eval(u) * w + b.eval(u) * dt)
        .collect();
    let fhat = engine.forward(&forcing)?;
    let grid = state.position.grid;
    let f = StepFactors::new(&grid, k, dt);
    for i in 0..grid.len() {
        next.position.coeffs[i] += f.g[i] * fhat.coeffs[i];
        next.velocity.coeffs[i] += f.cos[i] * fhat.coeffs[i];
    }
    Ok(next)
}

/// Reusable buffers for one worker.
pub struct Workspace {
    engine: FftEngine,
    ubuf: Vec<Complex64>,
    wbuf: Vec<Complex64>,
    coeffs: [Vec<Complex64>; 2],
    normals: Vec<f64>,
    acc: Vec<f64>,
    fhat: [Vec<Complex64>; 2],
}

impl Workspace {
    pub fn new(grid: GridSpec) -> Self {
        let len = grid.len();
        let z = Complex64::new(0.0, 0.0);
        Workspace {
            engine: FftEngine::new(grid),
            ubuf: vec![z; len],
            wbuf: vec![z; len],
            coeffs: [vec![z; len], vec![z; len]],
            normals: vec![0.0; len],
            acc: vec![0.0; len],
            fhat: [vec![z; len], vec![z; len]],
        }
    }
}

/// A validated configuration with precomputed multipliers, shareable
/// across workers.
pub struct Simulator {
    config: SolverConfig,
    noise: Option<NoiseSpec>,
    noise_scale: f64,
    n_steps: usize,
    dt: f64,
    factors: StepFactors,
    mask: Option<Vec<bool>>,
    snapshot_steps: Vec<usize>,
    init: StateVector,
}

impl Simulator {
    pub fn new(config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let (n_steps, dt) = config.steps();
        let grid = config.grid;
        let noisy = (config.forced_z.is_some() || !config.sigma.is_zero()) && !config.measure.is_zero();
        let noise = if noisy {
            Some(NoiseSpec::new(config.measure.clone(), grid)?)
        } else {
            None
        };
        let noise_scale = noise.as_ref().map_or(0.0, |n| n.lattice_scale());
        let mask = config.dealias.then(|| {
            let cut = (grid.n / 3) as i64;
            (0..grid.len())
                .map(|i| grid.mode_integers(i)[..grid.d].iter().all(|j| j.abs() <= cut))
                .collect()
        });
        let mut engine = FftEngine::new(grid);
        let init = StateVector {
            position: engine.forward(&config.v0)?,
            velocity: engine.forward(&config.v0_tilde)?,
        };
        Ok(Simulator {
            factors: StepFactors::new(&grid, config.params.k, dt),
            snapshot_steps: config.snapshot_steps()?,
            config: config.clone(),
            noise,
            noise_scale,
            n_steps,
            dt,
            mask,
            init,
        })
    }

    /// Deliberately wrong propagator (the restoring term `−ω sin(ω dt)` with
    /// its sign flipped), used to check that the acceptance suite notices a
    /// broken scheme.
    pub(crate) fn with_flipped_kernel(mut self) -> Self {
        self.factors.msin.iter_mut().for_each(|m| *m = -*m);
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn step_size(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Recorded times, starting at 0.
    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshot_steps.iter().map(|&m| m as f64 * self.dt).collect()
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.init
    }

    fn has_forcing(&self) -> bool {
        self.noise.is_some() || !self.config.b.is_zero()
    }

    fn needs_u(&self) -> bool {
        !self.config.b.is_zero() || (self.config.forced_z.is_none() && self.noise.is_some())
    }

    /// Normalised noise coefficients of path `path` over step `n`.
    fn noise_coefficients(&self, spec: &NoiseSpec, ws_normals: &mut [f64], acc: &mut [f64], path: u64, n: usize, out: &mut [Complex64]) {
        let m = self.config.noise_substeps;
        if m == 1 {
            spec.draw_normals(&mut stream(self.config.seed, path, n as u64, Domain::Noise), ws_normals);
            spec.coefficients_from_normals(ws_normals, self.dt, out);
            return;
        }
        acc.iter_mut().for_each(|a| *a = 0.0);
        for s in 0..m {
            let fine = (n * m + s) as u64;
            spec.draw_normals(&mut stream(self.config.seed, path, fine, Domain::Noise), ws_normals);
            acc.iter_mut().zip(ws_normals.iter()).for_each(|(a, z)| *a += z);
        }
        let norm = 1.0 / (m as f64).sqrt();
        acc.iter_mut().for_each(|a| *a *= norm);
        spec.coefficients_from_normals(acc, self.dt, out);
    }

    /// Fills `ws.fhat[slot]` with the forcing transform for each path.
    fn forcing(&self, ws: &mut Workspace, paths: &[u64], n: usize, pos: &[Vec<Complex64>]) -> Result<()> {
        let len = self.config.grid.len();
        let batch = paths.len();
        let zero = Complex64::new(0.0, 0.0);
        if self.needs_u() {
            for i in 0..len {
                ws.ubuf[i] = pos[0][i] + if batch == 2 { Complex64::new(-pos[1][i].im, pos[1][i].re) } else { zero };
            }
            ws.engine.inverse_in_place(&mut ws.ubuf);
            for (slot, &path) in paths.iter().enumerate() {
                let magnitude = ws
                    .ubuf
                    .iter()
                    .map(|c| if slot == 0 { c.re.abs() } else { c.im.abs() })
                    .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
                if !(magnitude <= BLOW_UP_THRESHOLD) {
                    return Err(Error::BlowUp { path, step: n, magnitude });
                }
            }
        }
        if let Some(spec) = &self.noise {
            for (slot, &path) in paths.iter().enumerate() {
                let mut out = std::mem::take(&mut ws.coeffs[slot]);
                self.noise_coefficients(spec, &mut ws.normals, &mut ws.acc, path, n, &mut out);
                ws.coeffs[slot] = out;
            }
            let s = self.noise_scale;
            for i in 0..len {
                let second = if batch == 2 { Complex64::new(-ws.coeffs[1][i].im, ws.coeffs[1][i].re) } else { zero };
                ws.wbuf[i] = (ws.coeffs[0][i] + second) * s;
            }
            ws.engine.inverse_in_place(&mut ws.wbuf);
        }
        // forcing values, packed into wbuf
        let cfg = &self.config;
        let dt = self.dt;
        let noisy = self.noise.is_some();
        for i in 0..len {
            let mut f = [0.0; 2];
            for (slot, fs) in f.iter_mut().enumerate().take(batch) {
                let u = if self.needs_u() {
                    if slot == 0 { ws.ubuf[i].re } else { ws.ubuf[i].im }
                } else {
                    0.0
                };
                let mut v = cfg.b.eval(u) * dt;
                if noisy {
                    let w = if slot == 0 { ws.wbuf[i].re } else { ws.wbuf[i].im };
                    let mult = match &cfg.forced_z {
                        Some(z) => z[i],
                        None => cfg.sigma.eval(u),
                    };
                    v += mult * w;
                }
                *fs = v;
            }
            ws.wbuf[i] = Complex64::new(f[0], f[1]);
        }
        ws.engine.forward_in_place(&mut ws.wbuf);
        let grid = &cfg.grid;
        for i in 0..len {
            let a = ws.wbuf[i];
            let b = ws.wbuf[grid.conjugate_index(i)].conj();
            ws.fhat[0][i] = (a + b) * 0.5;
            if batch == 2 {
                // (a − b)/(2i)
                let diff = (a - b) * 0.5;
                ws.fhat[1][i] = Complex64::new(diff.im, -diff.re);
            }
        }
        if let Some(mask) = &self.mask {
            for slot in 0..batch {
                for (f, keep) in ws.fhat[slot].iter_mut().zip(mask) {
                    if !keep {
                        *f = zero;
                    }
                }
            }
        }
        Ok(())
    }

    /// Simulates one or two paths in lockstep, calling
    /// `observe(snapshot_index, slot, position, velocity)` at recorded steps.
    pub fn run_batch(
        &self,
        ws: &mut Workspace,
        paths: &[u64],
        observe: &mut dyn FnMut(usize, usize, &[Complex64], &[Complex64]),
    ) -> Result<()> {
        assert!(paths.len() == 1 || paths.len() == 2, "batches hold one or two paths");
        let batch = paths.len();
        let mut pos: Vec<Vec<Complex64>> = vec![self.init.position.coeffs.clone(); batch];
        let mut vel: Vec<Vec<Complex64>> = vec![self.init.velocity.coeffs.clone(); batch];
        let mut next = 0;
        if self.snapshot_steps[0] == 0 {
            for slot in 0..batch {
                observe(0, slot, &pos[slot], &vel[slot]);
            }
            next = 1;
        }
        let forcing = self.has_forcing();
        let f = &self.factors;
        for n in 0..self.n_steps {
            if forcing {
                self.forcing(ws, paths, n, &pos)?;
            }
            for slot in 0..batch {
                let (p, v) = (&mut pos[slot], &mut vel[slot]);
                for i in 0..p.len() {
                    let (u0, v0) = (p[i], v[i]);
                    let mut nu = f.cos[i] * u0 + f.g[i] * v0;
                    let mut nv = f.msin[i] * u0 + f.cos[i] * v0;
                    if forcing {
                        let fh = ws.fhat[slot][i];
                        nu += f.g[i] * fh;
                        nv += f.cos[i] * fh;
                    }
                    p[i] = nu;
                    v[i] = nv;
                }
            }
            while next < self.snapshot_steps.len() && self.snapshot_steps[next] == n + 1 {
                for slot in 0..batch {
                    // sup |u| ≤ (2L)^{-d} Σ|û_j|; the physical check in `forcing` only runs for nonlinear models
                    let bound = pos[slot].iter().map(|c| c.norm()).sum::<f64>() / self.config.grid.volume();
                    if !(bound.is_finite() && (self.needs_u() || bound <= BLOW_UP_THRESHOLD)) {
                        return Err(Error::BlowUp {
                            path: paths[slot],
                            step: n + 1,
                            magnitude: bound,
                        });
                    }
                    observe(next, slot, &pos[slot], &vel[slot]);
                }
                next += 1;
            }
        }
        Ok(())
    }

    pub fn trajectory(&self, path: u64) -> Result<Trajectory> {
        let grid = self.config.grid;
        let wa = sobolev_weights(&grid, self.config.alpha);
        let w0 = sobolev_weights(&grid, 0.0);
        let times = self.snapshot_times();
        let mut states = Vec::new();
        let mut norms = Vec::new();
        let store = self.config.store_states;
        let mut ws = Workspace::new(grid);
        self.run_batch(&mut ws, &[path], &mut |idx, _, p, v| {
            norms.push(NormSample {
                t: times[idx],
                sobolev_norm_sq_alpha: sobolev_norm_sq_with(p, &wa),
                l2_norm_sq: sobolev_norm_sq_with(p, &w0),
            });
            if store {
                states.push(StateVector {
                    position: SpectralField { grid, coeffs: p.to_vec() },
                    velocity: SpectralField { grid, coeffs: v.to_vec() },
                });
            }
        })?;
        Ok(Trajectory {
            times,
            states,
            norms,
            seed: self.config.seed,
            path,
            config_digest: self.config.digest(),
        })
    }

    /// Runs paths `0..n_paths` (in packed pairs, in parallel) and maps each
    /// path's recorded positions through `f`. Results are ordered by path,
    /// independent of the number of workers.
    pub fn map_paths<T, F>(&self, n_paths: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &[Vec<Complex64>]) -> T + Sync,
    {
        let n_snap = self.snapshot_steps.len();
        let pairs: Vec<u64> = (0..n_paths.div_ceil(2)).collect();
        let grid = self.config.grid;
        let nested: Vec<Result<Vec<T>>> = pairs
            .par_iter()
            .map_init(
                || Workspace::new(grid),
                |ws, &pair| {
                    let first = 2 * pair;
                    let paths: Vec<u64> = (first..(first + 2).min(n_paths)).collect();
                    let mut snaps: Vec<Vec<Vec<Complex64>>> = vec![Vec::with_capacity(n_snap); paths.len()];
                    self.run_batch(ws, &paths, &mut |_, slot, p, _| snaps[slot].push(p.to_vec()))?;
                    Ok(paths.iter().zip(&snaps).map(|(&p, s)| f(p, s)).collect())
                },
            )
            .collect();
        let mut out = Vec::with_capacity(n_paths as usize);
        for r in nested {
            out.extend(r?);
        }
        Ok(out)
    }
}

/// Simulates path 0 of `config`.
pub fn solve_path(config: &SolverConfig) -> Result<Trajectory> {
    Simulator::new(config)?.trajectory(0)
}

/// Lattice `L²` distance `sqrt(Δx^d Σ |u − w|²)`.
fn lattice_distance(grid: &GridSpec, u: &[f64], w: &[f64]) -> f64 {
    (grid.cell_volume() * u.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt()
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    /// Lattice values of each iterate at every step, `iterates[m][n]`.
    pub iterates: Vec<Vec<Vec<f64>>>,
    /// Max-over-time lattice `L²` distance between successive iterates.
    pub distances: Vec<f64>,
    pub times: Vec<f64>,
}

/// Fixed-point iteration on path 0 with its noise frozen:
/// `u^{(m+1)}` is the scheme's output with `σ(u)` and `b(u)` evaluated on `u^{(m)}`.
/// The zeroth iterate is the free (linear) evolution.
pub fn picard_iterate(config: &SolverConfig, n_iters: usize) -> Result<PicardResult> {
    picard_iterate_path(config, n_iters, 0)
}

/// Mean-square Picard distances `sup_t (E‖u^{(m+1)}(t) − u^{(m)}(t)‖²)^{1/2}`, the
/// expectation taken over `n_paths` independently frozen noise paths.
pub fn picard_mean_square(config: &SolverConfig, n_iters: usize, n_paths: u64) -> Result<Vec<f64>> {
    let grid = config.grid;
    let mut acc: Vec<Vec<f64>> = Vec::new();
    for path in 0..n_paths {
        let r = picard_iterate_path(config, n_iters, path)?;
        if acc.is_empty() {
            acc = vec![vec![0.0; r.times.len()]; n_iters];
        }
        for (m, pair) in r.iterates.windows(2).enumerate() {
            for (slot, (a, b)) in acc[m].iter_mut().zip(pair[1].iter().zip(&pair[0])) {
                *slot += lattice_distance(&grid, a, b).powi(2);
            }
        }
    }
    Ok(acc
        .iter()
        .map(|row| (row.iter().fold(0.0, |m: f64, &x| m.max(x)) / n_paths as f64).sqrt())
        .collect())
}

/// [`picard_iterate`] on an arbitrary path of the configuration's seed.
pub fn picard_iterate_path(config: &SolverConfig, n_iters: usize, path: u64) -> Result<PicardResult> {
    if n_iters < 2 {
        return Err(Error::domain("solver", format!("need at least 2 iterations, got {n_iters}")));
    }
    let sim = Simulator::new(config)?;
    let grid = config.grid;
    let len = grid.len();
    let dt = sim.dt;
    let n = sim.n_steps;
    let mut engine = FftEngine::new(grid);

    // frozen lattice increments
    let mut noise = Vec::with_capacity(n);
    if let Some(spec) = &sim.noise {
        let mut normals = vec![0.0; len];
        let mut acc = vec![0.0; len];
        let mut c = vec![Complex64::new(0.0, 0.0); len];
        for step in 0..n {
            sim.noise_coefficients(spec, &mut normals, &mut acc, path, step, &mut c);
            let mut w: Vec<Complex64> = c.iter().map(|v| v * sim.noise_scale).collect();
            engine.inverse_in_place(&mut w);
            noise.push(w.iter().map(|v| v.re).collect::<Vec<f64>>());
        }
    }

    let f = &sim.factors;
    let physical = |engine: &mut FftEngine, p: &[Complex64]| -> Vec<f64> {
        let mut buf = p.to_vec();
        engine.inverse_in_place(&mut buf);
        buf.iter().map(|c| c.re).collect()
    };
    let run = |engine: &mut FftEngine, prev: Option<&Vec<Vec<f64>>>| -> Result<Vec<Vec<f64>>> {
        let mut p = sim.init.position.coeffs.clone();
        let mut v = sim.init.velocity.coeffs.clone();
        let mut out = Vec::with_capacity(n + 1);
        out.push(physical(engine, &p));
        for step in 0..n {
            let fhat = match prev {
                Some(prev) if sim.has_forcing() => {
                    let u = &prev[step];
                    let forcing: Vec<f64> = (0..len)
                        .map(|i| {
                            let mut val = config.b.eval(u[i]) * dt;
                            if !noise.is_empty() {
                                let mult = match &config.forced_z {
                                    Some(z) => z[i],
                                    None => config.sigma.eval(u[i]),
                                };
                                val += mult * noise[step][i];
                            }
                            val
                        })
                        .collect();
                    Some(engine.forward(&forcing)?.coeffs)
                }
                _ => None,
            };
            for i in 0..len {
                let (u0, v0) = (p[i], v[i]);
                let mut nu = f.cos[i] * u0 + f.g[i] * v0;
                let mut nv = f.msin[i] * u0 + f.cos[i] * v0;
                if let Some(fh) = &fhat {
                    nu += f.g[i] * fh[i];
                    nv += f.cos[i] * fh[i];
                }
                p[i] = nu;
                v[i] = nv;
            }
            let u = physical(engine, &p);
            let magnitude = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if !(magnitude <= BLOW_UP_THRESHOLD) {
                return Err(Error::BlowUp { path, step: step + 1, magnitude });
            }
            out.push(u);
        }
        Ok(out)
    };

    let mut iterates = vec![run(&mut engine, None)?];
    let mut distances: Vec<f64> = Vec::with_capacity(n_iters);
    for _ in 0..n_iters {
        let next = run(&mut engine, iterates.last())?;
        let last = iterates.last().expect("at least one iterate");
        let dist = next
            .iter()
            .zip(last)
            .map(|(a, b)| lattice_distance(&grid, a, b))
            .fold(0.0, f64::max);
        distances.push(dist);
        iterates.push(next);
        let k = distances.len();
        if k >= 4 && distances[k - 4..].windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::PicardDivergence { distances });
        }
    }
    Ok(PicardResult {
        iterates,
        distances,
        times: (0..=n).map(|m| m as f64 * dt).collect(),
    })
}

/// The lattice field with a single mode `j` (and its conjugate) excited.
pub fn single_mode_field(grid: &GridSpec, idx: usize, amplitude: Complex64) -> SpectralField {
    let mut f = SpectralField::zeros(*grid);
    let c = grid.conjugate_index(idx);
    if c == idx {
        f.coeffs[idx] = Complex64::new(amplitude.re, 0.0);
    } else {
        f.coeffs[idx] = amplitude * FRAC_1_SQRT_2;
        f.coeffs[c] = amplitude.conj() * FRAC_1_SQRT_2;
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::gaussian_bump;
    use crate::model::riesz_measure;
    use proptest::prelude::*;

    fn setup(n: usize, horizon: f64) -> SolverConfig {
        let params = ModelParams::new(1.0, 1, horizon).unwrap();
        let grid = GridSpec::new(1, 8.0, n).unwrap();
        SolverConfig::new(params, riesz_measure(0.5, 1, None).unwrap(), grid)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn registry_entries_respect_their_growth_bound() {
        for &(name, _, _) in REGISTRY {
            let f = CoefficientFn::Named { name: name.into(), lambda: -1.7 };
            f.validate().unwrap();
            for i in -200..=200 {
                let z = i as f64 * 0.173;
                assert!(f.eval(z).abs() <= f.growth_constant() * z.abs() + 1e-15, "{name} at {z}");
            }
        }
        for f in [CoefficientFn::Linear { lambda: 2.0 }, CoefficientFn::SineBounded { lambda: -3.0 }] {
            for i in -200..=200 {
                let z = i as f64 * 0.173;
                assert!(f.eval(z).abs() <= f.growth_constant() * z.abs() + 1e-15);
            }
        }
        assert!(CoefficientFn::Named { name: "cube".into(), lambda: 1.0 }.validate().is_err());
    }

    #[test]
    fn zero_step_is_identity() {
        let g = GridSpec::new(1, 8.0, 16).unwrap();
        let s = StateVector {
            position: single_mode_field(&g, 3, Complex64::new(1.0, 0.5)),
            velocity: single_mode_field(&g, 5, Complex64::new(-0.2, 0.1)),
        };
        assert_eq!(linear_propagate(&s, 0.0, 1.3).unwrap(), s);
    }

    #[test]
    fn free_position_follows_cosine_and_velocity_follows_g() {
        let g = GridSpec::new(1, 8.0, 32).unwrap();
        let k = 1.5;
        let prop = Propagator::new(k, 10.0).unwrap();
        let j = 7;
        let r = g.mode_radius(j);
        let u0 = single_mode_field(&g, j, Complex64::new(0.8, -0.3));
        let v0 = single_mode_field(&g, j, Complex64::new(0.4, 0.9));
        for (dt, steps) in [(0.013, 77), (0.5, 2), (1.0, 1)] {
            let mut s = StateVector { position: u0.clone(), velocity: SpectralField::zeros(g) };
            let mut w = StateVector { position: SpectralField::zeros(g), velocity: v0.clone() };
            for _ in 0..steps {
                s = linear_propagate(&s, dt, k).unwrap();
                w = linear_propagate(&w, dt, k).unwrap();
            }
            let t = dt * steps as f64;
            let want_u = u0.coeffs[j] * prop.fourier_dg(t, r);
            let want_w = v0.coeffs[j] * prop.fourier_g(t, r);
            assert!(rel(s.position.coeffs[j], want_u) < 1e-12);
            assert!(rel(w.position.coeffs[j], want_w) < 1e-12);
        }
    }

    #[test]
    fn zero_mode_moves_linearly() {
        let g = GridSpec::new(1, 8.0, 16).unwrap();
        let s = StateVector {
            position: single_mode_field(&g, 0, Complex64::new(1.0, 0.0)),
            velocity: single_mode_field(&g, 0, Complex64::new(2.0, 0.0)),
        };
        let n = linear_propagate(&s, 0.25, 1.0).unwrap();
        assert_eq!(n.position.coeffs[0], Complex64::new(1.5, 0.0));
        assert_eq!(n.velocity.coeffs[0], Complex64::new(2.0, 0.0));
    }

    proptest! {
        #[test]
        fn group_property_and_energy(dt1 in 0.0f64..2.0, dt2 in 0.0f64..2.0, k in 0.3f64..2.5, j in 1usize..16) {
            let g = GridSpec::new(1, 8.0, 32).unwrap();
            let s = StateVector {
                position: single_mode_field(&g, j, Complex64::new(0.7, 0.2)),
                velocity: single_mode_field(&g, j, Complex64::new(-0.1, 0.6)),
            };
            let two = linear_propagate(&linear_propagate(&s, dt1, k).unwrap(), dt2, k).unwrap();
            let one = linear_propagate(&s, dt1 + dt2, k).unwrap();
            let w = g.mode_radius(j).powf(k);
            let energy = |x: &StateVector| w * w * x.position.coeffs[j].norm_sqr() + x.velocity.coeffs[j].norm_sqr();
            let scale = energy(&s).sqrt();
            prop_assert!((two.position.coeffs[j] - one.position.coeffs[j]).norm() * w <= 1e-13 * scale);
            prop_assert!((two.velocity.coeffs[j] - one.velocity.coeffs[j]).norm() <= 1e-13 * scale);
            prop_assert!((energy(&one) - energy(&s)).abs() <= 1e-12 * energy(&s));
        }
    }

    #[test]
    fn step_without_coefficients_is_linear_propagation() {
        let cfg = setup(32, 1.0);
        let g = cfg.grid;
        let s = StateVector {
            position: single_mode_field(&g, 3, Complex64::new(1.0, 0.0)),
            velocity: SpectralField::zeros(g),
        };
        let spec = NoiseSpec::new(cfg.measure.clone(), g).unwrap();
        let mut eng = FftEngine::new(g);
        let inc = spec.sample_increment(0.01, &mut stream(0, 0, 0, Domain::Test), &mut eng).unwrap();
        let a = step(&s, &inc, &CoefficientFn::Zero, &CoefficientFn::Zero, 0.01, 1.0, &mut eng).unwrap();
        assert_eq!(a, linear_propagate(&s, 0.01, 1.0).unwrap());
    }

    #[test]
    fn linear_drift_adds_duhamel_term() {
        let cfg = setup(32, 1.0);
        let g = cfg.grid;
        let j = 4;
        let s = StateVector {
            position: single_mode_field(&g, j, Complex64::new(0.3, 0.4)),
            velocity: SpectralField::zeros(g),
        };
        let dt = 0.05;
        let lambda = 0.7;
        let mut eng = FftEngine::new(g);
        let inc = crate::noise::NoiseIncrement { field: vec![0.0; g.len()], dt, imag_residue: 0.0 };
        let out = step(&s, &inc, &CoefficientFn::Zero, &CoefficientFn::Linear { lambda }, dt, 1.0, &mut eng).unwrap();
        let lin = linear_propagate(&s, dt, 1.0).unwrap();
        let prop = Propagator::new(1.0, 1.0).unwrap();
        let want = lin.position.coeffs[j] + prop.fourier_g(dt, g.mode_radius(j)) * lambda * s.position.coeffs[j] * dt;
        assert!(rel(out.position.coeffs[j], want) < 1e-12);
    }

    #[test]
    fn deterministic_solution_matches_closed_forms() {
        let mut cfg = setup(64, 1.3);
        let g = cfg.grid;
        let j = 9;
        let mut eng = FftEngine::new(g);
        let init = single_mode_field(&g, j, Complex64::new(0.5, 0.0));
        let (values, _) = eng.inverse(&init).unwrap();
        let prop = Propagator::new(1.0, 1.3).unwrap();
        let r = g.mode_radius(j);
        for dt in [1.3, 0.1, 1.3 / 1024.0] {
            cfg.dt = dt;
            cfg.store_states = true;
            cfg.v0 = values.clone();
            cfg.v0_tilde = vec![0.0; g.len()];
            let t = solve_path(&cfg).unwrap();
            let last = t.states.last().unwrap();
            let v0hat = eng.forward(&values).unwrap().coeffs[j];
            assert!(rel(last.position.coeffs[j], v0hat * prop.fourier_dg(1.3, r)) < 1e-12);

            cfg.v0 = vec![0.0; g.len()];
            cfg.v0_tilde = values.clone();
            let t = solve_path(&cfg).unwrap();
            let last = t.states.last().unwrap();
            assert!(rel(last.position.coeffs[j], v0hat * prop.fourier_g(1.3, r)) < 1e-12);
        }
    }

    #[test]
    fn trajectory_starts_with_initial_data() {
        let mut cfg = setup(32, 1.0);
        cfg.v0 = gaussian_bump(&cfg.grid).0;
        cfg.sigma = CoefficientFn::Linear { lambda: 0.5 };
        cfg.store_states = true;
        cfg.snapshot_times = vec![0.5, 1.0];
        cfg.dt = 1.0 / 64.0;
        let t = solve_path(&cfg).unwrap();
        assert_eq!(t.times, vec![0.0, 0.5, 1.0]);
        let mut eng = FftEngine::new(cfg.grid);
        assert_eq!(t.states[0].position, eng.forward(&cfg.v0).unwrap());
        assert_eq!(t.norms.len(), 3);
        // reproducible
        let again = solve_path(&cfg).unwrap();
        assert_eq!(t.norms, again.norms);
        cfg.snapshot_times = vec![0.3];
        assert!(Simulator::new(&cfg).is_err());
    }

    #[test]
    fn packed_pairs_match_single_paths() {
        let mut cfg = setup(64, 0.25);
        cfg.v0 = gaussian_bump(&cfg.grid).0;
        cfg.sigma = CoefficientFn::SineBounded { lambda: 1.0 };
        cfg.b = CoefficientFn::Linear { lambda: 0.5 };
        cfg.dt = 1.0 / 128.0;
        let sim = Simulator::new(&cfg).unwrap();
        let both = sim.map_paths(2, |_, s| s.last().unwrap().clone()).unwrap();
        for (p, packed) in both.iter().enumerate() {
            let mut ws = Workspace::new(cfg.grid);
            let mut single = Vec::new();
            sim.run_batch(&mut ws, &[p as u64], &mut |_, _, x, _| single = x.to_vec()).unwrap();
            let scale = single.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in packed.iter().zip(&single) {
                assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn substeps_share_the_brownian_path() {
        // one coarse step with two substeps sees the sum of the two fine increments
        let mut fine = setup(32, 0.5);
        fine.forced_z = Some(vec![1.0; fine.grid.len()]);
        fine.dt = 0.25;
        fine.store_states = true;
        let mut coarse = fine.clone();
        coarse.dt = 0.5;
        coarse.noise_substeps = 2;
        let a = solve_path(&fine).unwrap();
        let b = solve_path(&coarse).unwrap();
        // the zero-mode velocity integrates the noise exactly: v̂_0(T) = ΔW_0 total
        let va = a.states.last().unwrap().velocity.coeffs[0];
        let vb = b.states.last().unwrap().velocity.coeffs[0];
        assert!((va - vb).norm() <= 1e-12 * va.norm());
    }

    #[test]
    fn blow_up_is_reported() {
        let mut cfg = setup(32, 1.0);
        cfg.v0 = vec![1e13; cfg.grid.len()];
        cfg.b = CoefficientFn::Linear { lambda: 1.0 };
        match solve_path(&cfg) {
            Err(Error::BlowUp { step: 0, .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn picard_without_coefficients_is_exact_at_once() {
        let mut cfg = setup(32, 0.5);
        cfg.v0 = gaussian_bump(&cfg.grid).0;
        cfg.dt = 1.0 / 64.0;
        let r = picard_iterate(&cfg, 3).unwrap();
        assert!(r.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn picard_reaches_the_scheme_output() {
        let mut cfg = setup(32, 0.5);
        cfg.v0 = gaussian_bump(&cfg.grid).0;
        cfg.sigma = CoefficientFn::Linear { lambda: 0.5 };
        cfg.dt = 1.0 / 32.0;
        cfg.store_states = true;
        let (n, _) = cfg.steps();
        let r = picard_iterate(&cfg, n + 1).unwrap();
        assert_eq!(*r.distances.last().unwrap(), 0.0);
        let t = solve_path(&cfg).unwrap();
        let mut eng = FftEngine::new(cfg.grid);
        let (u, _) = eng.inverse(&t.states.last().unwrap().position).unwrap();
        let fixed = r.iterates.last().unwrap().last().unwrap();
        assert!(lattice_distance(&cfg.grid, &u, fixed) < 1e-10);
    }
}
