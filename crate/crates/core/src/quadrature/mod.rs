//! Deterministic spectral functionals: condition integrals, the isometry
//! functional, the increasing process and exact Gaussian increment moments.
//!
//! Two routes are implemented. For the Gaussian bump `Z(x) = e^{−|x|²/2}`
//! the `ξ`-integral is reduced to a radial integral against a tabulated
//! convolution of `μ` with `|ℱZ|²`. For a `Z` given on a lattice, the
//! shifted integral `∫ μ(dη) H(|ξ−η|)` is evaluated at every mode.

pub mod kernels;
pub(crate) mod radial;
pub mod rules;

use crate::error::{Error, Result};
use crate::estimators::{least_squares, LinearFit};
use crate::lattice::GridSpec;
use crate::model::{check_dalang_condition, SpectralMeasure};
use crate::special::gauss_legendre;
pub use kernels::TimeKernel;
use radial::{bump_weight, oscillatory_functional, plain_functional, shifted_weight, BumpConvolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub truncation_radius: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            truncation_radius: 4096.0,
            max_subdivisions: 1_000_000,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.truncation_radius > 0.0
            && self.max_subdivisions > 0
            && self.rel_tol.is_finite()
            && self.truncation_radius.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::domain("quadrature", format!("settings must all be positive: {self:?}")))
        }
    }
}

/// Deterministic, constant-in-time integrand `Z` of the stochastic integral.
#[derive(Debug, Clone)]
pub enum DeterministicZ {
    /// `Z(x) = e^{−|x|²/2}`, so `|ℱZ(ξ)|² = (2π)^d e^{−|ξ|²}`.
    GaussianBump,
    /// Samples of `|ℱZ(ξ_j)|²` at the modes of `grid`, in FFT order.
    GridFunction { grid: GridSpec, spectrum: Vec<f64> },
}

/// Evaluates time-kernel functionals for one `(μ, k, α, Z)`; reuses
/// the tabulated convolution across calls.
pub struct Functionals<'a> {
    mu: &'a SpectralMeasure,
    k: f64,
    alpha: f64,
    z: &'a DeterministicZ,
    settings: QuadratureSettings,
    bump: Option<BumpConvolution>,
}

impl<'a> Functionals<'a> {
    pub fn new(
        mu: &'a SpectralMeasure,
        k: f64,
        alpha: f64,
        z: &'a DeterministicZ,
        settings: &QuadratureSettings,
    ) -> Result<Self> {
        settings.validate()?;
        let report = check_dalang_condition(mu, k, alpha, settings)?;
        if !report.holds {
            return Err(Error::domain(
                "quadrature",
                format!("condition (1.5) fails for k = {k}, alpha = {alpha} ({:?})", report.status),
            ));
        }
        let bump = match z {
            DeterministicZ::GaussianBump => Some(BumpConvolution::new(mu, settings)?),
            DeterministicZ::GridFunction { grid, spectrum } => {
                if grid.d != mu.dim() {
                    return Err(Error::domain("quadrature", "Z grid dimension differs from the measure's"));
                }
                if spectrum.len() != grid.len() {
                    return Err(Error::domain(
                        "quadrature",
                        format!("Z spectrum has {} samples, grid has {}", spectrum.len(), grid.len()),
                    ));
                }
                if spectrum.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::domain("quadrature", "|FZ|^2 samples must be non-negative"));
                }
                None
            }
        };
        Ok(Functionals {
            mu,
            k,
            alpha,
            z,
            settings: *settings,
            bump,
        })
    }

    /// `∫ dξ |ℱZ(ξ)|² ∫ μ(dη) (1+|ξ−η|²)^α τ(|ξ−η|^k)`.
    pub fn apply(&self, kernel: TimeKernel) -> Result<f64> {
        if kernel.is_zero() {
            return Ok(0.0);
        }
        match (&self.bump, self.z) {
            (Some(conv), _) => {
                let w = bump_weight(conv, self.mu.dim(), self.alpha);
                oscillatory_functional(&w, self.k, kernel, &self.settings)
            }
            (None, DeterministicZ::GridFunction { grid, spectrum }) => {
                let cell = grid.dxi().powi(grid.d as i32);
                let mut total = 0.0;
                for (idx, &power) in spectrum.iter().enumerate() {
                    if power == 0.0 {
                        continue;
                    }
                    let xi = grid.mode_vector(idx);
                    total += power * shifted_kernel_integral(self.mu, self.k, self.alpha, kernel, &xi, &self.settings)?;
                }
                Ok(cell * total)
            }
            (None, DeterministicZ::GaussianBump) => unreachable!("bump table built in new"),
        }
    }

    /// `∫_0^T ds J̄(s)` with `J̄(s)` the pointwise-in-time functional, by
    /// Gauss-Legendre on dyadically graded panels towards `s = 0`.
    fn integrate_pointwise_in_time(&self, horizon: f64) -> Result<f64> {
        let mut previous: Option<f64> = None;
        for &n in &[8usize, 16, 32] {
            let (x, w) = gauss_legendre(n);
            let mut total = 0.0;
            let levels = 40;
            let mut hi = horizon;
            for level in 0..=levels {
                let lo = if level == levels { 0.0 } else { 0.5 * hi };
                for (&xi, &wi) in x.iter().zip(&w) {
                    let s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
                    total += 0.5 * (hi - lo) * wi * self.apply(TimeKernel::Pointwise { s })?;
                }
                hi = lo;
            }
            if let Some(p) = previous {
                if (total - p).abs() <= self.settings.rel_tol * 10.0 * total.abs() {
                    return Ok(total);
                }
            }
            previous = Some(total);
        }
        Ok(previous.unwrap_or(0.0))
    }
}

/// `J(ξ, s) = ∫ μ(dη) (1+|ξ−η|²)^α ℱG(s)(ξ−η)²`.
pub fn weighted_kernel_integral(
    mu: &SpectralMeasure,
    k: f64,
    alpha: f64,
    s: f64,
    xi: &[f64],
    settings: &QuadratureSettings,
) -> Result<f64> {
    settings.validate()?;
    if xi.len() != mu.dim() {
        return Err(Error::domain("quadrature", "xi has the wrong dimension"));
    }
    if !check_dalang_condition(mu, k, alpha, settings)?.holds {
        return Err(Error::domain("quadrature", "condition (1.5) fails"));
    }
    shifted_kernel_integral(mu, k, alpha, TimeKernel::Pointwise { s }, xi, settings)
}

/// `∫ μ(dη) (1+|ξ−η|²)^α τ(|ξ−η|^k)` for any time kernel.
pub(crate) fn shifted_kernel_integral(
    mu: &SpectralMeasure,
    k: f64,
    alpha: f64,
    kernel: TimeKernel,
    xi: &[f64],
    settings: &QuadratureSettings,
) -> Result<f64> {
    let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    match mu {
        SpectralMeasure::FiniteAtoms { atoms, .. } => Ok(atoms
            .iter()
            .map(|a| {
                let q = a
                    .location
                    .iter()
                    .zip(xi)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                a.mass * (1.0 + q * q).powf(alpha) * kernel.eval(q.powf(k))
            })
            .sum()),
        _ if mu.is_zero() => Ok(0.0),
        _ => {
            let w = shifted_weight(mu, r, alpha, settings);
            oscillatory_functional(&w, k, kernel, settings)
        }
    }
}

/// `∫ μ(dη) (1+|ξ−η|²)^{−γ}`, the shifted condition integral.
pub fn shifted_condition_integral(
    mu: &SpectralMeasure,
    gamma_exp: f64,
    xi: &[f64],
    settings: &QuadratureSettings,
) -> Result<f64> {
    settings.validate()?;
    if xi.len() != mu.dim() {
        return Err(Error::domain("quadrature", "xi has the wrong dimension"));
    }
    let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    match mu {
        SpectralMeasure::FiniteAtoms { atoms, .. } => Ok(atoms
            .iter()
            .map(|a| {
                let q2: f64 = a.location.iter().zip(xi).map(|(x, y)| (x - y) * (x - y)).sum();
                a.mass * (1.0 + q2).powf(-gamma_exp)
            })
            .sum()),
        _ if mu.is_zero() => Ok(0.0),
        _ => {
            let w = shifted_weight(mu, r, 0.0, settings);
            plain_functional(&w, &|q: f64| (1.0 + q * q).powf(-gamma_exp), settings)
        }
    }
}

/// `I^α_{G,Z} = ∫_0^T ds ∫ dξ |ℱZ(ξ)|² J(ξ, s)`. With `reversed` the time
/// integral is taken pointwise in `s` (the `G(T−s)` form); otherwise the
/// `s`-integral is done in closed form.
pub fn isometry_functional(
    mu: &SpectralMeasure,
    k: f64,
    alpha: f64,
    z: &DeterministicZ,
    horizon: f64,
    reversed: bool,
    settings: &QuadratureSettings,
) -> Result<f64> {
    if !(horizon >= 0.0) {
        return Err(Error::domain("quadrature", format!("T must be >= 0, got {horizon}")));
    }
    if horizon == 0.0 {
        return Ok(0.0);
    }
    let f = Functionals::new(mu, k, alpha, z, settings)?;
    if reversed {
        f.integrate_pointwise_in_time(horizon)
    } else {
        f.apply(TimeKernel::Variance { t: horizon })
    }
}

/// Meyer process `⟨v_{G,Z}⟩_t`.
pub fn increasing_process(
    mu: &SpectralMeasure,
    k: f64,
    alpha: f64,
    z: &DeterministicZ,
    t: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("quadrature", format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Functionals::new(mu, k, alpha, z, settings)?.apply(TimeKernel::Variance { t })
}

fn check_times(t1: f64, t2: f64) -> Result<()> {
    if !(0.0 <= t1 && t1 <= t2 && t2.is_finite()) {
        return Err(Error::domain("quadrature", format!("need 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}")));
    }
    Ok(())
}

/// `E‖u_{G,Z}(t2) − u_{G,Z}(t1)‖²_{H^α}`.
pub fn increment_second_moment(
    mu: &SpectralMeasure,
    k: f64,
    alpha: f64,
    z: &DeterministicZ,
    t1: f64,
    t2: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    check_times(t1, t2)?;
    if t1 == t2 {
        return Ok(0.0);
    }
    Functionals::new(mu, k, alpha, z, settings)?.apply(TimeKernel::Increment { t1, t2 })
}

/// `E⟨u_{G,Z}(t2), u_{G,Z}(t1)⟩_{H^α}`.
pub fn cross_covariance(
    mu: &SpectralMeasure,
    k: f64,
    alpha: f64,
    z: &DeterministicZ,
    t1: f64,
    t2: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    check_times(t1, t2)?;
    Functionals::new(mu, k, alpha, z, settings)?.apply(TimeKernel::Cross { t1, t2 })
}

/// Least-squares fit of `log m(h) = slope · log h + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
}

pub fn fit_power_law(lags: &[f64], moments: &[f64]) -> Result<SlopeFit> {
    if lags.len() != moments.len() || lags.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need matching lags and moments, got {} and {}",
            lags.len(),
            moments.len()
        )));
    }
    if let Some(m) = moments.iter().find(|m| !(**m > f64::MIN_POSITIVE && m.is_finite())) {
        return Err(Error::DegenerateFit(format!("moment {m} is not a positive finite number")));
    }
    let xs: Vec<f64> = lags.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let LinearFit {
        slope,
        intercept,
        residual_rms,
        ..
    } = least_squares(&xs, &ys);
    Ok(SlopeFit {
        slope,
        intercept,
        residual: residual_rms,
        lags: lags.to_vec(),
        moments: moments.to_vec(),
    })
}

/// Log-log slope of the exact increment second moment over `lags` at `t1`.
pub fn scaling_slope(
    mu: &SpectralMeasure,
    k: f64,
    alpha: f64,
    z: &DeterministicZ,
    t1: f64,
    lags: &[f64],
    settings: &QuadratureSettings,
) -> Result<SlopeFit> {
    if lags.len() < 4 {
        return Err(Error::domain("quadrature", format!("need at least 4 lags, got {}", lags.len())));
    }
    if lags.iter().any(|h| !(*h > 0.0)) || !(t1 >= 0.0) {
        return Err(Error::domain("quadrature", "lags must be positive and t1 >= 0"));
    }
    let f = Functionals::new(mu, k, alpha, z, settings)?;
    let moments = lags
        .iter()
        .map(|&h| f.apply(TimeKernel::Increment { t1, t2: t1 + h }))
        .collect::<Result<Vec<f64>>>()?;
    fit_power_law(lags, &moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{riesz_measure, Atom};
    use crate::propagator::Propagator;
    use std::f64::consts::PI;

    fn s() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn shifted_condition_matches_smooth_substitution() {
        // η = ±t² removes the |η|^{-1/2} singularity:
        // ∫ |η|^{-1/2} (1+(η−r)²)^{-1} dη = ∫_0^∞ 2[(1+(t²−r)²)^{-1} + (1+(t²+r)²)^{-1}] dt
        let mu = riesz_measure(0.5, 1, Some(1.0)).unwrap();
        let (x, w) = crate::special::gauss_legendre(20);
        for r in [0.3, 1.0, 7.5] {
            // composite rule on t ∈ [0, 60], panels of width 0.05; the t^{-4} tail is added in closed form
            let f = |t: f64| 2.0 * (1.0 / (1.0 + (t * t - r).powi(2)) + 1.0 / (1.0 + (t * t + r).powi(2)));
            let body: f64 = (0..1200)
                .map(|p| {
                    let a = 0.05 * p as f64;
                    x.iter().zip(&w).map(|(&u, &wi)| 0.025 * wi * f(a + 0.025 * (u + 1.0))).sum::<f64>()
                })
                .sum();
            let oracle = body + 4.0 / (3.0 * 60f64.powi(3));
            let v = shifted_condition_integral(&mu, 1.0, &[r], &s()).unwrap();
            assert!((v - oracle).abs() / oracle < 1e-6, "r={r}: {v} vs {oracle}");
        }
    }

    fn origin_atom(mass: f64) -> SpectralMeasure {
        SpectralMeasure::atoms(
            1,
            vec![Atom {
                location: vec![0.0],
                mass,
            }],
        )
        .unwrap()
    }

    #[test]
    fn atom_evaluates_the_integrand() {
        let mu = origin_atom(2.5);
        let prop = Propagator::new(1.0, 1.0).unwrap();
        let v = weighted_kernel_integral(&mu, 1.0, 0.3, 0.8, &[1.7], &s()).unwrap();
        let expected = 2.5 * (1.0 + 1.7f64 * 1.7).powf(0.3) * prop.fourier_g(0.8, 1.7).powi(2);
        assert!((v - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn riesz_kernel_integral_matches_closed_form() {
        // 2c ∫_0^∞ p^{-5/2} sin²(p) dp = 2c · (-Γ(-3/2) cos(-3π/4) 2^{1/2})
        let mu = riesz_measure(0.5, 1, None).unwrap();
        let c = (2.0 * PI).sqrt();
        let gamma_m32 = 4.0 * PI.sqrt() / 3.0;
        let exact = 2.0 * c * gamma_m32 * (3.0 * PI / 4.0).cos().abs() * 2f64.sqrt();
        let v = weighted_kernel_integral(&mu, 1.0, 0.0, 1.0, &[0.0], &s()).unwrap();
        assert!((v - exact).abs() / exact < 1e-7, "{v} vs {exact}");
    }

    #[test]
    fn zero_horizon_and_zero_lag() {
        let mu = riesz_measure(0.5, 1, None).unwrap();
        let z = DeterministicZ::GaussianBump;
        assert_eq!(isometry_functional(&mu, 1.0, 0.0, &z, 0.0, false, &s()).unwrap(), 0.0);
        assert_eq!(increasing_process(&mu, 1.0, 0.0, &z, 0.0, &s()).unwrap(), 0.0);
        assert_eq!(increment_second_moment(&mu, 1.0, 0.0, &z, 0.3, 0.3, &s()).unwrap(), 0.0);
    }

    #[test]
    fn failing_condition_is_rejected() {
        let mu = riesz_measure(1.5, 2, None).unwrap();
        let z = DeterministicZ::GaussianBump;
        let err = increasing_process(&mu, 1.0, 0.5, &z, 1.0, &s()).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn power_law_fit_is_exact_on_synthetic_data() {
        let lags: Vec<f64> = (3..=10).map(|j| 2f64.powi(-j)).collect();
        let moments: Vec<f64> = lags.iter().map(|h| 3.7 * h.powf(1.5)).collect();
        let fit = fit_power_law(&lags, &moments).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-13);
        assert!((fit.intercept - 3.7f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-13);
        assert!(matches!(fit_power_law(&lags[..2], &[1.0, 0.0]), Err(Error::DegenerateFit(_))));
    }
}
