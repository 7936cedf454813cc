//! Monte-Carlo moments, increment scaling fits and regularity frontiers.

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::lattice::sobolev_weights;
use crate::model::SpectralMeasure;
use crate::solver::{Simulator, SolverConfig};

/// Ordinary least squares `y = slope·x + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub r_squared: f64,
    /// Classical standard error of the slope (infinite for two points).
    pub slope_se: f64,
    pub residuals: Vec<f64>,
}

/// Fits a line through `(xs, ys)`. Needs at least two distinct `x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_se = if xs.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    LinearFit {
        slope,
        intercept,
        residual_rms: (sse / n).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        slope_se,
        residuals,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub t: f64,
    pub alpha: f64,
    pub q: f64,
    pub mean: f64,
    /// Sample standard deviation over `√n_paths`.
    pub std_error: f64,
    pub n_paths: usize,
}

impl MomentEstimate {
    pub fn from_samples(t: f64, alpha: f64, q: f64, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MomentEstimate {
            t,
            alpha,
            q,
            mean,
            std_error: (var / n).sqrt(),
            n_paths: samples.len(),
        }
    }
}

fn check_moment_args(config: &SolverConfig, t: f64, q: f64, n_paths: usize) -> Result<()> {
    if !(0.0..=config.params.horizon).contains(&t) {
        return Err(Error::domain("estimators", format!("t = {t} outside [0, T]")));
    }
    if !(q >= 2.0) {
        return Err(Error::domain("estimators", format!("need q >= 2, got {q}")));
    }
    if n_paths < 2 {
        return Err(Error::domain("estimators", format!("need at least 2 paths, got {n_paths}")));
    }
    Ok(())
}

/// `E‖u(t)‖^q_{H^α}` over paths `0..n_paths`.
pub fn mc_moment(config: &SolverConfig, t: f64, alpha: f64, q: f64, n_paths: usize) -> Result<MomentEstimate> {
    Ok(mc_moments(config, &[t], alpha, q, n_paths)?.remove(0))
}

/// `E‖u(t)‖^q_{H^α}` at several times from the same paths.
pub fn mc_moments(config: &SolverConfig, times: &[f64], alpha: f64, q: f64, n_paths: usize) -> Result<Vec<MomentEstimate>> {
    for &t in times {
        check_moment_args(config, t, q, n_paths)?;
    }
    let mut cfg = config.clone();
    cfg.snapshot_times = times.to_vec();
    let sim = Simulator::new(&cfg)?;
    let recorded = sim.snapshot_times();
    let w = sobolev_weights(&cfg.grid, alpha);
    let slots: Vec<usize> = times.iter().map(|&t| nearest(&recorded, t)).collect();
    let values = sim.map_paths(n_paths as u64, |_, snaps| {
        slots
            .iter()
            .map(|&s| norm_sq(&snaps[s], &w).powf(0.5 * q))
            .collect::<Vec<f64>>()
    })?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let column: Vec<f64> = values.iter().map(|v| v[i]).collect();
            MomentEstimate::from_samples(t, alpha, q, &column)
        })
        .collect())
}

fn nearest(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, &s) in times.iter().enumerate() {
        if (s - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

#[inline]
fn norm_sq(c: &[Complex64], w: &[f64]) -> f64 {
    c.iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum()
}

#[inline]
fn diff_norm_sq(a: &[Complex64], b: &[Complex64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((a, b), w)| w * (a - b).norm_sqr()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub lags: Vec<f64>,
    pub moments: Vec<MomentEstimate>,
    pub slope: f64,
    pub slope_se: f64,
    /// 95% confidence interval.
    pub slope_ci: (f64, f64),
    pub theory_slope: f64,
    /// Competing slopes that must fall outside the interval for a clean verdict.
    pub alternatives: Vec<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Largest lag, when dropped by the residual guard.
    pub dropped_lag: Option<f64>,
}

/// Predicted slope `q(1 − (β+2α)/(2k))` of `E‖u(t+h) − u(t)‖^q_{H^α}`,
/// with the flat measure as the `β = d` case; `None` for other measures.
pub fn theory_increment_slope(mu: &SpectralMeasure, k: f64, alpha: f64, q: f64) -> Option<f64> {
    let beta = match mu {
        SpectralMeasure::Riesz { beta, .. } => *beta,
        SpectralMeasure::Flat { d, level } if *level > 0.0 => *d as f64,
        _ => return None,
    };
    Some(q * (1.0 - (beta + 2.0 * alpha) / (2.0 * k)))
}

const Z95: f64 = 1.959963984540054;

/// Log-log fit of per-lag means of `samples[path][lag]`, with a
/// delta-method interval that accounts for the correlation between lags
/// induced by common random numbers.
pub fn fit_scaling(
    lags: &[f64],
    samples: &[Vec<f64>],
    alpha: f64,
    q: f64,
    t1: f64,
    theory_slope: f64,
    alternatives: &[f64],
    tolerance: f64,
) -> Result<ScalingFit> {
    if lags.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 lags, got {}", lags.len())));
    }
    if samples.len() < 2 || samples.iter().any(|s| s.len() != lags.len()) {
        return Err(Error::DegenerateFit("need at least 2 paths with one value per lag".into()));
    }
    let moments: Vec<MomentEstimate> = (0..lags.len())
        .map(|i| {
            let col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            MomentEstimate::from_samples(t1 + lags[i], alpha, q, &col)
        })
        .collect();
    if let Some(m) = moments.iter().find(|m| !(m.mean > 0.0 && m.mean.is_finite())) {
        return Err(Error::DegenerateFit(format!("moment {} at t = {} is not positive", m.mean, m.t)));
    }

    let fit_on = |keep: usize| -> (LinearFit, f64) {
        let xs: Vec<f64> = lags[..keep].iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = moments[..keep].iter().map(|m| m.mean.ln()).collect();
        let fit = least_squares(&xs, &ys);
        let mx = xs.iter().sum::<f64>() / keep as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let w: Vec<f64> = xs.iter().map(|x| (x - mx) / sxx).collect();
        // Var(slope) = Σ_ij w_i w_j Cov(m_i, m_j) / (m_i m_j n)
        let n = samples.len() as f64;
        let mut var = 0.0;
        for i in 0..keep {
            for j in 0..keep {
                let (mi, mj) = (moments[i].mean, moments[j].mean);
                let cov = samples.iter().map(|s| (s[i] - mi) * (s[j] - mj)).sum::<f64>() / (n - 1.0);
                var += w[i] * w[j] * cov / (mi * mj * n);
            }
        }
        (fit, var.max(0.0).sqrt())
    };

    // order lags ascending for the drop rule
    let mut order: Vec<usize> = (0..lags.len()).collect();
    order.sort_by(|&a, &b| lags[a].total_cmp(&lags[b]));
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        let lags: Vec<f64> = order.iter().map(|&i| lags[i]).collect();
        let samples: Vec<Vec<f64>> = samples.iter().map(|s| order.iter().map(|&i| s[i]).collect()).collect();
        return fit_scaling(&lags, &samples, alpha, q, t1, theory_slope, alternatives, tolerance);
    }

    let mut keep = lags.len();
    let (mut fit, mut se) = fit_on(keep);
    let mut dropped_lag = None;
    let mut abs_res: Vec<f64> = fit.residuals.iter().map(|r| r.abs()).collect();
    abs_res.sort_by(f64::total_cmp);
    let median = abs_res[abs_res.len() / 2];
    if keep > 4 && fit.residuals[keep - 1].abs() > 3.0 * median {
        dropped_lag = Some(lags[keep - 1]);
        keep -= 1;
        (fit, se) = fit_on(keep);
    }
    let ci = (fit.slope - Z95 * se, fit.slope + Z95 * se);
    let inside = |s: f64| s >= ci.0 - tolerance && s <= ci.1 + tolerance;
    let verdict = if !theory_slope.is_finite() {
        Verdict::Inconclusive
    } else if !inside(theory_slope) {
        Verdict::Inconsistent
    } else if alternatives.iter().any(|&a| inside(a)) {
        Verdict::Inconclusive
    } else {
        Verdict::Consistent
    };
    Ok(ScalingFit {
        lags: lags.to_vec(),
        moments,
        slope: fit.slope,
        slope_se: se,
        slope_ci: ci,
        theory_slope,
        alternatives: alternatives.to_vec(),
        tolerance,
        verdict,
        dropped_lag,
    })
}

/// Common-random-number estimates of `E‖u(t1+h) − u(t1)‖^q_{H^α}` over
/// `lags` and their log-log slope. The verdict compares the interval with
/// the predicted slope and with the faster alternative `prediction + 0.2`.
pub fn mc_increment_scaling(
    config: &SolverConfig,
    t1: f64,
    lags: &[f64],
    alpha: f64,
    q: f64,
    n_paths: usize,
) -> Result<ScalingFit> {
    let hmax = lags.iter().cloned().fold(0.0, f64::max);
    if lags.len() < 4 || lags.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::domain("estimators", "need at least 4 positive lags"));
    }
    check_moment_args(config, t1 + hmax, q, n_paths)?;
    let mut cfg = config.clone();
    cfg.snapshot_times = std::iter::once(t1).chain(lags.iter().map(|h| t1 + h)).collect();
    let sim = Simulator::new(&cfg)?;
    let recorded = sim.snapshot_times();
    let base = nearest(&recorded, t1);
    let slots: Vec<usize> = lags.iter().map(|h| nearest(&recorded, t1 + h)).collect();
    let w = sobolev_weights(&cfg.grid, alpha);
    let samples = sim.map_paths(n_paths as u64, |_, snaps| {
        slots
            .iter()
            .map(|&s| diff_norm_sq(&snaps[s], &snaps[base], &w).powf(0.5 * q))
            .collect::<Vec<f64>>()
    })?;
    let theory = theory_increment_slope(&cfg.measure, cfg.params.k, alpha, q).unwrap_or(f64::NAN);
    fit_scaling(lags, &samples, alpha, q, t1, theory, &[theory + 0.2], 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierVerdict {
    Finite,
    Divergent,
    Inconclusive,
}

impl FrontierVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            FrontierVerdict::Finite => "finite",
            FrontierVerdict::Divergent => "divergent",
            FrontierVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierRow {
    pub alpha: f64,
    /// `(N, estimate)` per refinement level.
    pub estimates: Vec<(usize, MomentEstimate)>,
    /// `log₂` of the ratio of the last two successive increments.
    pub log2_ratio: f64,
    pub verdict: FrontierVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierReport {
    pub rows: Vec<FrontierRow>,
    /// Interpolated `α` where the growth ratio crosses 1.
    pub crossover: Option<f64>,
}

/// Half-width of the inconclusive band on `log₂(D₂/D₁)`.
pub const FRONTIER_BAND: f64 = 0.1;

/// Classifies `E‖u(t)‖²_{H^α}` under grid refinement. With successive
/// increments `D₁ = E(N₂) − E(N₁)` and `D₂ = E(N₃) − E(N₂)` (common random
/// numbers across grids), a converging norm has `D₂/D₁ < 1` and a diverging
/// one `D₂/D₁ > 1`; `|log₂(D₂/D₁)| ≤ 0.1` is inconclusive. Increments that
/// are not resolved above two standard errors fall back to the stabilisation
/// rule: finite when the last relative change is below 10%.
pub fn regularity_frontier<B>(build: B, t: f64, alpha_grid: &[f64], n_paths: usize, levels: &[usize]) -> Result<FrontierReport>
where
    B: Fn(usize) -> Result<SolverConfig>,
{
    if levels.len() != 3 {
        return Err(Error::domain("estimators", "frontier classification needs exactly 3 refinement levels"));
    }
    let mut per_level: Vec<Vec<Vec<f64>>> = Vec::new();
    for &n in levels {
        let mut cfg = build(n)?;
        if cfg.grid.n != n {
            return Err(Error::domain("estimators", format!("builder returned N = {} for level {n}", cfg.grid.n)));
        }
        for &a in alpha_grid {
            if !(a >= 0.0 && a < cfg.params.k) {
                return Err(Error::domain("estimators", format!("alpha {a} outside [0, k)")));
            }
        }
        check_moment_args(&cfg, t, 2.0, n_paths)?;
        cfg.snapshot_times = vec![t];
        let sim = Simulator::new(&cfg)?;
        let slot = nearest(&sim.snapshot_times(), t);
        let weights: Vec<Vec<f64>> = alpha_grid.iter().map(|&a| sobolev_weights(&cfg.grid, a)).collect();
        let values = sim.map_paths(n_paths as u64, |_, snaps| {
            weights.iter().map(|w| norm_sq(&snaps[slot], w)).collect::<Vec<f64>>()
        })?;
        per_level.push(values);
    }
    let mut rows = Vec::new();
    for (ai, &alpha) in alpha_grid.iter().enumerate() {
        let col = |l: usize| -> Vec<f64> { per_level[l].iter().map(|v| v[ai]).collect() };
        let estimates: Vec<(usize, MomentEstimate)> = levels
            .iter()
            .enumerate()
            .map(|(l, &n)| (n, MomentEstimate::from_samples(t, alpha, 2.0, &col(l))))
            .collect();
        let diff = |a: usize, b: usize| -> MomentEstimate {
            let (x, y) = (col(a), col(b));
            let d: Vec<f64> = y.iter().zip(&x).map(|(y, x)| y - x).collect();
            MomentEstimate::from_samples(t, alpha, 2.0, &d)
        };
        let (d1, d2) = (diff(0, 1), diff(1, 2));
        let resolved = |d: &MomentEstimate| d.mean > 2.0 * d.std_error && d.mean > 0.0;
        let log2_ratio = (d2.mean / d1.mean).log2();
        let verdict = if resolved(&d1) && resolved(&d2) {
            if log2_ratio < -FRONTIER_BAND {
                FrontierVerdict::Finite
            } else if log2_ratio > FRONTIER_BAND {
                FrontierVerdict::Divergent
            } else {
                FrontierVerdict::Inconclusive
            }
        } else if d2.mean.abs() < 0.1 * estimates[2].1.mean {
            FrontierVerdict::Finite
        } else {
            FrontierVerdict::Inconclusive
        };
        rows.push(FrontierRow {
            alpha,
            estimates,
            log2_ratio,
            verdict,
        });
    }
    let mut crossover = None;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.log2_ratio.is_finite() && b.log2_ratio.is_finite() && a.log2_ratio < 0.0 && b.log2_ratio >= 0.0 {
            let s = -a.log2_ratio / (b.log2_ratio - a.log2_ratio);
            crossover = Some(a.alpha + s * (b.alpha - a.alpha));
            break;
        }
    }
    Ok(FrontierReport { rows, crossover })
}

/// Standard normal quantile, exposed for reporting.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{gaussian_bump, GridSpec};
    use crate::model::{riesz_measure, ModelParams};
    use crate::rng::{stream, Domain};
    use crate::solver::CoefficientFn;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn least_squares_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = least_squares(&xs, &ys);
        assert!((f.slope - 2.5).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!(f.residual_rms < 1e-14 && (f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn z95_matches_the_normal_quantile() {
        assert!((normal_quantile(0.975) - Z95).abs() < 1e-9);
    }

    fn base(n: usize) -> SolverConfig {
        let params = ModelParams::new(1.0, 1, 1.0).unwrap();
        let grid = GridSpec::new(1, 8.0, n).unwrap();
        let mut c = SolverConfig::new(params, riesz_measure(0.5, 1, None).unwrap(), grid);
        c.dt = 1.0 / 64.0;
        c
    }

    #[test]
    fn deterministic_runs_have_no_spread() {
        let mut c = base(64);
        c.v0 = gaussian_bump(&c.grid).0;
        let m = mc_moment(&c, 1.0, 0.5, 2.0, 4).unwrap();
        assert_eq!(m.std_error, 0.0);
        let t = crate::solver::solve_path(&c).unwrap();
        let mut c2 = c.clone();
        c2.alpha = 0.5;
        let t2 = crate::solver::solve_path(&c2).unwrap();
        assert!((m.mean - t2.norms.last().unwrap().sobolev_norm_sq_alpha).abs() < 1e-12 * m.mean);
        assert!(t.norms.len() == 2);
    }

    #[test]
    fn jensen_between_second_and_fourth_moments() {
        let mut c = base(32);
        c.v0 = gaussian_bump(&c.grid).0;
        c.sigma = CoefficientFn::Linear { lambda: 1.0 };
        let m2 = mc_moment(&c, 1.0, 0.25, 2.0, 200).unwrap();
        let m4 = mc_moment(&c, 1.0, 0.25, 4.0, 200).unwrap();
        let se = 2.0 * m2.mean * m2.std_error + m4.std_error;
        assert!(m4.mean >= m2.mean.powi(2) - 3.0 * se);
    }

    #[test]
    fn estimates_are_reproducible_and_shrink_with_more_paths() {
        let mut c = base(32);
        c.forced_z = Some(gaussian_bump(&c.grid).0);
        let a = mc_moment(&c, 1.0, 0.0, 2.0, 100).unwrap();
        let b = mc_moment(&c, 1.0, 0.0, 2.0, 100).unwrap();
        assert_eq!(a, b);
        let big = mc_moment(&c, 1.0, 0.0, 2.0, 400).unwrap();
        let r = big.std_error / a.std_error;
        assert!((0.4..=0.6).contains(&r), "{r}");
    }

    fn synthetic(lags: &[f64], slope: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        // lognormal multiplicative noise, common across lags within a path
        let mut rng = stream(seed, 0, 0, Domain::Test);
        (0..n)
            .map(|_| {
                let common: f64 = rng.sample(StandardNormal);
                lags.iter()
                    .map(|h| {
                        let own: f64 = rng.sample(StandardNormal);
                        h.powf(slope) * (0.2 * common + 0.1 * own).exp()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let lags: Vec<f64> = (3..=10).map(|e| 2f64.powi(-e)).collect();
        let samples: Vec<Vec<f64>> = (0..3).map(|i| lags.iter().map(|h| (1.0 + 0.1 * i as f64) * h.powf(1.25)).collect()).collect();
        let f = fit_scaling(&lags, &samples, 0.0, 2.0, 0.5, 1.25, &[], 1e-9).unwrap();
        assert!((f.slope - 1.25).abs() < 5e-4);
        assert_eq!(f.verdict, Verdict::Consistent);
    }

    #[test]
    fn confidence_intervals_are_calibrated() {
        let lags: Vec<f64> = (3..=8).map(|e| 2f64.powi(-e)).collect();
        let covered = (0..100)
            .filter(|&rep| {
                let s = synthetic(&lags, 1.5, 400, 1000 + rep);
                let f = fit_scaling(&lags, &s, 0.0, 2.0, 0.5, 1.5, &[], 0.0).unwrap();
                f.slope_ci.0 <= 1.5 && 1.5 <= f.slope_ci.1
            })
            .count();
        assert!(covered >= 90, "{covered}/100");
    }

    #[test]
    fn theory_slopes() {
        let mu = riesz_measure(0.5, 1, None).unwrap();
        assert_eq!(theory_increment_slope(&mu, 1.0, 0.0, 2.0), Some(1.5));
        let flat = SpectralMeasure::flat(1, 1.0).unwrap();
        assert_eq!(theory_increment_slope(&flat, 2.0, 0.25, 2.0), Some(1.25));
    }

    #[test]
    fn free_evolution_increments_scale_at_least_quadratically() {
        // U₁ alone with smooth data: ‖u(t+h) − u(t)‖² ≤ C h² (δ = 1)
        let mut c = base(64);
        c.v0 = gaussian_bump(&c.grid).0;
        c.dt = 1.0 / 1024.0;
        let lags: Vec<f64> = (3..=8).map(|e| 2f64.powi(-e)).collect();
        let f = mc_increment_scaling(&c, 0.5, &lags, 0.0, 2.0, 2).unwrap();
        assert!(f.slope >= 2.0 - 1e-3, "{}", f.slope);
    }
}
