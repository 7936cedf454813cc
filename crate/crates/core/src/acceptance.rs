//! The acceptance suite: one self-contained check per criterion, shared by
//! the `acceptance` test target and `fracwave self-test`.
//!
//! `Scale::Full` runs the configurations as specified. `Scale::Quick`
//! reduces path counts and grid sizes (noted per criterion in the detail
//! line); tolerances are never loosened.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::estimators::{mc_increment_scaling, mc_moments, regularity_frontier, FrontierVerdict, MomentEstimate};
use crate::lattice::{gaussian_bump, sobolev_weights, FftEngine, GridSpec, SpectralField, StateVector};
use crate::model::{
    check_dalang_condition_with, check_eta_condition_with, riesz_measure, Method, ModelParams, SpectralMeasure,
};
use crate::noise::{validate_covariance, NoiseSpec};
use crate::propagator::Propagator;
use crate::quadrature::{
    isometry_functional, scaling_slope, shifted_condition_integral, weighted_kernel_integral, DeterministicZ,
    QuadratureSettings,
};
use crate::rng::{stream, Domain};
use crate::solver::{linear_propagate, picard_iterate, picard_mean_square, single_mode_field, solve_path, CoefficientFn, Simulator, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

/// Deliberate defects for checking that the suite catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Flip the sign of the velocity Duhamel kernel in the solver.
    FlipKernelSign,
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<22} {}  ({:.1}s)  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub const CRITERIA: &[(u8, &str)] = &[
    (1, "isometry"),
    (2, "increment-rate"),
    (3, "mc-scaling"),
    (4, "condition-checker"),
    (5, "kernel-shift-bounds"),
    (6, "linear-exactness"),
    (7, "regularity-frontier"),
    (8, "moment-boundedness"),
    (9, "picard-contraction"),
    (10, "noise-validation"),
];

pub fn run_all(scale: Scale, mutation: Option<Mutation>) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, scale, mutation)).collect()
}

pub fn run_criterion(id: u8, scale: Scale, mutation: Option<Mutation>) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let outcome = match id {
        1 => isometry(scale, mutation),
        2 => increment_rate(),
        3 => mc_scaling(scale),
        4 => condition_checker(),
        5 => kernel_shift_bounds(),
        6 => linear_exactness(),
        7 => frontier(scale),
        8 => moment_boundedness(scale),
        9 => picard(),
        10 => noise_validation(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

type Outcome = Result<(bool, String)>;

fn bump_config(k: f64, horizon: f64, mu: SpectralMeasure, n: usize, dt: f64) -> Result<SolverConfig> {
    let d = mu.dim();
    let params = ModelParams::new(k, d, horizon)?;
    let grid = GridSpec::new(d, 8.0, n)?;
    let mut c = SolverConfig::new(params, mu, grid);
    c.dt = dt;
    c.forced_z = Some(gaussian_bump(&grid).0);
    Ok(c)
}

fn isometry(scale: Scale, mutation: Option<Mutation>) -> Outcome {
    let n_paths = if scale == Scale::Full { 2000 } else { 400 };
    let alpha = 0.25;
    let mu = riesz_measure(0.5, 1, None)?;
    let cfg = bump_config(1.0, 1.0, mu.clone(), 512, 2f64.powi(-10))?;
    let mut sim = Simulator::new(&cfg)?;
    if mutation == Some(Mutation::FlipKernelSign) {
        sim = sim.with_flipped_kernel();
    }
    let w = sobolev_weights(&cfg.grid, alpha);
    let values = sim.map_paths(n_paths, |_, snaps| {
        let last = snaps.last().expect("final snapshot");
        last.iter().zip(&w).map(|(c, w)| w * c.norm_sqr()).sum::<f64>()
    })?;
    let est = MomentEstimate::from_samples(1.0, alpha, 2.0, &values);
    let exact = isometry_functional(&mu, 1.0, alpha, &DeterministicZ::GaussianBump, 1.0, true, &QuadratureSettings::default())?;
    let rel = (est.mean - exact).abs() / exact;
    Ok((
        rel <= 0.05,
        format!(
            "MC {:.5e} ± {:.2e} vs quadrature {:.5e}: relative error {:.4e} (limit 0.05, {} paths)",
            est.mean, est.std_error, exact, rel, n_paths
        ),
    ))
}

fn increment_rate() -> Outcome {
    let settings = QuadratureSettings::default();
    let lags: Vec<f64> = (3..=10).map(|e| 2f64.powi(-e)).collect();
    let cases = [
        ("k=1 beta=0.5 alpha=0 d=1", 1.0, riesz_measure(0.5, 1, None)?, 0.0, 1.5),
        // beta = d lies outside the Riesz family; the flat measure is its white-noise limit
        ("k=2 beta=1 alpha=0.25 d=1 (flat)", 2.0, SpectralMeasure::flat(1, 1.0)?, 0.25, 1.25),
        ("k=1 beta=1 alpha=0 d=2", 1.0, riesz_measure(1.0, 2, None)?, 0.0, 1.0),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, k, mu, alpha, target) in cases {
        let fit = scaling_slope(&mu, k, alpha, &DeterministicZ::GaussianBump, 0.5, &lags, &settings)?;
        let pass = (fit.slope - target).abs() <= 0.05;
        ok &= pass;
        parts.push(format!(
            "[{label}: slope {:.4} target {target} {}]",
            fit.slope,
            if pass { "ok" } else { "off" }
        ));
    }
    Ok((ok, parts.join(" ")))
}

fn mc_scaling(scale: Scale) -> Outcome {
    let (n, n_paths) = match scale {
        Scale::Full => (32768, 2000),
        Scale::Quick => (4096, 200),
    };
    let lags: Vec<f64> = (3..=10).map(|e| 2f64.powi(-e)).collect();
    let cfg = bump_config(1.0, 0.5 + 0.125, riesz_measure(0.5, 1, None)?, n, 2f64.powi(-10))?;
    let fit = mc_increment_scaling(&cfg, 0.5, &lags, 0.0, 2.0, n_paths)?;
    let reference = scaling_slope(
        &cfg.measure,
        1.0,
        0.0,
        &DeterministicZ::GaussianBump,
        0.5,
        &lags,
        &QuadratureSettings::default(),
    )?;
    let (lo, hi) = fit.slope_ci;
    let pass = lo <= 1.5 && 1.5 <= hi && !(lo <= 1.7 && 1.7 <= hi);
    Ok((
        pass,
        format!(
            "slope {:.4}, 95% CI [{:.4}, {:.4}] must contain 1.5 and exclude 1.7; quadrature slope over the same lags {:.4} (N={n}, {n_paths} paths{})",
            fit.slope,
            lo,
            hi,
            reference.slope,
            fit.dropped_lag.map_or(String::new(), |h| format!(", dropped lag {h}"))
        ),
    ))
}

/// One sweep point `(d, k, α, β, η)`. Categories cycle through the
/// (1.5) boundary from either side, the (2.5.0) boundary from either side,
/// and unconstrained draws.
fn sweep_point(rng: &mut impl Rng, category: usize) -> (usize, f64, f64, f64, f64) {
    loop {
        let d = rng.random_range(1..=3usize);
        let beta = rng.random_range(0.05..d as f64 - 0.05);
        let alpha = rng.random_range(0.0..1.0);
        let (k, eta) = match category {
            // β = 2(k − α) ± 0.01
            0 | 1 => {
                let sign = if category == 0 { 1.0 } else { -1.0 };
                let k = alpha + 0.5 * (beta - sign * 0.01);
                (k, rng.random_range(alpha / k..1.0))
            }
            // β = 2(kη − α) ± 0.01
            2 | 3 => {
                let sign = if category == 2 { 1.0 } else { -1.0 };
                let k = rng.random_range(0.25..2.5);
                (k, (0.5 * (beta - sign * 0.01) + alpha) / k)
            }
            _ => {
                let k = rng.random_range(0.25..2.5);
                if k <= alpha {
                    continue;
                }
                (k, rng.random_range(alpha / k..1.0))
            }
        };
        if k > alpha && eta > alpha / k && eta < 1.0 {
            return (d, k, alpha, beta, eta);
        }
    }
}

fn condition_checker() -> Outcome {
    let settings = QuadratureSettings::default();
    let mut rng = stream(4, 0, 0, Domain::Test);
    let mut agree = 0;
    let mut total = 0;
    let mut mismatches = Vec::new();
    for i in 0..100 {
        let (d, k, alpha, beta, eta) = sweep_point(&mut rng, i % 5);
        let mu = riesz_measure(beta, d, None)?;
        let pairs = [
            (
                check_dalang_condition_with(&mu, k, alpha, Some(Method::Analytic), &settings)?,
                check_dalang_condition_with(&mu, k, alpha, Some(Method::Quadrature), &settings)?,
            ),
            (
                check_eta_condition_with(&mu, k, alpha, eta, Some(Method::Analytic), &settings)?,
                check_eta_condition_with(&mu, k, alpha, eta, Some(Method::Quadrature), &settings)?,
            ),
        ];
        for (a, q) in pairs {
            total += 1;
            if a.holds == q.holds && a.status == q.status {
                agree += 1;
            } else if mismatches.len() < 3 {
                mismatches.push(format!(
                    "{} d={d} k={k:.3} alpha={alpha:.3} beta={beta:.3} eta={eta:.3}: analytic {:?} quadrature {:?}",
                    a.condition.name(),
                    a.status,
                    q.status
                ));
            }
        }
    }
    Ok((
        agree == total,
        format!("{agree}/{total} verdicts agree over 100 points (80 within 0.01 of a boundary) {}", mismatches.join("; ")),
    ))
}

fn kernel_shift_bounds() -> Outcome {
    let factor = 1.0 + 1e-6;
    let mut kernel_violations = 0;
    let mut kernel_samples = 0;
    for &k in &[0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
        for &horizon in &[0.5, 1.0, 4.0] {
            let p = Propagator::new(k, horizon)?;
            for it in 0..=400 {
                let t = horizon * it as f64 / 400.0;
                for ir in 0..=2000 {
                    let r = 1e-4 * 1e12f64.powf(ir as f64 / 2000.0);
                    kernel_samples += 1;
                    if p.fourier_g(t, r).powi(2) > p.kernel_bound(r) * factor {
                        kernel_violations += 1;
                    }
                }
            }
        }
    }

    let settings = QuadratureSettings::default();
    let mut shift_violations = 0;
    let mut shift_samples = 0;
    let mut uniform_violations = 0;
    let mut rng = stream(5, 0, 0, Domain::Test);
    let cases = [(1usize, 0.5, 1.0, 0.0), (2, 1.0, 1.0, 0.25), (3, 1.5, 1.5, 0.5), (1, 0.8, 2.0, 1.0)];
    for (d, beta, k, alpha) in cases {
        let mu = riesz_measure(beta, d, None)?;
        let gamma = k - alpha;
        let base = shifted_condition_integral(&mu, gamma, &vec![0.0; d], &settings)?;
        for i in 0..50 {
            let radius = if i == 0 { 0.0 } else { 0.05 * 1.2f64.powi(i) };
            let mut dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|x| *x *= radius / norm);
            shift_samples += 1;
            if shifted_condition_integral(&mu, gamma, &dir, &settings)? > base * factor {
                shift_violations += 1;
            }
        }
        // (1.6.1) on a coarser (s, ξ) grid
        let horizon = 1.0;
        let bound = Propagator::new(k, horizon)?.kernel_bound(0.0) * base;
        for &s in &[0.5, 1.0] {
            for &radius in &[0.0, 1.0, 10.0] {
                let mut xi = vec![0.0; d];
                xi[0] = radius;
                if weighted_kernel_integral(&mu, k, alpha, s, &xi, &settings)? > bound * factor {
                    uniform_violations += 1;
                }
            }
        }
    }
    Ok((
        kernel_violations + shift_violations + uniform_violations == 0,
        format!(
            "kernel bound: {kernel_violations} violations in {kernel_samples} samples; shift bound: {shift_violations} in {shift_samples}; uniform bound: {uniform_violations} in 24"
        ),
    ))
}

fn linear_exactness() -> Outcome {
    let mut rng = stream(6, 0, 0, Domain::Test);
    let mut worst_closed: f64 = 0.0;
    let mut worst_group: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    let grid = GridSpec::new(1, 8.0, 256)?;
    let mut engine = FftEngine::new(grid);
    for _ in 0..20 {
        let j = rng.random_range(1..128usize);
        let k = rng.random_range(0.5..2.0);
        let r = grid.mode_radius(j);
        let w = r.powf(k);
        let u0 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let v0 = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let state = StateVector {
            position: single_mode_field(&grid, j, u0),
            velocity: single_mode_field(&grid, j, v0),
        };
        let p = Propagator::new(k, 10.0)?;
        for _ in 0..5 {
            let dt = rng.random_range(1e-4..1.0);
            let steps = rng.random_range(1..8usize);
            let total = dt * steps as f64;
            // closed form through the solver
            let params = ModelParams::new(k, 1, total)?;
            let mut cfg = SolverConfig::new(params, SpectralMeasure::zero(1)?, grid);
            cfg.dt = dt;
            cfg.store_states = true;
            cfg.v0 = engine.inverse(&state.position)?.0;
            cfg.v0_tilde = engine.inverse(&state.velocity)?.0;
            let traj = solve_path(&cfg)?;
            let last = traj.states.last().expect("final state");
            let uh = engine.forward(&cfg.v0)?.coeffs[j];
            let vh = engine.forward(&cfg.v0_tilde)?.coeffs[j];
            let want = uh * p.fourier_dg(total, r) + vh * p.fourier_g(total, r);
            let scale = (w * uh.norm()).max(vh.norm()) / w;
            worst_closed = worst_closed.max((last.position.coeffs[j] - want).norm() / scale);

            // group property and energy
            let a = linear_propagate(&linear_propagate(&state, dt, k)?, total, k)?;
            let b = linear_propagate(&state, dt + total, k)?;
            let e0 = w * w * state.position.coeffs[j].norm_sqr() + state.velocity.coeffs[j].norm_sqr();
            let diff = (w * w * (a.position.coeffs[j] - b.position.coeffs[j]).norm_sqr()
                + (a.velocity.coeffs[j] - b.velocity.coeffs[j]).norm_sqr())
            .sqrt();
            worst_group = worst_group.max(diff / e0.sqrt());
            let e1 = w * w * b.position.coeffs[j].norm_sqr() + b.velocity.coeffs[j].norm_sqr();
            worst_energy = worst_energy.max((e1 - e0).abs() / e0);
        }
    }
    Ok((
        worst_closed <= 1e-12 && worst_group <= 1e-12 && worst_energy <= 1e-12,
        format!(
            "max relative error: closed form {worst_closed:.2e}, group property {worst_group:.2e}, energy {worst_energy:.2e} (limit 1e-12; 20 modes x 5 steps)"
        ),
    ))
}

fn frontier(scale: Scale) -> Outcome {
    let n_paths = if scale == Scale::Full { 400 } else { 100 };
    let alphas: Vec<f64> = (0..20).map(|i| 0.05 * i as f64).collect();
    let build = |n: usize| bump_config(1.0, 1.0, riesz_measure(0.5, 1, None)?, n, 2f64.powi(-10));
    let report = regularity_frontier(build, 1.0, &alphas, n_paths, &[256, 512, 1024])?;
    let verdict = |a: f64| {
        report
            .rows
            .iter()
            .find(|r| (r.alpha - a).abs() < 1e-9)
            .map(|r| r.verdict)
            .unwrap_or(FrontierVerdict::Inconclusive)
    };
    let finite_ok = [0.2, 0.4, 0.6].iter().all(|&a| verdict(a) == FrontierVerdict::Finite);
    let divergent_ok = [0.9, 0.95].iter().all(|&a| verdict(a) == FrontierVerdict::Divergent);
    let alphas_with = |v: FrontierVerdict| report.rows.iter().filter(move |r| r.verdict == v).map(|r| r.alpha);
    let last_finite = alphas_with(FrontierVerdict::Finite).fold(f64::NAN, f64::max);
    let first_divergent = alphas_with(FrontierVerdict::Divergent).fold(f64::NAN, f64::min);
    // grid spacing is 0.05, so the gap is a multiple of it up to rounding
    let band = first_divergent - last_finite;
    let ordered = last_finite < 0.75 && 0.75 < first_divergent;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{:.2}:{}({:+.2})", r.alpha, r.verdict.name(), r.log2_ratio))
        .collect();
    Ok((
        finite_ok && divergent_ok && ordered && band <= 0.2 + 1e-9,
        format!(
            "inconclusive band ({last_finite:.2}, {first_divergent:.2}) width {band:.2} (limit 0.2); crossover {}; {} ({} paths)",
            report.crossover.map_or("none".to_string(), |c| format!("{c:.3}")),
            rows.join(" "),
            n_paths
        ),
    ))
}

fn moment_boundedness(scale: Scale) -> Outcome {
    let n_paths = if scale == Scale::Full { 400 } else { 100 };
    let alpha = 0.25;
    let times = [0.25, 0.5, 0.75, 1.0];
    let levels = [(256usize, 7i32, 4usize), (512, 8, 2), (1024, 9, 1)];
    let mut per_level: Vec<Vec<MomentEstimate>> = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for &(n, e, sub) in &levels {
        let params = ModelParams::new(1.0, 1, 1.0)?;
        let grid = GridSpec::new(1, 8.0, n)?;
        let mut cfg = SolverConfig::new(params, riesz_measure(0.5, 1, None)?, grid);
        cfg.dt = 2f64.powi(-e);
        cfg.noise_substeps = sub;
        cfg.sigma = CoefficientFn::SineBounded { lambda: 1.0 };
        cfg.b = CoefficientFn::Linear { lambda: 0.5 };
        cfg.v0 = gaussian_bump(&grid).0;
        per_level.push(mc_moments(&cfg, &times, alpha, 2.0, n_paths)?);
        // per-path values at T for the paired trend estimate
        cfg.snapshot_times = vec![1.0];
        let sim = Simulator::new(&cfg)?;
        let w = sobolev_weights(&grid, alpha);
        samples.push(sim.map_paths(n_paths as u64, |_, s| {
            s.last().expect("final").iter().zip(&w).map(|(c, w)| w * c.norm_sqr()).sum::<f64>()
        })?);
    }
    // per-path least-squares slope against the level index 0, 1, 2
    let slopes: Vec<f64> = (0..n_paths).map(|p| 0.5 * (samples[2][p] - samples[0][p])).collect();
    let trend = MomentEstimate::from_samples(1.0, alpha, 2.0, &slopes);
    let pass = trend.mean.abs() <= 2.0 * trend.std_error;
    let table: Vec<String> = per_level
        .iter()
        .zip(&levels)
        .map(|(m, (n, e, _))| {
            let vals: Vec<String> = m.iter().map(|x| format!("{:.4}", x.mean)).collect();
            format!("N={n},dt=2^-{e}: [{}]", vals.join(" "))
        })
        .collect();
    Ok((
        pass,
        format!(
            "refinement slope at T {:.2e} ± {:.2e} (must be within 2 SE of 0); E|u(t)|^2_H^0.25 at t={times:?}: {} ({} paths)",
            trend.mean,
            trend.std_error,
            table.join("; "),
            n_paths
        ),
    ))
}

fn picard() -> Outcome {
    let params = ModelParams::new(1.0, 1, 0.5)?;
    let grid = GridSpec::new(1, 8.0, 128)?;
    let mut cfg = SolverConfig::new(params, riesz_measure(0.5, 1, None)?, grid);
    cfg.dt = 2f64.powi(-7);
    cfg.sigma = CoefficientFn::Linear { lambda: 0.5 };
    cfg.v0 = gaussian_bump(&grid).0;
    cfg.store_states = true;
    cfg.seed = 9;
    let (n_steps, _) = cfg.steps();
    let d = picard_mean_square(&cfg, 6, 100)?;
    let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
    let result = picard_iterate(&cfg, n_steps + 2)?;
    let contracting = ratios.iter().all(|&r| r < 0.9) && ratios.windows(2).all(|w| w[1] < w[0]);
    let traj = solve_path(&cfg)?;
    let mut engine = FftEngine::new(grid);
    let (u, _) = engine.inverse(&traj.states.last().expect("final").position)?;
    let fixed = result.iterates.last().expect("iterate").last().expect("final step");
    let dist = (grid.cell_volume() * u.iter().zip(fixed).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt();
    let ratio_text: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok((
        contracting && dist <= 1e-8,
        format!(
            "mean-square ratios [{}] (< 0.9, decreasing; 100 frozen paths); fixed point vs scheme L2 distance {dist:.2e} (limit 1e-8)",
            ratio_text.join(", ")
        ),
    ))
}

fn noise_validation() -> Outcome {
    let grid = GridSpec::new(1, 8.0, 256)?;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut engine = FftEngine::new(grid);
    for (label, mu) in [("riesz", riesz_measure(0.5, 1, None)?), ("flat", SpectralMeasure::flat(1, 1.0)?)] {
        let spec = NoiseSpec::new(mu, grid)?;
        let report = validate_covariance(&spec, 10_000, &mut stream(10, 0, 0, Domain::Validation))?;
        let mut worst_imag: f64 = 0.0;
        for s in 0..100 {
            let inc = spec.sample_increment(2f64.powi(-10), &mut stream(10, s, 1, Domain::Validation), &mut engine)?;
            worst_imag = worst_imag.max(inc.imag_residue);
        }
        let pass = report.passed && worst_imag < 1e-12;
        ok &= pass;
        parts.push(format!(
            "[{label}: {} modes, max deviation {:.4}, band ({:.4}, {:.4}), imaginary residue {:.1e}]",
            report.modes_checked, report.max_deviation, report.band.0, report.band.1, worst_imag
        ));
    }
    // the 2-D Riesz construction as well
    let g2 = GridSpec::new(2, 8.0, 32)?;
    let spec = NoiseSpec::new(riesz_measure(1.0, 2, None)?, g2)?;
    let report = validate_covariance(&spec, 10_000, &mut stream(10, 1, 0, Domain::Validation))?;
    ok &= report.passed;
    parts.push(format!("[riesz d=2: max deviation {:.4}]", report.max_deviation));
    let _ = SpectralField::zeros(grid);
    Ok((ok, parts.join(" ")))
}
