//! Radial reductions of the spectral functionals and the staged integrator
//! for oscillatory radial integrands.

use std::f64::consts::PI;

use super::kernels::TimeKernel;
use super::rules::{integrate, integrate_panels, integrate_to_infinity, Chebyshev, Tolerance};
use super::QuadratureSettings;
use crate::error::Result;
use crate::model::SpectralMeasure;
use crate::special::{gaussian_sphere_average, sphere_area};

/// Upper limit of the oscillation panels resolved in one functional.
const MAX_PANELS: f64 = 4.0e6;

pub(crate) fn tolerance(settings: &QuadratureSettings, rel_scale: f64) -> Tolerance {
    Tolerance {
        rel: settings.rel_tol * rel_scale,
        abs: settings.abs_tol,
        max_subdivisions: settings.max_subdivisions,
    }
}

/// Substitution exponent `m` flattening an `r^s` endpoint behaviour under `r = a u^m`.
fn flattening_exponent(s: f64) -> f64 {
    if s < 0.0 {
        1.0 / (s + 1.0)
    } else {
        1.0
    }
}

/// `∫_0^a f`, where `f(r) ~ r^s` at the origin.
pub(crate) fn integrate_from_origin<F: Fn(f64) -> f64>(f: &F, a: f64, s: f64, tol: Tolerance) -> Result<f64> {
    let m = flattening_exponent(s);
    if m == 1.0 {
        return Ok(integrate(f, 0.0, a, tol)?.value);
    }
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = a * u.powf(m);
        f(r) * m * r / u
    };
    Ok(integrate(&g, 0.0, 1.0, tol)?.value)
}

/// A non-negative radial weight `w(r)` multiplying a time kernel.
pub(crate) struct RadialWeight<'a> {
    pub f: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
    /// Exponent `s` with `w(r) ~ r^s` at the origin.
    pub origin_power: f64,
    /// Points where `w` is singular or changes scale.
    pub breakpoints: Vec<f64>,
    /// An interior point `c` with `w(r) ~ |r − c|^s` nearby, as `(c, s)`.
    pub interior: Option<(f64, f64)>,
}

impl RadialWeight<'_> {
    #[inline]
    fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    /// [`integrate_panels`] with graded substitutions on the two panels
    /// meeting at the interior singularity, if it lies inside.
    fn integrate_panels<F: Fn(f64) -> f64>(&self, f: &F, bps: &[f64], tol: Tolerance) -> Result<f64> {
        let (lo, hi) = (bps[0], bps[bps.len() - 1]);
        let Some((c, s)) = self.interior.filter(|&(c, _)| lo <= c && c <= hi) else {
            return Ok(integrate_panels(f, bps, tol)?.value);
        };
        let mut pts = bps.to_vec();
        let i = match pts.binary_search_by(|x| x.total_cmp(&c)) {
            Ok(i) => i,
            Err(i) => {
                pts.insert(i, c);
                i
            }
        };
        let mut total = 0.0;
        if i >= 1 {
            if i >= 2 {
                total += integrate_panels(f, &pts[..i], tol)?.value;
            }
            total += integrate_from_origin(&|x: f64| f(c - x), c - pts[i - 1], s, tol)?;
        }
        if i + 1 < pts.len() {
            total += integrate_from_origin(&|x: f64| f(c + x), pts[i + 1] - c, s, tol)?;
            if i + 2 < pts.len() {
                total += integrate_panels(f, &pts[i + 1..], tol)?.value;
            }
        }
        Ok(total)
    }
}

fn frequency_to_radius(w: f64, k: f64) -> f64 {
    w.powf(1.0 / k)
}

/// Radii where `sin(f r^k / 2)` vanishes between `w_lo` and `w_hi`, i.e.
/// half-periods of an oscillation of frequency `f` in `w = r^k`.
fn oscillation_zeros(f: f64, k: f64, w_lo: f64, w_hi: f64) -> Vec<f64> {
    let step = PI / f;
    let n0 = (w_lo / step).ceil() as u64;
    let n1 = (w_hi / step).floor() as u64;
    (n0..=n1)
        .map(|n| frequency_to_radius(n as f64 * step, k))
        .collect()
}

fn merged_breakpoints(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.retain(|&x| x > lo && x < hi);
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `∫_0^∞ w(r) τ(r^k) dr` for a weight whose tail decays fast enough that
/// `w(r) r^{-2k}` is integrable.
///
/// Stage 1 resolves every oscillation up to a cut frequency, stage 2 keeps
/// only terms oscillating at the lag frequency, stage 3 integrates the mean
/// `m/w²`. Each cut is pushed out until the dropped oscillatory terms are
/// below a tenth of the relative tolerance.
pub(crate) fn oscillatory_functional(
    weight: &RadialWeight<'_>,
    k: f64,
    kernel: TimeKernel,
    settings: &QuadratureSettings,
) -> Result<f64> {
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let tol = tolerance(settings, 0.1);
    let ff = kernel.fast_frequency();
    let fs = kernel.slow_frequency();
    let mean = kernel.mean_coefficient();
    let full = |r: f64| weight.eval(r) * kernel.eval(r.powf(k));
    let slow = |r: f64| weight.eval(r) * kernel.slow_part(r.powf(k));
    let mean_tail = |r0: f64| -> Result<f64> {
        if mean == 0.0 {
            return Ok(0.0);
        }
        let g = |v: f64| {
            let r = r0 * v.exp();
            mean * weight.eval(r) * r.powf(1.0 - 2.0 * k)
        };
        Ok(integrate_to_infinity(&g, 0.0, tol)?.value)
    };

    let mut w_cut = (1e3 / ff).max(64.0);
    if fs > 0.0 {
        w_cut = w_cut.max(128.0 / fs);
    }
    let r_cut = frequency_to_radius(w_cut, k);

    // Stage 1 up to r_cut.
    let mut bps = oscillation_zeros(ff, k, 0.0, w_cut);
    let mut j = -8;
    while 2f64.powi(j) < r_cut {
        bps.push(2f64.powi(j));
        j += 1;
    }
    bps.extend(weight.breakpoints.iter().copied());
    let bps = merged_breakpoints(bps, 0.0, r_cut);
    let first = bps[1];
    let mut stage1 = integrate_from_origin(&full, first, weight.origin_power, tol)?;
    stage1 += weight.integrate_panels(&full, &bps[1..], tol)?;

    let mut r_lo = r_cut;
    let mut w_lo = w_cut;
    let dropped = |r: f64, w: f64, env: f64, freq: f64| -> f64 {
        let amp = weight.eval(r) * (env / (w * w) + 1.0 / (w * w * w));
        amp / (freq * k * r.powf(k - 1.0))
    };
    loop {
        let estimate = stage1.abs() + mean_tail(r_lo)?.abs();
        let err = dropped(r_lo, w_lo, kernel.fast_envelope(), ff);
        if err <= 0.1 * settings.rel_tol * estimate || ff * w_lo / PI > MAX_PANELS {
            break;
        }
        let w_hi = 2.0 * w_lo;
        let r_hi = frequency_to_radius(w_hi, k);
        let zs = merged_breakpoints(oscillation_zeros(ff, k, w_lo, w_hi), r_lo, r_hi);
        let extra_tol = Tolerance {
            abs: (0.01 * settings.rel_tol * estimate).max(settings.abs_tol),
            ..tol
        };
        stage1 += weight.integrate_panels(&full, &zs, extra_tol)?;
        r_lo = r_hi;
        w_lo = w_hi;
    }

    // Stage 2: lag-frequency terms.
    let mut stage2 = 0.0;
    if fs > 0.0 {
        let mut w_far = (8192.0 / fs).max(2.0 * w_lo);
        let mut r_far = frequency_to_radius(w_far, k);
        let zs = merged_breakpoints(oscillation_zeros(fs, k, w_lo, w_far), r_lo, r_far);
        stage2 += weight.integrate_panels(&slow, &zs, tol)?;
        loop {
            let estimate = stage1.abs() + stage2.abs() + mean_tail(r_far)?.abs();
            let err = dropped(r_far, w_far, kernel.slow_envelope(), fs);
            if err <= 0.1 * settings.rel_tol * estimate || fs * w_far / PI > MAX_PANELS {
                break;
            }
            let w_hi = 2.0 * w_far;
            let r_hi = frequency_to_radius(w_hi, k);
            let zs = merged_breakpoints(oscillation_zeros(fs, k, w_far, w_hi), r_far, r_hi);
            let extra_tol = Tolerance {
                abs: (0.01 * settings.rel_tol * estimate).max(settings.abs_tol),
                ..tol
            };
            stage2 += weight.integrate_panels(&slow, &zs, extra_tol)?;
            w_far = w_hi;
            r_far = r_hi;
        }
        r_lo = r_far;
    }

    Ok(stage1 + stage2 + mean_tail(r_lo)?)
}

/// `∫_0^∞ w(r) H(r) dr` for a smooth non-oscillating `H`.
pub(crate) fn plain_functional<H: Fn(f64) -> f64>(
    weight: &RadialWeight<'_>,
    h: &H,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let tol = tolerance(settings, 0.1);
    let f = |r: f64| weight.eval(r) * h(r);
    let mut bps: Vec<f64> = (-6..=8).map(|j| 2f64.powi(j)).collect();
    bps.extend(weight.breakpoints.iter().copied());
    let bps = merged_breakpoints(bps, 0.0, 256.0);
    let mut total = integrate_from_origin(&f, bps[1], weight.origin_power, tol)?;
    total += weight.integrate_panels(&f, &bps[1..], tol)?;
    let g = |v: f64| {
        let r = 256.0 * v.exp();
        f(r) * r
    };
    total += integrate_to_infinity(&g, 0.0, tol)?.value;
    Ok(total)
}

/// `(2π)^d π^{d/2}`: the Gaussian mass of `|ℱZ|² = (2π)^d e^{−|ξ|²}`.
pub(crate) fn bump_mass(d: usize) -> f64 {
    (2.0 * PI).powi(d as i32) * PI.powf(0.5 * d as f64)
}

/// Spherical average, over directions of `ξ` with `|ξ| = r`, of
/// `∫ μ(dη) |ℱZ(ξ+η)|²` for the Gaussian bump, times the sphere area.
pub(crate) enum BumpConvolution {
    Constant(f64),
    Atoms { d: usize, atoms: Vec<(f64, f64)> },
    Table {
        d: usize,
        measure: SpectralMeasure,
        panels: Vec<Chebyshev>,
        r_max: f64,
    },
}

const TABLE_RATIO: f64 = 1.5;
const TABLE_NODES: usize = 16;
const TABLE_RMAX: f64 = 1e6;

impl BumpConvolution {
    pub(crate) fn new(mu: &SpectralMeasure, settings: &QuadratureSettings) -> Result<Self> {
        let d = mu.dim();
        match mu {
            SpectralMeasure::Flat { level, .. } => Ok(BumpConvolution::Constant(sphere_area(d) * level * bump_mass(d))),
            SpectralMeasure::FiniteAtoms { atoms, .. } => Ok(BumpConvolution::Atoms {
                d,
                atoms: atoms
                    .iter()
                    .map(|a| (a.location.iter().map(|x| x * x).sum::<f64>().sqrt(), a.mass))
                    .collect(),
            }),
            SpectralMeasure::Riesz { .. } | SpectralMeasure::RadialDensity { .. } => {
                let mut edges = vec![0.0, 0.5, 1.0];
                while *edges.last().unwrap() < TABLE_RMAX {
                    let next = edges.last().unwrap() * TABLE_RATIO;
                    edges.push(next);
                }
                let r_max = *edges.last().unwrap();
                let mut panels = Vec::with_capacity(edges.len() - 1);
                for w in edges.windows(2) {
                    let nodes = Chebyshev::nodes(w[0], w[1], TABLE_NODES);
                    let vals = nodes
                        .iter()
                        .map(|&r| convolve_bump_radial(mu, r, settings))
                        .collect::<Result<Vec<f64>>>()?;
                    panels.push(Chebyshev::from_values(w[0], w[1], &vals));
                }
                Ok(BumpConvolution::Table {
                    d,
                    measure: mu.clone(),
                    panels,
                    r_max,
                })
            }
        }
    }

    pub(crate) fn eval(&self, r: f64) -> f64 {
        match self {
            BumpConvolution::Constant(c) => *c,
            BumpConvolution::Atoms { d, atoms } => {
                let scale = (2.0 * PI).powi(*d as i32);
                atoms
                    .iter()
                    .map(|&(p, m)| m * scale * gaussian_sphere_average(*d, r, p))
                    .sum()
            }
            BumpConvolution::Table {
                d,
                measure,
                panels,
                r_max,
            } => {
                if r >= *r_max {
                    let rho = measure.density(r).unwrap_or(0.0);
                    return sphere_area(*d) * rho * bump_mass(*d);
                }
                let idx = if r < 0.5 {
                    0
                } else if r < 1.0 {
                    1
                } else {
                    2 + ((r.ln() / TABLE_RATIO.ln()) as usize).min(panels.len() - 3)
                };
                panels[idx].eval(r)
            }
        }
    }
}

/// `S_d (2π)^d ∫_0^∞ ρ(p) p^{d−1} e^{−(r−p)²} Â_d(2rp) dp` by direct quadrature.
pub(crate) fn convolve_bump_radial(mu: &SpectralMeasure, r: f64, settings: &QuadratureSettings) -> Result<f64> {
    let d = mu.dim();
    let df = d as f64;
    let scale = sphere_area(d) * (2.0 * PI).powi(d as i32);
    let f = |p: f64| {
        let rho = mu.density(p).unwrap_or(0.0);
        rho * p.powf(df - 1.0) * gaussian_sphere_average(d, r, p)
    };
    let tol = Tolerance {
        rel: 1e-12,
        abs: 0.0,
        max_subdivisions: settings.max_subdivisions,
    };
    let lo = (r - 9.0).max(0.0);
    let hi = r + 9.0;
    let mut total = 0.0;
    let mut start = lo;
    if lo < 1.0 {
        total += integrate_from_origin(&f, 1.0, mu.radial_origin_power(), tol)?;
        start = 1.0;
    }
    let bps = merged_breakpoints(vec![r - 3.0, r, r + 3.0], start, hi);
    total += integrate_panels(&f, &bps, tol)?.value;
    Ok(scale * total)
}

/// The spherical integral `∫_{S^{d−1}} ρ(|ξ + q θ|) dθ` for `|ξ| = r`.
pub(crate) fn shifted_sphere_density(
    mu: &SpectralMeasure,
    r: f64,
    q: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let d = mu.dim();
    if r == 0.0 {
        return Ok(sphere_area(d) * mu.density(q).unwrap_or(0.0));
    }
    let rho = |p: f64| mu.density(p).unwrap_or(0.0);
    let tol = Tolerance {
        rel: 1e-11,
        abs: 0.0,
        max_subdivisions: settings.max_subdivisions,
    };
    match d {
        1 => Ok(rho(r + q) + rho((r - q).abs())),
        2 => {
            // |ξ + qθ| = sqrt((r − q)² + 4rq cos²(φ/2)); its minimum at φ = π has width ~ |r − q|/sqrt(rq)
            let g = |phi: f64| rho(((r - q).powi(2) + 4.0 * r * q * (0.5 * phi).cos().powi(2)).sqrt());
            let width = ((r - q).abs() / (r * q).sqrt()).max(1e-12);
            let mut bps = vec![0.0, 0.5 * PI];
            let mut w = 0.25 * width;
            while w < 0.5 * PI {
                bps.push(PI - w);
                w *= 2.0;
            }
            bps.push(PI);
            bps.sort_by(f64::total_cmp);
            Ok(2.0 * integrate_panels(&g, &bps, tol)?.value)
        }
        _ => {
            let lo = (r - q).abs();
            let hi = r + q;
            let inner = if let SpectralMeasure::Riesz { beta, constant, .. } = mu {
                // hi − lo = 2 min(r, q); the ratio form avoids cancellation when q ≫ r or r ≫ q
                let log_ratio = (2.0 * r.min(q) / lo).ln_1p();
                if (*beta - 1.0).abs() < 1e-12 {
                    constant * log_ratio
                } else if lo == 0.0 {
                    constant * hi.powf(beta - 1.0) / (beta - 1.0)
                } else {
                    constant * lo.powf(beta - 1.0) * ((beta - 1.0) * log_ratio).exp_m1() / (beta - 1.0)
                }
            } else {
                let g = |p: f64| rho(p) * p;
                integrate(&g, lo, hi, tol)?.value
            };
            Ok(2.0 * PI * inner / (r * q))
        }
    }
}

/// Route B weight `r^{d−1}(1+r²)^α K̄(r)`.
pub(crate) fn bump_weight<'a>(conv: &'a BumpConvolution, d: usize, alpha: f64) -> RadialWeight<'a> {
    let df = d as f64;
    RadialWeight {
        f: Box::new(move |r: f64| r.powf(df - 1.0) * (1.0 + r * r).powf(alpha) * conv.eval(r)),
        origin_power: df - 1.0,
        breakpoints: vec![0.5, 1.0, 2.0, 4.0],
        interior: None,
    }
}

/// Route A weight `q^{d−1}(1+q²)^α ∫_S ρ(|ξ + qθ|) dθ` for radially
/// absolutely continuous measures.
pub(crate) fn shifted_weight<'a>(
    mu: &'a SpectralMeasure,
    r: f64,
    alpha: f64,
    settings: &'a QuadratureSettings,
) -> RadialWeight<'a> {
    let d = mu.dim();
    let df = d as f64;
    let origin_power = if r == 0.0 {
        mu.radial_origin_power()
    } else {
        df - 1.0
    };
    let mut breakpoints = vec![0.5, 1.0];
    if r > 0.0 {
        breakpoints.extend([r, 0.5 * r, 2.0 * r, r + 1.0, (r - 1.0).max(0.0)]);
    }
    RadialWeight {
        f: Box::new(move |q: f64| {
            let w = shifted_sphere_density(mu, r, q, settings).unwrap_or(f64::NAN);
            let v = q.powf(df - 1.0) * (1.0 + q * q).powf(alpha) * w;
            // q rounding onto the integrable singularity at q = r
            if !v.is_finite() && q == r {
                0.0
            } else {
                v
            }
        }),
        origin_power,
        breakpoints,
        interior: (r > 0.0).then(|| (r, mu.radial_origin_power().min(-0.1))),
    }
}
