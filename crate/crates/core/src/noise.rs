//! Lattice increments of the spatially homogeneous, white-in-time noise.
//!
//! Mode `j` carries an amplitude `a_j` with `a_j²` the `μ`-mass of the
//! `Δξ`-cell centred at `ξ_j`. A normalised coefficient has
//! `E|c_j|² = a_j² dt`; the lattice transform of the increment field is
//! `(2π)^{d/2} (2L)^d c_j`, which makes the simulated second moments equal
//! the quadrature functionals under the lattice Parseval convention.
//!
//! Gaussians are drawn in shell order (increasing `max_i |j_i|`, Nyquist
//! modes last), so a grid and its refinement share the draws of their common
//! modes when fed the same stream.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::lattice::{FftEngine, GridSpec};
use crate::model::SpectralMeasure;
use crate::quadrature::radial::integrate_from_origin;
use crate::quadrature::rules::{integrate, Tolerance};
use crate::special::gauss_legendre;

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub measure: SpectralMeasure,
    pub grid: GridSpec,
    /// `a_j`, in FFT order.
    pub amplitudes: Vec<f64>,
    /// Half-spectrum representatives in draw order, each with its conjugate
    /// (equal to itself for self-conjugate modes).
    order: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct NoiseIncrement {
    pub field: Vec<f64>,
    pub dt: f64,
    /// Largest imaginary part discarded by the inverse transform.
    pub imag_residue: f64,
}

const TIGHT: Tolerance = Tolerance {
    rel: 1e-13,
    abs: 0.0,
    max_subdivisions: 10_000,
};

/// `∫_0^R ρ(r) r^{d−1} dr`.
fn radial_cumulative(measure: &SpectralMeasure, r: f64) -> Result<f64> {
    match measure {
        SpectralMeasure::Riesz { beta, constant, .. } => Ok(constant * r.powf(*beta) / beta),
        SpectralMeasure::Flat { d, level } => Ok(level * r.powi(*d as i32) / *d as f64),
        SpectralMeasure::RadialDensity { d, density } => {
            let dm1 = (*d - 1) as i32;
            let f = |x: f64| density.eval(x) * x.powi(dm1);
            integrate_from_origin(&f, r, measure.radial_origin_power(), TIGHT)
        }
        SpectralMeasure::FiniteAtoms { .. } => unreachable!("atoms have no density"),
    }
}

/// `μ` mass of the cube `[−h, h]^d`, integrating radially out to the cube
/// boundary: `2d·h ∫_{[−h,h]^{d−1}} M(|p|) |p|^{−d} dp'` with `p = (p', h)`.
fn origin_cell_mass(measure: &SpectralMeasure, h: f64) -> Result<f64> {
    let d = measure.dim();
    if d == 1 {
        return Ok(2.0 * radial_cumulative(measure, h)?);
    }
    let (x, w) = gauss_legendre(24);
    let mut total = 0.0;
    let mut face = |p: &[f64], weight: f64| -> Result<()> {
        let r2: f64 = p.iter().map(|v| v * v).sum::<f64>() + h * h;
        let r = r2.sqrt();
        total += weight * radial_cumulative(measure, r)? / r.powi(d as i32);
        Ok(())
    };
    // the face integrand is even in each coordinate: integrate over [0, h]^{d−1}
    let nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&x, &w)| (0.5 * h * (x + 1.0), 0.5 * h * w)).collect();
    if d == 2 {
        for &(u, wu) in &nodes {
            face(&[u], wu)?;
        }
    } else {
        for &(u, wu) in &nodes {
            for &(v, wv) in &nodes {
                face(&[u, v], wu * wv)?;
            }
        }
    }
    Ok(2.0 * d as f64 * h * total * 2f64.powi(d as i32 - 1))
}

/// Tensor Gauss–Legendre integral of the density over a box.
fn box_mass(measure: &SpectralMeasure, lo: &[f64], width: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let d = lo.len();
    let (x, w) = nodes;
    let n = x.len();
    let mut total = 0.0;
    let mut idx = [0usize; 3];
    loop {
        let mut r2 = 0.0;
        let mut weight = 1.0;
        for a in 0..d {
            let c = lo[a] + 0.5 * width * (x[idx[a]] + 1.0);
            r2 += c * c;
            weight *= 0.5 * width * w[idx[a]];
        }
        total += weight * measure.density(r2.sqrt()).unwrap_or(0.0);
        let mut a = 0;
        loop {
            if a == d {
                return total;
            }
            idx[a] += 1;
            if idx[a] < n {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

fn density_cell_mass(measure: &SpectralMeasure, grid: &GridSpec, j: [i64; 3], coarse: &(Vec<f64>, Vec<f64>)) -> Result<f64> {
    let d = grid.d;
    let dxi = grid.dxi();
    let h = 0.5 * dxi;
    if j[..d].iter().all(|&v| v == 0) {
        return origin_cell_mass(measure, h);
    }
    if d == 1 {
        let lo = (j[0].abs() as f64 - 0.5) * dxi;
        let hi = lo + dxi;
        if let SpectralMeasure::Riesz { beta, constant, .. } = measure {
            return Ok(constant * (hi.powf(*beta) - lo.powf(*beta)) / beta);
        }
        let f = |r: f64| measure.density(r).unwrap_or(0.0);
        return Ok(integrate(&f, lo, hi, TIGHT)?.value);
    }
    let lo: Vec<f64> = (0..d).map(|a| j[a] as f64 * dxi - h).collect();
    let near = j[..d].iter().all(|&v| v.abs() <= 2);
    if !near {
        return Ok(box_mass(measure, &lo, dxi, coarse));
    }
    // refine next to the singularity
    let sub = 4usize;
    let width = dxi / sub as f64;
    let mut total = 0.0;
    for s in 0..sub.pow(d as u32) {
        let mut corner = lo.clone();
        let mut rem = s;
        for c in corner.iter_mut() {
            *c += (rem % sub) as f64 * width;
            rem /= sub;
        }
        total += box_mass(measure, &corner, width, coarse);
    }
    Ok(total)
}

/// `a_j²`, the `μ`-mass of each lattice cell, returned as `a_j`.
pub fn mode_amplitudes(measure: &SpectralMeasure, grid: &GridSpec) -> Result<Vec<f64>> {
    if measure.dim() != grid.d {
        return Err(Error::domain(
            "noise",
            format!("measure lives on R^{} but the grid has d = {}", measure.dim(), grid.d),
        ));
    }
    let len = grid.len();
    let mut mass = vec![0.0; len];
    match measure {
        SpectralMeasure::Flat { level, .. } => {
            mass.iter_mut().for_each(|m| *m = level * grid.cell_volume_spectral());
        }
        SpectralMeasure::FiniteAtoms { atoms, .. } => {
            let dxi = grid.dxi();
            let half = (grid.n / 2) as i64;
            for atom in atoms {
                let mut ax = [0usize; 3];
                for (a, &x) in atom.location.iter().enumerate() {
                    let j = (x / dxi).round() as i64;
                    if j.abs() > half {
                        return Err(Error::domain(
                            "noise",
                            format!("atom at {:?} lies outside the lattice band |ξ_i| <= {}", atom.location, half as f64 * dxi),
                        ));
                    }
                    ax[a] = j.rem_euclid(grid.n as i64) as usize;
                }
                mass[grid.flat(ax)] += atom.mass;
            }
            // a real noise sees the symmetrised measure
            let sym: Vec<f64> = (0..len).map(|i| 0.5 * (mass[i] + mass[grid.conjugate_index(i)])).collect();
            mass = sym;
        }
        _ => {
            let coarse = gauss_legendre(8);
            for i in 0..len {
                let c = grid.conjugate_index(i);
                if c < i {
                    mass[i] = mass[c];
                    continue;
                }
                mass[i] = density_cell_mass(measure, grid, grid.mode_integers(i), &coarse)?;
            }
        }
    }
    for (i, m) in mass.iter().enumerate() {
        if !(m.is_finite() && *m >= 0.0) {
            return Err(Error::domain("noise", format!("cell mass of mode {i} is {m}")));
        }
    }
    Ok(mass.into_iter().map(f64::sqrt).collect())
}

fn draw_order(grid: &GridSpec) -> Vec<(usize, usize)> {
    let mut reps: Vec<(bool, i64, [i64; 3], usize, usize)> = Vec::with_capacity(grid.len() / 2 + 1);
    for i in 0..grid.len() {
        let c = grid.conjugate_index(i);
        let (j, jc) = (grid.mode_integers(i), grid.mode_integers(c));
        if c != i && j < jc {
            continue;
        }
        let shell = j[..grid.d].iter().map(|v| v.abs()).max().unwrap_or(0);
        reps.push((grid.is_nyquist(i), shell, j, i, c));
    }
    reps.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    reps.into_iter().map(|r| (r.3, r.4)).collect()
}

impl NoiseSpec {
    pub fn new(measure: SpectralMeasure, grid: GridSpec) -> Result<Self> {
        let amplitudes = mode_amplitudes(&measure, &grid)?;
        let order = draw_order(&grid);
        Ok(NoiseSpec {
            measure,
            grid,
            amplitudes,
            order,
        })
    }

    /// Factor between normalised coefficients and the lattice transform of
    /// the increment field: `(2π)^{d/2} (2L)^d`.
    pub fn lattice_scale(&self) -> f64 {
        (2.0 * PI).powf(0.5 * self.grid.d as f64) * self.grid.volume()
    }

    /// Fills `out` with `N^d` standard normals in draw order.
    pub fn draw_normals<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.grid.len());
        for z in out.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
    }

    /// Normalised coefficients (`E|c_j|² = a_j² dt`) from standard normals
    /// in draw order, imposing Hermitian symmetry.
    pub fn coefficients_from_normals(&self, normals: &[f64], dt: f64, out: &mut [Complex64]) {
        assert_eq!(out.len(), self.grid.len());
        let sdt = dt.sqrt();
        let mut k = 0;
        for &(i, c) in &self.order {
            let a = self.amplitudes[i] * sdt;
            if i == c {
                out[i] = Complex64::new(a * normals[k], 0.0);
                k += 1;
            } else {
                let z = Complex64::new(normals[k], normals[k + 1]) * (a * std::f64::consts::FRAC_1_SQRT_2);
                out[i] = z;
                out[c] = z.conj();
                k += 2;
            }
        }
    }

    pub fn sample_coefficients<R: Rng>(&self, dt: f64, rng: &mut R) -> Vec<Complex64> {
        let mut z = vec![0.0; self.grid.len()];
        self.draw_normals(rng, &mut z);
        let mut c = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.coefficients_from_normals(&z, dt, &mut c);
        c
    }

    pub fn sample_increment<R: Rng>(&self, dt: f64, rng: &mut R, engine: &mut FftEngine) -> Result<NoiseIncrement> {
        if !(dt > 0.0) {
            return Err(Error::domain("noise", format!("dt must be positive, got {dt}")));
        }
        let mut c = self.sample_coefficients(dt, rng);
        let scale = self.lattice_scale();
        c.iter_mut().for_each(|v| *v *= scale);
        engine.inverse_in_place(&mut c);
        let imag_residue = c.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        Ok(NoiseIncrement {
            field: c.iter().map(|v| v.re).collect(),
            dt,
            imag_residue,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub n_samples: usize,
    pub modes_checked: usize,
    /// Largest `|empirical/target − 1|`.
    pub max_deviation: f64,
    /// Acceptance band for the variance ratio of a paired (complex) mode.
    pub band: (f64, f64),
    pub passed: bool,
}

/// Per-mode empirical/target variance ratios over `n_samples` draws, judged
/// against a Bonferroni-corrected two-sided 99% χ² band.
pub fn validate_covariance<R: Rng>(spec: &NoiseSpec, n_samples: usize, rng: &mut R) -> Result<CovarianceReport> {
    if n_samples < 100 {
        return Err(Error::domain("noise", format!("need at least 100 samples, got {n_samples}")));
    }
    let checked: Vec<(usize, usize)> = spec
        .order
        .iter()
        .copied()
        .filter(|&(i, _)| spec.amplitudes[i] > 1e-10)
        .collect();
    let m = checked.len();
    if m == 0 {
        return Ok(CovarianceReport {
            n_samples,
            modes_checked: 0,
            max_deviation: 0.0,
            band: (1.0, 1.0),
            passed: true,
        });
    }
    let p = 0.01 / m as f64;
    let band_for = |dof: f64| -> Result<(f64, f64)> {
        let chi = ChiSquared::new(dof).map_err(|e| Error::domain("noise", e.to_string()))?;
        Ok((chi.inverse_cdf(0.5 * p) / dof, chi.inverse_cdf(1.0 - 0.5 * p) / dof))
    };
    let n = n_samples as f64;
    let paired = band_for(2.0 * n)?;
    let single = band_for(n)?;

    let dt = 1.0;
    let mut sums = vec![0.0; spec.grid.len()];
    let mut z = vec![0.0; spec.grid.len()];
    let mut c = vec![Complex64::new(0.0, 0.0); spec.grid.len()];
    for _ in 0..n_samples {
        spec.draw_normals(rng, &mut z);
        spec.coefficients_from_normals(&z, dt, &mut c);
        for &(i, _) in &checked {
            sums[i] += c[i].norm_sqr();
        }
    }
    let mut max_deviation: f64 = 0.0;
    let mut passed = true;
    for &(i, conj) in &checked {
        let target = spec.amplitudes[i].powi(2) * dt;
        let ratio = sums[i] / n / target;
        max_deviation = max_deviation.max((ratio - 1.0).abs());
        let (lo, hi) = if i == conj { single } else { paired };
        passed &= ratio >= lo && ratio <= hi;
    }
    Ok(CovarianceReport {
        n_samples,
        modes_checked: m,
        max_deviation,
        band: paired,
        passed,
    })
}
