//! Periodic lattice on `[−L, L)^d`, its Fourier modes, and transforms with
//! the `ℱφ(ξ) = ∫ e^{iξ·x} φ(x) dx` convention.

use std::f64::consts::PI;
use std::io::{self, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::check_dimension;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    /// Half-width `L` of the periodic box.
    pub half_width: f64,
    /// Points per axis.
    pub n: usize,
}

impl GridSpec {
    pub fn new(d: usize, half_width: f64, n: usize) -> Result<Self> {
        check_dimension(d)?;
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::domain("lattice", format!("L must be positive, got {half_width}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::domain("lattice", format!("N must be a power of two >= 8, got {n}")));
        }
        Ok(GridSpec { d, half_width, n })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `Δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    /// `Δξ^d`.
    pub fn cell_volume_spectral(&self) -> f64 {
        self.dxi().powi(self.d as i32)
    }

    /// `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.d as i32)
    }

    /// Signed integer mode index along one axis for FFT position `i`.
    #[inline]
    pub fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Per-axis FFT positions of a flat row-major index (axis 0 slowest).
    #[inline]
    pub fn axes(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = idx;
        for a in (0..self.d).rev() {
            out[a] = rem % self.n;
            rem /= self.n;
        }
        out
    }

    pub fn flat(&self, axes: [usize; 3]) -> usize {
        (0..self.d).fold(0, |acc, a| acc * self.n + axes[a])
    }

    pub fn mode_integers(&self, idx: usize) -> [i64; 3] {
        let ax = self.axes(idx);
        let mut j = [0; 3];
        for a in 0..self.d {
            j[a] = self.signed(ax[a]);
        }
        j
    }

    pub fn mode_vector(&self, idx: usize) -> Vec<f64> {
        let j = self.mode_integers(idx);
        (0..self.d).map(|a| j[a] as f64 * self.dxi()).collect()
    }

    pub fn mode_radius(&self, idx: usize) -> f64 {
        self.mode_vector(idx).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Index of the mode `−j`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let ax = self.axes(idx);
        let mut c = [0; 3];
        for a in 0..self.d {
            c[a] = (self.n - ax[a]) % self.n;
        }
        self.flat(c)
    }

    /// Lattice point coordinates `x_m = −L + m Δx`.
    pub fn position(&self, idx: usize) -> Vec<f64> {
        let ax = self.axes(idx);
        (0..self.d)
            .map(|a| -self.half_width + ax[a] as f64 * self.dx())
            .collect()
    }

    /// True if any axis sits at the unpaired Nyquist index `−N/2`.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let ax = self.axes(idx);
        (0..self.d).any(|a| ax[a] == self.n / 2)
    }
}

/// Transform coefficients of a real lattice field, indexed by mode in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Largest `|c(−j) − conj c(j)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.conjugate_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// State of the wave equation in Fourier space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub position: SpectralField,
    pub velocity: SpectralField,
}

/// `Σ_j w_j |c_j|²` with `w_j = (2π)^{−d} Δξ^d (1+|ξ_j|²)^α`.
pub fn sobolev_weights(grid: &GridSpec, alpha: f64) -> Vec<f64> {
    let scale = (grid.dxi() / (2.0 * PI)).powi(grid.d as i32);
    (0..grid.len())
        .map(|i| {
            let r = grid.mode_radius(i);
            scale * (1.0 + r * r).powf(alpha)
        })
        .collect()
}

/// Lattice `H^α` norm: `sqrt((2π)^{−d} Δξ^d Σ_j (1+|ξ_j|²)^α |c_j|²)`.
pub fn sobolev_norm(field: &SpectralField, alpha: f64) -> f64 {
    sobolev_norm_sq_with(&field.coeffs, &sobolev_weights(&field.grid, alpha)).sqrt()
}

#[inline]
pub fn sobolev_norm_sq_with(coeffs: &[Complex64], weights: &[f64]) -> f64 {
    coeffs.iter().zip(weights).map(|(c, w)| w * c.norm_sqr()).sum()
}

/// Reusable FFT plans and scratch for one grid. Not shareable across
/// threads; each worker builds its own.
pub struct FftEngine {
    grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
    sign: Vec<f64>,
}

impl FftEngine {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let sign = (0..grid.len())
            .map(|i| {
                let s: i64 = grid.mode_integers(i).iter().sum();
                if s.rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        FftEngine {
            grid,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            line: vec![Complex64::new(0.0, 0.0); grid.n],
            sign,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Unnormalised d-dimensional FFT in place; `inverse` selects `e^{+2πi jm/N}`.
    fn fft_nd(&mut self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        // last axis: contiguous rows
        plan.process_with_scratch(data, &mut self.scratch);
        if self.grid.d == 1 {
            return;
        }
        let total = data.len();
        for axis in 0..self.grid.d - 1 {
            let stride = n.pow((self.grid.d - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for i in 0..n {
                        self.line[i] = data[base + i * stride];
                    }
                    plan.process_with_scratch(&mut self.line, &mut self.scratch);
                    for i in 0..n {
                        data[base + i * stride] = self.line[i];
                    }
                }
            }
        }
    }

    /// In-place forward transform of complex lattice values.
    pub fn forward_in_place(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.grid.len(), "lattice size mismatch");
        self.fft_nd(data, true);
        let cell = self.grid.cell_volume();
        for (c, s) in data.iter_mut().zip(&self.sign) {
            *c *= cell * s;
        }
    }

    /// In-place inverse transform; the result holds lattice values.
    pub fn inverse_in_place(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.grid.len(), "lattice size mismatch");
        let norm = 1.0 / self.grid.volume();
        for (c, s) in data.iter_mut().zip(&self.sign) {
            *c *= norm * s;
        }
        self.fft_nd(data, false);
    }

    pub fn forward(&mut self, values: &[f64]) -> Result<SpectralField> {
        if values.len() != self.grid.len() {
            return Err(Error::domain(
                "lattice",
                format!("field has {} samples, grid has {}", values.len(), self.grid.len()),
            ));
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        Ok(SpectralField {
            grid: self.grid,
            coeffs: data,
        })
    }

    /// Inverse transform to real lattice values; also returns the largest
    /// discarded imaginary part.
    pub fn inverse(&mut self, field: &SpectralField) -> Result<(Vec<f64>, f64)> {
        if field.grid != self.grid {
            return Err(Error::domain("lattice", "field grid differs from the engine grid"));
        }
        let mut data = field.coeffs.clone();
        self.inverse_in_place(&mut data);
        let imag = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        Ok((data.iter().map(|c| c.re).collect(), imag))
    }
}

/// `e^{−|x|²/2}` at the lattice points, with a flag that is set when the
/// box is too small (`L < 8`) for periodisation error below `10⁻¹⁴`.
pub fn gaussian_bump(grid: &GridSpec) -> (Vec<f64>, bool) {
    let values = (0..grid.len())
        .map(|i| {
            let r2: f64 = grid.position(i).iter().map(|x| x * x).sum();
            (-0.5 * r2).exp()
        })
        .collect();
    (values, grid.half_width < 8.0)
}

/// Writes `d` (u64), `L` (f64), `N` (u64) little-endian, then the samples.
pub fn write_snapshot<W: Write>(mut w: W, grid: &GridSpec, values: &[f64]) -> io::Result<()> {
    if values.len() != grid.len() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "sample count differs from grid size"));
    }
    w.write_all(&(grid.d as u64).to_le_bytes())?;
    w.write_all(&grid.half_width.to_le_bytes())?;
    w.write_all(&(grid.n as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> io::Result<(GridSpec, Vec<f64>)> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let d = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let half_width = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let grid = GridSpec::new(d, half_width, n).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok((grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_arithmetic() {
        let g = GridSpec::new(1, PI, 8).unwrap();
        assert!((g.dx() - PI / 4.0).abs() < 1e-15);
        let modes: Vec<f64> = (0..8).map(|i| g.mode_vector(i)[0]).collect();
        assert_eq!(modes, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        let g2 = GridSpec::new(2, 10.0, 256).unwrap();
        assert!((g2.dxi() - PI / 10.0).abs() < 1e-15);
        assert!(GridSpec::new(1, 1.0, 7).unwrap_err().is_validation());
        assert!(GridSpec::new(4, 1.0, 8).is_err());
        assert!(GridSpec::new(1, 0.0, 8).is_err());
    }

    #[test]
    fn constant_field_transform() {
        for d in 1..=3 {
            let g = GridSpec::new(d, 1.5, 8).unwrap();
            let mut e = FftEngine::new(g);
            let f = e.forward(&vec![2.0; g.len()]).unwrap();
            assert!((f.coeffs[0].re - g.volume() * 2.0).abs() < 1e-12);
            for c in &f.coeffs[1..] {
                assert!(c.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_transform() {
        let g = GridSpec::new(1, 2.0, 16).unwrap();
        let xi1 = g.dxi();
        let vals: Vec<f64> = (0..16).map(|i| (xi1 * g.position(i)[0]).cos()).collect();
        let f = FftEngine::new(g).forward(&vals).unwrap();
        for (i, c) in f.coeffs.iter().enumerate() {
            let j = g.signed(i);
            let expect = if j.abs() == 1 { g.volume() / 2.0 } else { 0.0 };
            assert!((c.re - expect).abs() < 1e-12 && c.im.abs() < 1e-12, "mode {j}");
        }
    }

    #[test]
    fn single_mode_norm() {
        let g = GridSpec::new(2, 3.0, 8).unwrap();
        let mut f = SpectralField::zeros(g);
        let idx = g.flat([1, 2, 0]);
        f.coeffs[idx] = Complex64::new(3.0, -4.0);
        let r = g.mode_radius(idx);
        let expect = 5.0 * (2.0 * PI).powf(-1.0) * g.dxi() * (1.0 + r * r).powf(0.35);
        assert!((sobolev_norm(&f, 0.7) - expect).abs() < 1e-13 * expect);
        assert_eq!(sobolev_norm(&SpectralField::zeros(g), 1.0), 0.0);
    }

    #[test]
    fn gaussian_bump_transform() {
        for d in [1, 2] {
            let n = if d == 1 { 128 } else { 64 };
            let g = GridSpec::new(d, 8.0, n).unwrap();
            let (v, warn) = gaussian_bump(&g);
            assert!(!warn);
            assert_eq!(v[g.flat([n / 2, n / 2, n / 2])], 1.0);
            let f = FftEngine::new(g).forward(&v).unwrap();
            let xi_lim = n as f64 * PI / (2.0 * g.half_width) * 0.5;
            for (i, c) in f.coeffs.iter().enumerate() {
                let r = g.mode_radius(i);
                if r <= xi_lim {
                    let exact = (2.0 * PI).powf(0.5 * d as f64) * (-0.5 * r * r).exp();
                    // relative 1e-8, floored at round-off of the peak value
                    assert!((c - exact).norm() <= 1e-8 * exact + 1e-13, "d={d} r={r}");
                }
            }
        }
        assert!(gaussian_bump(&GridSpec::new(1, 4.0, 64).unwrap()).1);
    }

    #[test]
    fn bump_norm_converges_under_refinement() {
        let alpha = 2.0;
        let norms: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&n| {
                let g = GridSpec::new(1, 8.0, n).unwrap();
                let f = FftEngine::new(g).forward(&gaussian_bump(&g).0).unwrap();
                sobolev_norm(&f, alpha)
            })
            .collect();
        let d1 = (norms[1] - norms[0]).abs();
        let d2 = (norms[2] - norms[1]).abs();
        let d3 = (norms[3] - norms[2]).abs();
        assert!(d2 * 4.0 <= d1 && (d3 * 4.0 <= d2 || d3 < 1e-13), "{norms:?}");
    }

    #[test]
    fn snapshot_round_trip() {
        let g = GridSpec::new(2, 1.25, 8).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| i as f64 * 0.5 - 3.0).collect();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, &vals).unwrap();
        assert_eq!(buf.len(), 24 + 8 * g.len());
        assert_eq!(&buf[0..8], &2u64.to_le_bytes());
        let (g2, v2) = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(g2, g);
        assert_eq!(v2, vals);
    }

    fn random_field(seed: u64, len: usize) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_parseval_and_symmetry(seed in any::<u64>(), d in 1usize..=3, logn in 3u32..=5, l in 0.5f64..20.0) {
            let g = GridSpec::new(d, l, 1 << logn).unwrap();
            let vals = random_field(seed, g.len());
            let mut e = FftEngine::new(g);
            let f = e.forward(&vals).unwrap();
            prop_assert!(f.hermitian_defect() < 1e-13 * g.volume());
            let (back, imag) = e.inverse(&f).unwrap();
            let max_err = back.iter().zip(&vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(max_err < 1e-12);
            prop_assert!(imag < 1e-12);
            let lhs: f64 = g.cell_volume() * vals.iter().map(|v| v * v).sum::<f64>();
            let rhs: f64 = f.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / g.volume();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            prop_assert!((sobolev_norm(&f, 0.0).powi(2) - lhs).abs() <= 1e-12 * lhs);
        }

        #[test]
        fn norm_monotone_in_alpha(seed in any::<u64>(), a in -2.0f64..2.0, da in 0.0f64..2.0) {
            let g = GridSpec::new(1, 3.0, 32).unwrap();
            let f = FftEngine::new(g).forward(&random_field(seed, g.len())).unwrap();
            prop_assert!(sobolev_norm(&f, a + da) >= sobolev_norm(&f, a));
        }
    }
}
