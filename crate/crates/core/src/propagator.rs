//! Fourier multipliers of the fundamental solution of `∂²ₜ + (−Δ)^k`.

use crate::error::{Error, Result};
use crate::special::sinc;

/// The multiplier family `ℱG(t)(ξ) = sin(t|ξ|^k)/|ξ|^k` for a fixed order `k`,
/// with the horizon `T` used by [`Propagator::kernel_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub k: f64,
    pub horizon: f64,
}

impl Propagator {
    pub fn new(k: f64, horizon: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain("propagator", format!("order k must be positive, got {k}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("propagator", format!("horizon T must be positive, got {horizon}")));
        }
        Ok(Propagator { k, horizon })
    }

    #[inline]
    pub fn omega(&self, r: f64) -> f64 {
        r.powf(self.k)
    }

    /// `sin(t r^k)/r^k`, continuous at `r = 0` where it equals `t`.
    #[inline]
    pub fn fourier_g(&self, t: f64, r: f64) -> f64 {
        g_of_omega(t, self.omega(r))
    }

    /// `cos(t r^k)`, the multiplier of `d/dt G(t)`.
    #[inline]
    pub fn fourier_dg(&self, t: f64, r: f64) -> f64 {
        (t * self.omega(r)).cos()
    }

    /// `ℱG(t2) − ℱG(t1)` in product form, free of cancellation when `t2 ≈ t1`.
    #[inline]
    pub fn fourier_g_diff(&self, t1: f64, t2: f64, r: f64) -> f64 {
        let w = self.omega(r);
        if t1 == t2 {
            return 0.0;
        }
        // 2 cos((t1+t2)w/2) sin((t2-t1)w/2) / w, with sin(x)/w = (t2-t1)/2 * sinc(x)
        let h = t2 - t1;
        h * ((t1 + t2) * 0.5 * w).cos() * sinc(0.5 * h * w)
    }

    /// `2^k (1+T²) / (1+r²)^k`, a uniform bound on `ℱG(t)(r)²` for `t ≤ T`.
    pub fn kernel_bound(&self, r: f64) -> f64 {
        2f64.powf(self.k) * (1.0 + self.horizon * self.horizon) / (1.0 + r * r).powf(self.k)
    }
}

/// `sin(t w)/w` as a function of the frequency `w = r^k`.
#[inline]
pub(crate) fn g_of_omega(t: f64, w: f64) -> f64 {
    t * sinc(t * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(k: f64) -> Propagator {
        Propagator::new(k, 1.0).unwrap()
    }

    #[test]
    fn trivial_values() {
        assert_eq!(p(1.0).fourier_g(0.0, 3.7), 0.0);
        assert_eq!(p(1.0).fourier_g(2.0, 0.0), 2.0);
        assert!(p(1.0).fourier_g(1.0, std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(p(1.3).fourier_dg(0.0, 5.0), 1.0);
        let r = std::f64::consts::PI.sqrt();
        assert!((p(2.0).fourier_dg(1.0, r) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn bound_values() {
        assert!((p(1.0).kernel_bound(0.0) - 4.0).abs() < 1e-15);
        assert!((p(1.0).kernel_bound(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Propagator::new(0.0, 1.0).is_err());
        assert!(Propagator::new(1.0, -1.0).is_err());
    }

    #[test]
    fn series_branch_meets_exact_branch() {
        let prop = p(1.0);
        let t: f64 = 1.0;
        let r = 1e-4;
        let exact = (t * r).sin() / r;
        assert!((prop.fourier_g(t, r) - exact).abs() / exact < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for k in [0.5, 1.0, 2.0] {
            let prop = p(k);
            for &r in &[0.1, 1.0, 10.0] {
                for &h in &[1e-4, 1e-5] {
                    let t = 0.7;
                    let fd = (prop.fourier_g(t + h, r) - prop.fourier_g(t, r)) / h;
                    // first-order difference error is h/2 * |G''| <= h/2 * r^k
                    let bound = 0.5 * h * prop.omega(r) + 1e-9;
                    assert!((fd - prop.fourier_dg(t, r)).abs() <= bound, "k={k} r={r} h={h}");
                }
            }
        }
    }

    #[test]
    fn difference_form_beats_direct_subtraction() {
        let prop = p(1.0);
        let (t1, t2, r) = (1.0, 1.0 + 1e-8, 1e6);
        // 50-digit evaluation of (sin(t2 r) - sin(t1 r)) / r for the binary t2.
        let oracle = 9.384_864_622_895_212_679e-9;
        let product = prop.fourier_g_diff(t1, t2, r);
        // The mean argument (t1+t2)r/2 ~ 1e6 carries ~1e-10 absolute rounding.
        assert!((product - oracle).abs() / oracle < 5e-10);
        let direct = prop.fourier_g(t2, r) - prop.fourier_g(t1, r);
        assert!((direct - oracle).abs() / oracle > 1e-9);
        assert_eq!(prop.fourier_g_diff(0.3, 0.3, 2.0), 0.0);
        assert!((prop.fourier_g_diff(0.0, 0.8, 2.0) - prop.fourier_g(0.8, 2.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn squared_multiplier_respects_bound(k in 0.25f64..3.0, t in 0.0f64..1.0, r in 0.0f64..1e3) {
            let prop = p(k);
            prop_assert!(prop.fourier_g(t, r).powi(2) <= prop.kernel_bound(r) * (1.0 + 1e-12));
        }

        #[test]
        fn multiplier_bounded_by_t_and_inverse_frequency(k in 0.25f64..3.0, t in 0.0f64..5.0, r in 1e-3f64..1e3) {
            let prop = p(k);
            let g = prop.fourier_g(t, r).abs();
            prop_assert!(g <= t * (1.0 + 1e-14));
            prop_assert!(g <= prop.omega(r).recip() * (1.0 + 1e-14));
        }

        #[test]
        fn differences_telescope(k in 0.25f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, r in 0.0f64..100.0) {
            let mut ts = [a, b, c];
            ts.sort_by(f64::total_cmp);
            let prop = p(k);
            let lhs = prop.fourier_g_diff(ts[0], ts[1], r) + prop.fourier_g_diff(ts[1], ts[2], r);
            prop_assert!((lhs - prop.fourier_g_diff(ts[0], ts[2], r)).abs() < 1e-12);
        }

        #[test]
        fn difference_matches_subtraction_when_well_separated(k in 0.5f64..2.0, t1 in 0.0f64..1.0, h in 0.01f64..1.0, r in 1.0f64..50.0) {
            let prop = p(k);
            let t2 = t1 + h;
            let direct = prop.fourier_g(t2, r) - prop.fourier_g(t1, r);
            prop_assert!((direct - prop.fourier_g_diff(t1, t2, r)).abs() < 1e-12);
        }
    }
}
