//! Closed-form time integrals of products of the propagator multiplier.
//!
//! Every kernel is a function of the frequency `w = r^k` and splits, for
//! large `w`, into a non-oscillating mean `m/w²`, "slow" terms oscillating at
//! a frequency set by a lag, and "fast" terms oscillating at a frequency set
//! by absolute time. The radial integrator uses that split to stop resolving
//! oscillations once their contribution is below tolerance.

use crate::special::{one_minus_sinc_over_sq as f3, sinc};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeKernel {
    /// `∫_0^t ℱG(s)² ds`.
    Variance { t: f64 },
    /// `∫_0^{t1} (ℱG(t2−s) − ℱG(t1−s))² ds + ∫_{t1}^{t2} ℱG(t2−s)² ds`.
    Increment { t1: f64, t2: f64 },
    /// `∫_0^{t1} ℱG(t2−s) ℱG(t1−s) ds`.
    Cross { t1: f64, t2: f64 },
    /// `ℱG(s)²`.
    Pointwise { s: f64 },
}

impl TimeKernel {
    pub fn eval(&self, w: f64) -> f64 {
        match *self {
            TimeKernel::Variance { t } => 2.0 * t * t * t * f3(2.0 * t * w),
            TimeKernel::Increment { t1, t2 } => {
                let h = t2 - t1;
                let s = t1 + t2;
                let hs = 0.5 * h * sinc(0.5 * h * w);
                let t1_term = 2.0 * hs * hs * (t1 + 0.5 * (s * sinc(s * w) - h * sinc(h * w)));
                t1_term + 2.0 * h * h * h * f3(2.0 * h * w)
            }
            TimeKernel::Cross { t1, t2 } => {
                let h = t2 - t1;
                let s = t1 + t2;
                let hs = 0.5 * h * sinc(0.5 * h * w);
                -t1 * hs * hs + 0.25 * (s * s * s * f3(s * w) - h * h * h * f3(h * w))
            }
            TimeKernel::Pointwise { s } => {
                let g = s * sinc(s * w);
                g * g
            }
        }
    }

    /// Coefficient `m` of the non-oscillating large-frequency behaviour `m/w²`.
    pub fn mean_coefficient(&self) -> f64 {
        match *self {
            TimeKernel::Variance { t } => 0.5 * t,
            TimeKernel::Increment { t1, t2 } => t1 + 0.5 * (t2 - t1),
            TimeKernel::Cross { .. } => 0.0,
            TimeKernel::Pointwise { .. } => 0.5,
        }
    }

    /// Highest oscillation frequency (in `w`) present in the kernel.
    pub fn fast_frequency(&self) -> f64 {
        match *self {
            TimeKernel::Variance { t } => 2.0 * t,
            TimeKernel::Increment { t2, .. } => 2.0 * t2,
            TimeKernel::Cross { t1, t2 } => t1 + t2,
            TimeKernel::Pointwise { s } => 2.0 * s,
        }
    }

    /// Highest frequency among the terms kept by [`TimeKernel::slow_part`].
    pub fn slow_frequency(&self) -> f64 {
        match *self {
            TimeKernel::Increment { t1, t2 } if t1 > 0.0 => 2.0 * (t2 - t1),
            TimeKernel::Cross { t1, t2 } if t1 > 0.0 => t2 - t1,
            _ => 0.0,
        }
    }

    /// The kernel with every fast-oscillating term removed. Only meaningful
    /// for `w` well beyond `1/fast_frequency`.
    pub fn slow_part(&self, w: f64) -> f64 {
        let w2 = w * w;
        match *self {
            TimeKernel::Variance { t } => 0.5 * t / w2,
            TimeKernel::Pointwise { .. } => 0.5 / w2,
            TimeKernel::Increment { t1, t2 } => {
                let h = t2 - t1;
                let c = (h * w).cos();
                let sn = (h * w).sin();
                (t1 * (1.0 - c) + 0.5 * h) / w2
                    - (1.0 - c) * sn / (2.0 * w2 * w)
                    - (2.0 * h * w).sin() / (4.0 * w2 * w)
            }
            TimeKernel::Cross { t1, t2 } => {
                let h = t2 - t1;
                t1 * (h * w).cos() / (2.0 * w2) + (h * w).sin() / (4.0 * w2 * w)
            }
        }
    }

    /// Envelope of the terms dropped by `slow_part`, as a multiple of `1/w²`.
    pub(crate) fn fast_envelope(&self) -> f64 {
        match *self {
            // fast terms are O(1/w³) except the pointwise cos(2sw)/(2w²)
            TimeKernel::Pointwise { .. } => 0.5,
            TimeKernel::Variance { .. } | TimeKernel::Increment { .. } | TimeKernel::Cross { .. } => 0.0,
        }
    }

    /// Envelope of the slow oscillating terms, as a multiple of `1/w²`.
    pub(crate) fn slow_envelope(&self) -> f64 {
        match *self {
            TimeKernel::Increment { t1, .. } => t1,
            TimeKernel::Cross { t1, .. } => 0.5 * t1,
            _ => 0.0,
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        match *self {
            TimeKernel::Variance { t } => t == 0.0,
            TimeKernel::Increment { t1, t2 } => t1 == t2,
            TimeKernel::Cross { t1, .. } => t1 == 0.0,
            TimeKernel::Pointwise { s } => s == 0.0,
        }
    }
}
