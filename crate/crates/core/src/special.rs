//! Scalar special functions used by the kernels and quadrature rules.

use std::f64::consts::PI;

/// `sin(x)/x`, with the removable singularity at zero handled by a short
/// Taylor expansion below `1e-4`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(x - sin x) / x^3`, the smooth remainder of `1 - sinc(x)` scaled by `x^2`.
#[inline]
pub fn one_minus_sinc_over_sq(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        // sum_{n>=0} (-1)^n x^{2n} / (2n+3)!
        let mut term = 1.0 / 6.0;
        let mut sum = term;
        for n in 1..8 {
            let a = (2 * n + 2) as f64;
            let b = (2 * n + 3) as f64;
            term *= -x2 / (a * b);
            sum += term;
        }
        sum
    } else {
        (x - x.sin()) / (x * x * x)
    }
}

/// Exponentially scaled modified Bessel function `e^{-x} I_0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Asymptotic series; terms shrink until k ~ 2x, far past what we need.
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * x * kf);
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Surface measure of the unit sphere in `R^d` (counting measure on `{-1, 1}` for `d = 1`).
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0),
    }
}

/// Integral over unit directions `theta` of `exp(-|r theta + p e|^2)`, for fixed unit `e`,
/// computed without overflow as `exp(-(r-p)^2) * scaled_angular(2 r p)`.
pub fn gaussian_sphere_average(d: usize, r: f64, p: f64) -> f64 {
    let x = 2.0 * r * p;
    let base = (-(r - p) * (r - p)).exp();
    let scaled = match d {
        1 => 1.0 + (-2.0 * x).exp(),
        2 => 2.0 * PI * bessel_i0_scaled(x),
        3 => {
            if x < 1e-8 {
                4.0 * PI * (1.0 - x)
            } else {
                4.0 * PI * (-(-2.0 * x).exp_m1()) / (2.0 * x)
            }
        }
        _ => unreachable!("dimension validated upstream"),
    };
    base * scaled
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
