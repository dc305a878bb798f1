//! Singular-integral realization of `I` on (0,1):
//!
//! `I(u)(x) = ∫₀¹ (u(y) − u(x)) K(x,y) dy`, with
//! `K(x,y) = c_α Σ_{k∈ℤ} ( |x−y−2k|^{−1−α} + |x+y−2k|^{−1−α} )`.
//!
//! The image sum comes from the even 2-periodic extension of `u`. It is only
//! used to cross-check the spectral operator; the time stepper never calls it.
//!
//! Truncated image sums are evaluated in O(1) through the Hurwitz zeta
//! function, so large `k_max` costs nothing extra.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::spectral::SpectralField;

/// Smallest quadrature resolution accepted by [`apply_I_integral`].
pub const MIN_QUAD_POINTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel form needs alpha in (0, 2), got {0}")]
    AlphaOutOfRange(f64),
    #[error("k_max must be at least 1")]
    ZeroTruncation,
    #[error("normalization constant must be positive, got {0}")]
    NonPositiveConstant(f64),
    #[error("kernel is singular on the diagonal x = y = {0}")]
    Diagonal(f64),
    #[error("point {0} outside the open interval (0, 1)")]
    OutsideDomain(f64),
    #[error("{quad_points} quadrature points: estimated error {estimate:e} exceeds {tol:e}")]
    InsufficientResolution {
        quad_points: usize,
        estimate: f64,
        tol: f64,
    },
}

pub type Result<T> = std::result::Result<T, KernelError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub alpha: f64,
    pub k_max: usize,
    pub c_alpha: f64,
}

impl KernelParams {
    /// Parameters with the standard one-dimensional normalization
    /// (see [`standard_constant`](Self::standard_constant)).
    pub fn new(alpha: f64, k_max: usize) -> Result<Self> {
        Self::with_constant(alpha, k_max, Self::standard_constant(alpha))
    }

    pub fn with_constant(alpha: f64, k_max: usize, c_alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(KernelError::AlphaOutOfRange(alpha));
        }
        if k_max == 0 {
            return Err(KernelError::ZeroTruncation);
        }
        if !(c_alpha > 0.0) {
            return Err(KernelError::NonPositiveConstant(c_alpha));
        }
        Ok(Self { alpha, k_max, c_alpha })
    }

    /// `c_α = 2^α Γ((1+α)/2) / (√π |Γ(−α/2)|)`, the constant for which
    /// `(−Δ)^{α/2} cos(ωx) = |ω|^α cos(ωx)` on ℝ.
    pub fn standard_constant(alpha: f64) -> f64 {
        2f64.powf(alpha) * gamma(0.5 * (1.0 + alpha)) / (PI.sqrt() * gamma(-0.5 * alpha).abs())
    }

    /// Upper bound on the image terms discarded by truncating at `k_max`.
    pub fn tail_bound(&self) -> f64 {
        if self.k_max < 2 {
            return f64::INFINITY;
        }
        4.0 * self.c_alpha / self.alpha * (2.0 * self.k_max as f64 - 2.0).powf(-self.alpha)
    }

    fn exponent(&self) -> f64 {
        1.0 + self.alpha
    }
}

const BERNOULLI_OVER_FACTORIAL: [f64; 7] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
];

/// Hurwitz zeta `ζ(s, a) = Σ_{j≥0} (a+j)^{−s}` for `s > 1`, `a > 0`, by
/// Euler–Maclaurin summation.
pub(crate) fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    let shift = if a < 10.0 { (10.0 - a).ceil() as usize } else { 0 };
    let mut sum: f64 = (0..shift).map(|j| (a + j as f64).powf(-s)).sum();
    let b = a + shift as f64;
    let b_pow = b.powf(-s);
    sum += b * b_pow / (s - 1.0) + 0.5 * b_pow;
    let inv_b2 = 1.0 / (b * b);
    // term m: B_{2m}/(2m)! · s(s+1)…(s+2m−2) · b^{−s−2m+1}
    let mut rising = s;
    let mut power = b_pow / b;
    for (m, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        sum += coeff * rising * power;
        let j = 2 * m + 1;
        rising *= (s + j as f64) * (s + j as f64 + 1.0);
        power *= inv_b2;
    }
    sum
}

/// `Σ_{k=1}^{K} (2k − d)^{−s}` for `d < 2`.
fn one_sided_images(d: f64, s: f64, k_max: usize) -> f64 {
    if k_max <= 64 {
        return (1..=k_max).map(|k| (2.0 * k as f64 - d).powf(-s)).sum();
    }
    let h = 0.5 * d;
    2f64.powf(-s) * (hurwitz_zeta(s, 1.0 - h) - hurwitz_zeta(s, k_max as f64 + 1.0 - h))
}

/// `Σ_{|k|≤K} |d − 2k|^{−s}` for `d ∈ (−2, 2)`.
fn image_sum(d: f64, s: f64, k_max: usize) -> f64 {
    d.abs().powf(-s) + one_sided_images(d, s, k_max) + one_sided_images(-d, s, k_max)
}

fn check_point(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(KernelError::OutsideDomain(x))
    }
}

/// Truncated kernel `K(x, y)`.
pub fn kernel_eval(x: f64, y: f64, p: &KernelParams) -> Result<f64> {
    check_point(x)?;
    check_point(y)?;
    if x == y {
        return Err(KernelError::Diagonal(x));
    }
    let s = p.exponent();
    Ok(p.c_alpha * (image_sum(x - y, s, p.k_max) + image_sum(x + y, s, p.k_max)))
}

/// `K(x,y) − c_α |x−y|^{−1−α}`: every image except the direct one, smooth
/// across the diagonal.
fn regular_kernel(x: f64, y: f64, p: &KernelParams) -> f64 {
    let s = p.exponent();
    let d = x - y;
    p.c_alpha * (one_sided_images(d, s, p.k_max) + one_sided_images(-d, s, p.k_max) + image_sum(x + y, s, p.k_max))
}

/// Quadrature approximation of `I(u)(x)` from the kernel representation.
///
/// The direct singular image is regularized by subtracting the second-order
/// Taylor polynomial of `u` at `x`; the subtracted part is integrated in
/// closed form (its odd term as a principal value). What remains is
/// `O(|y−x|^{2−α})` near the diagonal and is integrated with the midpoint
/// rule on `[0,x]` and `[x,1]` separately.
#[allow(non_snake_case)]
pub fn apply_I_integral(u: &SpectralField, x: f64, p: &KernelParams, quad_points: usize) -> Result<f64> {
    check_point(x)?;
    if quad_points < MIN_QUAD_POINTS {
        return Err(KernelError::InsufficientResolution {
            quad_points,
            estimate: f64::INFINITY,
            tol: 0.0,
        });
    }
    let alpha = p.alpha;
    let s = p.exponent();
    let u0 = u.eval(x);
    let du = u.eval_dx(x);
    let d2u = u.eval_dxx(x);

    let integrand = |y: f64| {
        let r = y - x;
        let uy = u.eval(y);
        let taylor_rest = uy - u0 - du * r - 0.5 * d2u * r * r;
        p.c_alpha * taylor_rest * r.abs().powf(-s) + (uy - u0) * regular_kernel(x, y, p)
    };

    let n_left = ((quad_points as f64 * x).round() as usize).clamp(1, quad_points - 1);
    let n_right = quad_points - n_left;
    let midpoint = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        (0..n).map(|i| integrand(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    };
    let numeric = midpoint(0.0, x, n_left) + midpoint(x, 1.0, n_right);

    let (left, right) = (x, 1.0 - x);
    let odd_moment = if (alpha - 1.0).abs() < 1e-12 {
        (right / left).ln()
    } else {
        (right.powf(1.0 - alpha) - left.powf(1.0 - alpha)) / (1.0 - alpha)
    };
    let even_moment = (right.powf(2.0 - alpha) + left.powf(2.0 - alpha)) / (2.0 - alpha);
    let analytic = p.c_alpha * (du * odd_moment + 0.5 * d2u * even_moment);

    Ok(numeric + analytic)
}

/// Like [`apply_I_integral`], but compares against the half-resolution value
/// and fails when the difference exceeds `tol`.
#[allow(non_snake_case)]
pub fn apply_I_integral_checked(
    u: &SpectralField,
    x: f64,
    p: &KernelParams,
    quad_points: usize,
    tol: f64,
) -> Result<f64> {
    let fine = apply_I_integral(u, x, p, quad_points)?;
    let coarse = apply_I_integral(u, x, p, quad_points / 2)?;
    let estimate = (fine - coarse).abs();
    if estimate > tol {
        return Err(KernelError::InsufficientResolution {
            quad_points,
            estimate,
            tol,
        });
    }
    Ok(fine)
}
