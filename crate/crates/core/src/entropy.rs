//! Regularized mobility `f_ε(s) = s₊ⁿ + ε` and the entropy density
//! `G_ε(s) = ∫₁ˢ ∫₁ʳ dt dr / f_ε(t)`.
//!
//! For `ε = 0` the closed forms are used, with `G(s) = +∞` for `s < 0`. For
//! `ε > 0` there is no convenient closed form; the double integral is reduced
//! to the single integral `∫₁ˢ (s − t) / f_ε(t) dt` and evaluated by adaptive
//! Gauss–Kronrod quadrature.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature;
use crate::spectral::GridField;

/// Distance from `n = 1` or `n = 2` below which the adjacent closed form is used.
pub const CASE_BOUNDARY_TOL: f64 = 1e-8;

const QUAD_ABS_TOL: f64 = 1e-15;
const QUAD_REL_TOL: f64 = 1e-14;
const QUAD_MAX_PANELS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("mobility exponent n = {0} must be >= 1")]
    ExponentOutOfRange(f64),
    #[error("regularization epsilon = {0} must be >= 0")]
    NegativeEpsilon(f64),
    #[error("closed form only exists for epsilon = 0 (got {0})")]
    NoClosedForm(f64),
    #[error("entropy quadrature at s = {s} did not converge (estimate {estimate:e})")]
    QuadratureFailed { s: f64, estimate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilitySpec {
    pub n: f64,
    pub epsilon: f64,
}

impl MobilitySpec {
    pub fn new(n: f64, epsilon: f64) -> Result<Self, EntropyError> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(EntropyError::ExponentOutOfRange(n));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(EntropyError::NegativeEpsilon(epsilon));
        }
        Ok(Self { n, epsilon })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, EntropyError> {
        Self::new(self.n, epsilon)
    }
}

fn positive_part_pow(s: f64, n: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if n == 1.0 {
        s
    } else if n.fract() == 0.0 && n <= 16.0 {
        s.powi(n as i32)
    } else {
        s.powf(n)
    }
}

/// `f_ε(s) = max(s, 0)ⁿ + ε`.
pub fn mobility(s: f64, spec: &MobilitySpec) -> f64 {
    positive_part_pow(s, spec.n) + spec.epsilon
}

/// `f_ε'(s) = n s^{n−1}` for `s > 0`, zero otherwise.
pub fn mobility_derivative(s: f64, spec: &MobilitySpec) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        spec.n * positive_part_pow(s, spec.n - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyFn {
    pub mobility: MobilitySpec,
    pub method: EvaluationMethod,
}

impl EntropyFn {
    /// Closed form when `ε = 0`, quadrature otherwise.
    pub fn new(mobility: MobilitySpec) -> Self {
        let method = if mobility.epsilon == 0.0 {
            EvaluationMethod::ClosedForm
        } else {
            EvaluationMethod::Quadrature
        };
        Self { mobility, method }
    }

    pub fn with_method(mobility: MobilitySpec, method: EvaluationMethod) -> Result<Self, EntropyError> {
        if method == EvaluationMethod::ClosedForm && mobility.epsilon != 0.0 {
            return Err(EntropyError::NoClosedForm(mobility.epsilon));
        }
        Ok(Self { mobility, method })
    }
}

/// Closed-form `G` for `ε = 0`.
pub(crate) fn closed_form(s: f64, n: f64) -> f64 {
    if s < 0.0 {
        return f64::INFINITY;
    }
    if (n - 1.0).abs() < CASE_BOUNDARY_TOL {
        if s == 0.0 {
            1.0
        } else {
            s * s.ln() - s + 1.0
        }
    } else if (n - 2.0).abs() < CASE_BOUNDARY_TOL {
        if s == 0.0 {
            f64::INFINITY
        } else {
            -s.ln() + s - 1.0
        }
    } else if n < 2.0 {
        -s.powf(2.0 - n) / ((2.0 - n) * (n - 1.0)) + s / (n - 1.0) + 1.0 / (2.0 - n)
    } else if s == 0.0 {
        f64::INFINITY
    } else {
        s.powf(2.0 - n) / ((n - 2.0) * (n - 1.0)) + s / (n - 1.0) - 1.0 / (n - 2.0)
    }
}

fn by_quadrature(s: f64, spec: &MobilitySpec) -> Result<f64, EntropyError> {
    if spec.epsilon == 0.0 && s <= 0.0 {
        return Ok(closed_form(s, spec.n));
    }
    // G(s) = ∫ over [min(s,1), max(s,1)] of |s − t| / f(t) dt.
    let (lo, hi) = if s < 1.0 { (s, 1.0) } else { (1.0, s) };
    let integrand = |t: f64| (s - t).abs() / mobility(t, spec);
    let run = |a: f64, b: f64| {
        quadrature::integrate(integrand, a, b, QUAD_ABS_TOL, QUAD_REL_TOL, QUAD_MAX_PANELS)
            .map_err(|e| EntropyError::QuadratureFailed { s, estimate: e.error })
    };
    if lo < 0.0 {
        // f_ε has a kink at 0
        Ok(run(lo, 0.0)? + run(0.0, hi)?)
    } else {
        run(lo, hi)
    }
}

/// `G_ε(s)`; may be `+∞` when `ε = 0`.
pub fn entropy_value(s: f64, entropy: &EntropyFn) -> Result<f64, EntropyError> {
    if s == 1.0 {
        return Ok(0.0);
    }
    match entropy.method {
        EvaluationMethod::ClosedForm => {
            if entropy.mobility.epsilon != 0.0 {
                return Err(EntropyError::NoClosedForm(entropy.mobility.epsilon));
            }
            Ok(closed_form(s, entropy.mobility.n))
        }
        EvaluationMethod::Quadrature => by_quadrature(s, &entropy.mobility),
    }
}

/// Midpoint-rule integral of `G_ε(u)` over the grid. Any infinite node value
/// makes the total infinite.
pub fn entropy_total(u: &GridField, entropy: &EntropyFn) -> Result<f64, EntropyError> {
    let mut sum = 0.0;
    for &v in u.values() {
        let g = entropy_value(v, entropy)?;
        if g.is_infinite() {
            return Ok(f64::INFINITY);
        }
        sum += g;
    }
    Ok(sum / u.n_points() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: f64, eps: f64) -> MobilitySpec {
        MobilitySpec::new(n, eps).unwrap()
    }

    #[test]
    fn mobility_examples() {
        assert_eq!(mobility(-1.0, &spec(2.5, 0.1)), 0.1);
        assert_eq!(mobility(1.0, &spec(3.0, 0.0)), 1.0);
        assert_eq!(mobility(2.0, &spec(3.0, 0.5)), 8.5);
    }

    #[test]
    fn mobility_lower_bounds_and_monotone() {
        for &n in &[1.0, 1.5, 3.0, 4.2] {
            let sp = spec(n, 0.01);
            let mut prev = mobility(-2.0, &sp);
            for i in 0..400 {
                let s = -2.0 + i as f64 * 0.02;
                let f = mobility(s, &sp);
                assert!(f >= 0.01);
                assert!(f >= s.max(0.0).powf(n));
                assert!(f >= prev);
                if s <= 0.0 {
                    assert_eq!(f, 0.01);
                }
                prev = f;
            }
        }
    }

    #[test]
    fn mobility_derivative_matches_difference() {
        let sp = spec(3.0, 0.2);
        for &s in &[0.3, 1.0, 2.5] {
            let h = 1e-6;
            let fd = (mobility(s + h, &sp) - mobility(s - h, &sp)) / (2.0 * h);
            assert!((fd - mobility_derivative(s, &sp)).abs() < 1e-6);
        }
        assert_eq!(mobility_derivative(-1.0, &sp), 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(MobilitySpec::new(0.5, 0.0).is_err());
        assert!(MobilitySpec::new(2.0, -1e-3).is_err());
        assert!(MobilitySpec::new(f64::NAN, 0.0).is_err());
        assert!(EntropyFn::with_method(spec(2.0, 0.1), EvaluationMethod::ClosedForm).is_err());
    }

    #[test]
    fn entropy_examples() {
        for &(n, eps) in &[(1.0, 0.0), (1.5, 0.3), (3.0, 0.0), (3.0, 1e-4)] {
            assert_eq!(entropy_value(1.0, &EntropyFn::new(spec(n, eps))).unwrap(), 0.0);
        }
        let g = entropy_value(2.0, &EntropyFn::new(spec(1.0, 0.0))).unwrap();
        assert!((g - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((g - 0.386294).abs() < 1e-6);
        assert_eq!(
            entropy_value(0.0, &EntropyFn::new(spec(3.0, 0.0))).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            entropy_value(-0.5, &EntropyFn::new(spec(1.0, 0.0))).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn entropy_at_zero_for_mild_exponents() {
        // G(0) is finite for n < 2
        assert_eq!(closed_form(0.0, 1.0), 1.0);
        assert!((closed_form(0.0, 1.5) - 2.0).abs() < 1e-15);
        let q = entropy_value(
            0.0,
            &EntropyFn::with_method(spec(1.5, 0.0), EvaluationMethod::Quadrature).unwrap(),
        )
        .unwrap();
        assert!((q - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regularized_entropy_finite_for_negative_values() {
        let e = EntropyFn::new(spec(3.0, 0.1));
        let g = entropy_value(-0.5, &e).unwrap();
        // on (−∞, 0] G'' = 1/ε, so the value is finite and dominated by the quadratic
        assert!(g.is_finite() && g > 0.5 * 0.25 / 0.1);
    }

    #[test]
    fn monotone_in_epsilon() {
        for &n in &[1.0, 2.0, 3.0] {
            for &s in &[-0.3, 0.05, 0.5, 2.0, 7.0] {
                let mut prev = f64::INFINITY;
                for &eps in &[0.0, 1e-4, 1e-2, 1.0] {
                    let g = entropy_value(s, &EntropyFn::new(spec(n, eps))).unwrap();
                    assert!(g <= prev * (1.0 + 1e-13), "n={n} s={s} eps={eps}");
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn convex_with_vanishing_slope_at_one() {
        let e = EntropyFn::new(spec(2.5, 0.05));
        let h = 1e-4;
        let gp = entropy_value(1.0 + h, &e).unwrap();
        let gm = entropy_value(1.0 - h, &e).unwrap();
        assert!(((gp - gm) / (2.0 * h)).abs() < 1e-7);
        for i in 1..50 {
            let s = -0.5 + i as f64 * 0.1;
            let mid = entropy_value(s, &e).unwrap();
            let l = entropy_value(s - 0.05, &e).unwrap();
            let r = entropy_value(s + 0.05, &e).unwrap();
            assert!(l + r - 2.0 * mid > 0.0);
        }
    }

    #[test]
    fn case_boundaries_route_to_neighbour() {
        for &s in &[0.3, 2.0] {
            assert_eq!(closed_form(s, 1.0 + 1e-9), closed_form(s, 1.0));
            assert_eq!(closed_form(s, 2.0 - 1e-9), closed_form(s, 2.0));
        }
    }

    #[test]
    fn entropy_total_examples() {
        let e0 = EntropyFn::new(spec(1.0, 0.0));
        let ones = GridField::new(vec![1.0; 8]).unwrap();
        assert_eq!(entropy_total(&ones, &e0).unwrap(), 0.0);
        let twos = GridField::new(vec![2.0; 8]).unwrap();
        assert!((entropy_total(&twos, &e0).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
        let mut v = vec![1.0; 8];
        v[3] = -1e-3;
        let neg = GridField::new(v).unwrap();
        assert_eq!(entropy_total(&neg, &e0).unwrap(), f64::INFINITY);
    }
}
