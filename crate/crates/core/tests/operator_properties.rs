//! Property tests for the spectral operator, transforms and kernel.

use approx::assert_relative_eq;
use fracfilm_core::kernel::{kernel_eval, KernelParams};
use fracfilm_core::spectral::{
    analyze, apply_I, apply_dx, invert_I, seminorm_inner, seminorm_sq, shifted_invert_I, synthesize,
};
use fracfilm_core::SpectralField;
use proptest::prelude::*;

fn field(max_modes: usize) -> impl Strategy<Value = SpectralField> {
    (4..=max_modes)
        .prop_flat_map(|n| prop::collection::vec(-1.0..1.0f64, n))
        .prop_map(|c| SpectralField::new(c).unwrap())
}

fn pair(max_modes: usize) -> impl Strategy<Value = (SpectralField, SpectralField)> {
    (4..=max_modes).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
            .prop_map(|(a, b)| (SpectralField::new(a).unwrap(), SpectralField::new(b).unwrap()))
    })
}

fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_identities(u in field(48), alpha in 0.05..1.95f64) {
        let m = 4 * u.n_modes();
        let iu = apply_I(&u, alpha).unwrap();
        let (gu, giu) = (synthesize(&u, m).unwrap(), synthesize(&iu, m).unwrap());
        let (du, diu) = (apply_dx(&u, m).unwrap(), apply_dx(&iu, m).unwrap());
        prop_assert!(close(-mean_product(giu.values(), gu.values()), seminorm_sq(&u, alpha / 2.0).unwrap(), 1e-10));
        prop_assert!(close(mean_product(giu.values(), giu.values()), seminorm_sq(&u, alpha).unwrap(), 1e-10));
        prop_assert!(close(-mean_product(diu.values(), du.values()), seminorm_sq(&u, alpha / 2.0 + 1.0).unwrap(), 1e-10));
        prop_assert!(close(mean_product(diu.values(), diu.values()), seminorm_sq(&u, alpha + 1.0).unwrap(), 1e-10));
    }

    #[test]
    fn self_adjoint((u, v) in pair(48), alpha in 0.05..1.95f64) {
        let lhs = seminorm_inner(&u, &v, alpha / 2.0).unwrap();
        let m = 4 * u.n_modes();
        let iu = synthesize(&apply_I(&u, alpha).unwrap(), m).unwrap();
        let iv = synthesize(&apply_I(&v, alpha).unwrap(), m).unwrap();
        let (gu, gv) = (synthesize(&u, m).unwrap(), synthesize(&v, m).unwrap());
        let a = mean_product(iu.values(), gv.values());
        let b = mean_product(gu.values(), iv.values());
        let scale = seminorm_sq(&u, alpha).unwrap().sqrt() * v.l2_norm() + 1e-300;
        prop_assert!((a - b).abs() <= 1e-12 * scale);
        prop_assert!((a + lhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn transform_round_trip(u in field(64), extra in 0usize..40) {
        let m = u.n_modes() + extra;
        let back = analyze(&synthesize(&u, m).unwrap()).unwrap().resized(u.n_modes());
        prop_assert!(back.l2_distance(&u) <= 1e-13 * (1.0 + u.l2_norm()));
        if extra > 0 {
            let tail = analyze(&synthesize(&u, m).unwrap()).unwrap();
            prop_assert!(tail.coeffs()[u.n_modes()..].iter().all(|c| c.abs() < 1e-13));
        }
    }

    #[test]
    fn inversions_round_trip(u in field(64), alpha in 0.05..1.95f64) {
        let mut c = u.coeffs().to_vec();
        c[0] = 0.0;
        let g = SpectralField::new(c).unwrap();
        let back = -&apply_I(&invert_I(&g, alpha).unwrap(), alpha).unwrap();
        prop_assert!(back.l2_distance(&g) <= 1e-12 * (1.0 + g.l2_norm()));
        let v = shifted_invert_I(&u, alpha).unwrap();
        let mut fwd = (-&apply_I(&v, alpha).unwrap()).into_coeffs();
        fwd[0] += v.mean();
        prop_assert!(SpectralField::new(fwd).unwrap().l2_distance(&u) <= 1e-12 * (1.0 + u.l2_norm()));
    }

    #[test]
    fn seminorms_nonnegative_and_ordered(u in field(32), s in 0.0..3.0f64) {
        let a = seminorm_sq(&u, s).unwrap();
        let b = seminorm_sq(&u, s + 0.5).unwrap();
        prop_assert!(a >= 0.0);
        // λ_k ≥ π² > 1, so higher orders dominate
        prop_assert!(b >= a);
    }

    #[test]
    fn kernel_symmetric_and_positive(x in 0.01..0.99f64, y in 0.01..0.99f64, alpha in 0.1..1.9f64) {
        prop_assume!((x - y).abs() > 1e-6);
        let p = KernelParams::new(alpha, 200).unwrap();
        let kxy = kernel_eval(x, y, &p).unwrap();
        let kyx = kernel_eval(y, x, &p).unwrap();
        prop_assert!(kxy > 0.0);
        prop_assert!((kxy - kyx).abs() <= 1e-12 * kxy);
    }
}

#[test]
fn limit_orders_are_exact() {
    let u = SpectralField::new((0..16).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap();
    let lap = apply_I(&u, 2.0).unwrap();
    let zero = apply_I(&u, 0.0).unwrap();
    for k in 0..16 {
        let kp = k as f64 * std::f64::consts::PI;
        assert_eq!(lap.coeffs()[k], -(kp * kp) * u.coeffs()[k]);
        let expected = if k == 0 { 0.0 } else { -u.coeffs()[k] };
        assert_eq!(zero.coeffs()[k], expected);
    }
    assert_relative_eq!(
        seminorm_sq(&u, 0.0).unwrap(),
        u.l2_norm().powi(2) - u.mean().powi(2),
        max_relative = 1e-14
    );
}
