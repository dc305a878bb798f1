//! The entropy density against an independent nested quadrature of
//! `G(s) = ∫₁ˢ ∫₁ʳ dt/f(t) dr`, plus `G''·f = 1` and continuity across the
//! case boundaries.

use fracfilm_core::entropy::{entropy_value, mobility, EntropyFn, EvaluationMethod, MobilitySpec};
use proptest::prelude::*;

/// 20-point Gauss–Legendre on each of `panels` equal panels.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    // nodes and weights on [-1, 1], positive half
    const X: [f64; 10] = [
        0.076_526_521_133_497_33,
        0.227_785_851_141_645_08,
        0.373_706_088_715_419_56,
        0.510_867_001_950_827_1,
        0.636_053_680_726_515,
        0.746_331_906_460_150_8,
        0.839_116_971_822_218_8,
        0.912_234_428_251_326,
        0.963_971_927_277_913_8,
        0.993_128_599_185_094_9,
    ];
    const W: [f64; 10] = [
        0.152_753_387_130_725_85,
        0.149_172_986_472_603_75,
        0.142_096_109_318_382_05,
        0.131_688_638_449_176_63,
        0.118_194_531_961_518_42,
        0.101_930_119_817_240_44,
        0.083_276_741_576_704_75,
        0.062_672_048_334_109_06,
        0.040_601_429_800_386_94,
        0.017_614_007_139_152_12,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let c = a + (i as f64 + 0.5) * h;
            let r = 0.5 * h;
            X.iter()
                .zip(W)
                .map(|(x, w)| w * (f(c - r * x) + f(c + r * x)))
                .sum::<f64>()
                * r
        })
        .sum()
}

fn nested_entropy(s: f64, n: f64) -> f64 {
    let inner = |r: f64| gauss_legendre(|t| t.powf(-n), 1.0, r, 8);
    gauss_legendre(inner, 1.0, s, 8)
}

#[test]
fn closed_forms_match_nested_quadrature() {
    for &n in &[1.0, 1.5, 2.0, 3.0] {
        let g = EntropyFn::new(MobilitySpec::new(n, 0.0).unwrap());
        assert_eq!(g.method, EvaluationMethod::ClosedForm);
        for i in 0..=40 {
            // log-spaced over [0.1, 10]
            let s = 10f64.powf(-1.0 + i as f64 / 20.0);
            let closed = entropy_value(s, &g).unwrap();
            let oracle = nested_entropy(s, n);
            assert!(
                (closed - oracle).abs() <= 1e-8 * oracle.abs().max(1.0),
                "n={n} s={s}: {closed} vs {oracle}"
            );
        }
    }
}

#[test]
fn quadrature_path_matches_closed_form_at_zero_epsilon() {
    for &n in &[1.0, 1.5, 2.0, 3.0] {
        let spec = MobilitySpec::new(n, 0.0).unwrap();
        let closed = EntropyFn::new(spec);
        let quad = EntropyFn::with_method(spec, EvaluationMethod::Quadrature).unwrap();
        for &s in &[0.1, 0.5, 0.99, 1.5, 4.0, 10.0] {
            let a = entropy_value(s, &closed).unwrap();
            let b = entropy_value(s, &quad).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "n={n} s={s}");
        }
    }
}

/// Richardson-extrapolated central second difference.
fn second_derivative(g: &EntropyFn, s: f64) -> f64 {
    let d = |h: f64| {
        (entropy_value(s + h, g).unwrap() - 2.0 * entropy_value(s, g).unwrap() + entropy_value(s - h, g).unwrap())
            / (h * h)
    };
    let h = 1e-2 * s;
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[test]
fn second_derivative_inverts_mobility() {
    for &n in &[1.0, 1.5, 2.0, 3.0] {
        for &eps in &[0.0, 1e-2, 1e-4] {
            let spec = MobilitySpec::new(n, eps).unwrap();
            let g = EntropyFn::new(spec);
            for &s in &[0.1, 0.3, 0.7, 1.3, 3.0, 10.0] {
                let prod = second_derivative(&g, s) * mobility(s, &spec);
                assert!((prod - 1.0).abs() <= 1e-6, "n={n} eps={eps} s={s}: {prod}");
            }
        }
    }
}

#[test]
fn continuous_across_case_boundaries() {
    for &boundary in &[1.0, 2.0] {
        let at = EntropyFn::new(MobilitySpec::new(boundary, 0.0).unwrap());
        for &s in &[0.3, 0.8, 2.0, 5.0] {
            let g0 = entropy_value(s, &at).unwrap();
            let gap = |delta: f64| {
                // n < 1 is outside the admissible range
                [boundary + delta, boundary - delta]
                    .into_iter()
                    .filter_map(|n| MobilitySpec::new(n, 0.0).ok())
                    .map(|spec| (entropy_value(s, &EntropyFn::new(spec)).unwrap() - g0).abs())
                    .fold(0.0, f64::max)
            };
            assert!(gap(1e-7) <= 1e-6 * g0.abs().max(1.0), "n={boundary} s={s}");
            // first-order in the distance to the boundary
            let (a, b) = (gap(1e-3), gap(1e-4));
            assert!(b < a && b <= 0.2 * a + 1e-12, "n={boundary} s={s}: {a} {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convex_nonnegative_vanishing_at_one(
        n in 1.0..4.0f64,
        eps in prop_oneof![Just(0.0), 1e-4..1e-1f64],
        s in 0.05..8.0f64,
        t in 0.05..8.0f64,
    ) {
        let g = EntropyFn::new(MobilitySpec::new(n, eps).unwrap());
        let (gs, gt) = (entropy_value(s, &g).unwrap(), entropy_value(t, &g).unwrap());
        let mid = entropy_value(0.5 * (s + t), &g).unwrap();
        prop_assert!(gs >= 0.0);
        prop_assert_eq!(entropy_value(1.0, &g).unwrap(), 0.0);
        prop_assert!(mid <= 0.5 * (gs + gt) + 1e-12 * (gs + gt).max(1.0));
    }

    #[test]
    fn decreasing_in_epsilon(n in 1.0..4.0f64, s in 0.05..8.0f64) {
        let vals: Vec<f64> = [0.0, 1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&e| entropy_value(s, &EntropyFn::new(MobilitySpec::new(n, e).unwrap())).unwrap())
            .collect();
        prop_assert!(vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}
