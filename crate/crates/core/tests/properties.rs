use proptest::prelude::*;

use localwick::closedform::{self, covariances, SpectralBasis};
use localwick::functionals::{ExpFunctional, GEvaluator, KProfile, Renormalization, TestFunction};
use localwick::harness::stats::{richardson_weights, Welford};
use localwick::kernels::{KernelKind, Mollifier, MollifierSpec};
use localwick::localtime::{self, LocalTimeMethod};
use localwick::paths::{sample_bm, stream_rng, Grid};

fn method() -> impl Strategy<Value = LocalTimeMethod> {
    prop_oneof![Just(LocalTimeMethod::Occupation), Just(LocalTimeMethod::Tanaka)]
}

fn kernel() -> impl Strategy<Value = KernelKind> {
    prop_oneof![Just(KernelKind::Bump), Just(KernelKind::Epanechnikov)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mollifier_reproduces_linear_paths(kind in kernel(), eps in 0.02f64..0.2, theta in 0.25f64..0.75, slope in -3.0f64..3.0) {
        let grid = Grid::new(1024).unwrap();
        let m = Mollifier::new(MollifierSpec::new(kind, eps)).unwrap();
        let v: Vec<f64> = grid.nodes().map(|s| slope * s).collect();
        prop_assert!((m.mollify(&v, &grid, theta).unwrap() - slope * theta).abs() < 1e-12);
        prop_assert!((m.mollified_derivative(&v, &grid, theta).unwrap() - slope).abs() < 1e-12);
    }

    #[test]
    fn stencil_is_symmetric_with_unit_mass(kind in kernel(), eps in 0.005f64..0.2) {
        let grid = Grid::new(2048).unwrap();
        let m = Mollifier::new(MollifierSpec::new(kind, eps)).unwrap();
        let st = m.stencil(&grid).unwrap();
        let w = st.weights();
        for i in 0..w.len() {
            prop_assert_eq!(w[i], w[w.len() - 1 - i]);
        }
        prop_assert!((w.iter().sum::<f64>() * grid.step() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_eps_scales_like_inverse_width(eps in 0.01f64..0.1) {
        let m = Mollifier::new(MollifierSpec::bump(eps)).unwrap();
        let m2 = m.with_epsilon(eps / 2.0).unwrap();
        let (c, c2) = (m.c_eps(0.5).unwrap(), m2.c_eps(0.5).unwrap());
        prop_assert!((c2 / c - 2.0).abs() < 1e-8);
    }

    #[test]
    fn local_time_curves_are_monotone(seed in 0u64..1000, a in -0.5f64..0.5, m in method()) {
        let grid = Grid::new(512).unwrap();
        let p = sample_bm(&grid, &mut stream_rng(seed, 0));
        let c = localtime::localtime(p.values(), &grid, a, m, 0.1).unwrap();
        prop_assert_eq!(c.values()[0], 0.0);
        prop_assert!(c.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn reflected_local_time_is_twice_the_level_local_time(seed in 0u64..1000, a in -0.5f64..0.5, m in method()) {
        let grid = Grid::new(512).unwrap();
        let p = sample_bm(&grid, &mut stream_rng(seed, 1));
        let l = localtime::localtime(p.values(), &grid, a, m, 0.08).unwrap();
        let r = localtime::reflected_localtime(p.values(), &grid, a, m, 0.08).unwrap();
        for (x, y) in l.values().iter().zip(r.values()) {
            prop_assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn g_is_shift_covariant(seed in 0u64..1000, a in -1.0f64..1.0, m in method()) {
        // B + a l with l = 1 on [0.1, 1] has local time at a equal to that of B at 0 there.
        let grid = Grid::new(1024).unwrap();
        let h = TestFunction::bump(0.3, 0.7);
        let mol = Mollifier::new(MollifierSpec::bump(0.03)).unwrap();
        let ev = GEvaluator::new(grid, h, &mol, Renormalization::Discrete).unwrap();
        let p = sample_bm(&grid, &mut stream_rng(seed, 2));
        let ell = |t: f64| if t >= 0.1 { 1.0 } else { let x = t / 0.1; x * x * (3.0 - 2.0 * x) };
        let shifted: Vec<f64> = p.values().iter().enumerate().map(|(j, v)| v + a * ell(grid.node(j))).collect();
        let g0 = ev.evaluate_with(p.values(), &localtime::localtime(p.values(), &grid, 0.0, m, 0.1).unwrap()).unwrap();
        let g1 = ev.evaluate_with(&shifted, &localtime::localtime(&shifted, &grid, a, m, 0.1).unwrap()).unwrap();
        prop_assert!((g0 - g1).abs() <= 1e-9 * (1.0 + g0.abs()), "{} vs {}", g0, g1);
    }

    #[test]
    fn covariance_identity_within_tail_bound(t in 0.001f64..2.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let basis = SpectralBasis::new(256).unwrap();
        let c = covariances(t, &basis).unwrap();
        prop_assert!((c.q_t_series(x, y) + c.q_upper(x, y) - x.min(y)).abs() <= c.identity_tail_bound());
        prop_assert!((c.q_t_series(x, y) - c.q_t_series(y, x)).abs() < 1e-15);
    }

    #[test]
    fn sign_case_identity_closed_form(lo in 0.05f64..0.5, width in 0.1f64..0.4, a in -0.8f64..0.8, kv in -1.5f64..1.5) {
        let h = TestFunction::bump(lo, (lo + width).min(0.95));
        let k = ExpFunctional::new(KProfile::Constant { value: kv }).unwrap();
        let l = closedform::ibp_lhs_sign(&h, &k, a);
        let r = closedform::ibp_rhs_sign(&h, &k, a);
        prop_assert!((l - r).abs() < 1e-6, "{} vs {}", l, r);
    }

    #[test]
    fn laplace_with_zero_k_is_the_mean(lo in 0.05f64..0.5, a in -0.8f64..0.8) {
        let h = TestFunction::bump(lo, lo + 0.3);
        let zero = ExpFunctional::new(KProfile::Zero).unwrap();
        prop_assert_eq!(closedform::laplace_rhs(&h, &zero, a), closedform::mean_g(&h, a));
    }

    #[test]
    fn richardson_cancels_the_leading_term(e in 0.001f64..0.1, p in 0.5f64..3.0, l in -2.0f64..2.0, c in -5.0f64..5.0) {
        let (wf, wc) = richardson_weights(e / 2.0, e, p);
        prop_assert!((wf + wc - 1.0).abs() < 1e-12);
        let f = |x: f64| l + c * x.powf(p);
        prop_assert!((wf * f(e / 2.0) + wc * f(e) - l).abs() < 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn welford_merge_matches_sequential(xs in prop::collection::vec(-10.0f64..10.0, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let all: Welford = xs.iter().copied().collect();
        let mut a: Welford = xs[..cut].iter().copied().collect();
        let b: Welford = xs[cut..].iter().copied().collect();
        a.merge(&b);
        prop_assert_eq!(a.count(), all.count());
        prop_assert!((a.mean() - all.mean()).abs() < 1e-12);
        prop_assert!((a.variance() - all.variance()).abs() < 1e-9 * (1.0 + all.variance()));
    }
}
