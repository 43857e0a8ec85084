use delayopt::inversion::{
    delay_from_ratio, exact_domain_ratio, max_admissible_ratio, ratio_from_delay, OperatingPoint,
};
use delayopt::{Error, ScalarLoopGains};
use proptest::prelude::*;

/// Log argument written out term by term with plain `exp`.
fn log_arg(a: f64, b: f64, k: f64, h: f64, ratio: f64) -> f64 {
    let e = (-a * h).exp();
    (a / b) * e * (1.0 + k - k * (a * h).exp()) * ratio + k * e + 1.0
}

/// Root of `f(ρ) = target` on `[lo, hi]` for a decreasing `f`.
fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gains(a: f64, b: f64, k: u32) -> ScalarLoopGains {
    ScalarLoopGains::new(a, b, k).unwrap()
}

fn tau(g: ScalarLoopGains, h: f64, ratio: f64) -> f64 {
    delay_from_ratio(&OperatingPoint::new(g, h, ratio).unwrap()).unwrap().tau
}

#[test]
fn bisection_bounds_for_case1() {
    let f = |r| log_arg(-6.0, 6.0, 32.0, 0.001, r);
    let bound = bisect(f, 1.0, 0.0, 100.0);
    let edge = bisect(f, 0.0, 0.0, 100.0);
    assert!((bound - 26.8586).abs() < 1e-4);
    assert!((edge - 27.693).abs() < 1e-3);
    let g = gains(-6.0, 6.0, 32);
    assert!((max_admissible_ratio(&g, 0.001).unwrap() - bound).abs() < 1e-9);
    assert!((exact_domain_ratio(&g, 0.001).unwrap() - edge).abs() < 1e-9);
}

#[test]
fn table_iv_delays() {
    let g = gains(-11.0, 6.0, 32);
    let rows = [(0.001, 12.0, 0.109), (0.002, 10.0, 0.059), (0.003, 8.5, 0.019), (0.004, 7.0, 0.085), (0.005, 6.0, 0.108)];
    for (h, r, expected) in rows {
        let t = tau(g, h, r);
        assert!((t - expected).abs() <= 5e-4, "h={h}: {t}");
        let direct = -log_arg(-11.0, 6.0, 32.0, h, r).ln() / -11.0;
        assert!((t - direct).abs() < 1e-12);
    }
}

#[test]
fn past_the_domain_edge_is_an_error() {
    let g = gains(-11.0, 6.0, 32);
    let edge = exact_domain_ratio(&g, 0.002).unwrap();
    let err = delay_from_ratio(&OperatingPoint::new(g, 0.002, edge * 1.01).unwrap()).unwrap_err();
    match err {
        Error::OutOfDomain { h, log_argument, .. } => {
            assert_eq!(h, 0.002);
            assert!(log_argument <= 0.0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip(
        a in -20.0f64..-0.5,
        b in 1.0f64..10.0,
        k in 1u32..=64,
        h in 1e-4f64..1e-2,
        frac in 0.001f64..0.99,
    ) {
        let g = gains(a, b, k);
        let ratio = frac * max_admissible_ratio(&g, h).unwrap();
        let t = tau(g, h, ratio);
        prop_assert!(t > 0.0);
        let back = ratio_from_delay(&g, h, t).unwrap();
        prop_assert!(((back - ratio) / ratio).abs() <= 1e-10, "ratio={ratio} back={back}");
    }

    #[test]
    fn bounds_are_ordered_and_exact(
        a in -20.0f64..-0.5,
        b in 1.0f64..10.0,
        k in 1u32..=64,
        h in 1e-4f64..1e-2,
    ) {
        let g = gains(a, b, k);
        let bound = max_admissible_ratio(&g, h).unwrap();
        let edge = exact_domain_ratio(&g, h).unwrap();
        prop_assert!(edge >= bound);
        let est = delay_from_ratio(&OperatingPoint::new(g, h, bound).unwrap()).unwrap();
        prop_assert!(est.tau.abs() < 1e-9);
    }

    #[test]
    fn sign_and_monotonicity(
        a in -20.0f64..-0.5,
        b in 1.0f64..10.0,
        k in 1u32..=64,
        h in 1e-4f64..1e-2,
        f1 in 0.0f64..1.0,
        f2 in 0.0f64..1.0,
    ) {
        let g = gains(a, b, k);
        let bound = max_admissible_ratio(&g, h).unwrap();
        let edge = exact_domain_ratio(&g, h).unwrap();
        // below the bound the delay is positive; between bound and edge it is negative
        let (lo, hi) = (f1.min(f2) * bound, f1.max(f2) * bound);
        prop_assume!(hi - lo > 1e-6 * bound);
        let (t_lo, t_hi) = (tau(g, h, lo), tau(g, h, hi));
        prop_assert!(t_lo > 0.0 && t_hi > 0.0);
        prop_assert!(t_lo > t_hi);
        let between = bound + f1 * 0.9 * (edge - bound);
        prop_assume!(between > bound * (1.0 + 1e-9));
        let est = delay_from_ratio(&OperatingPoint::new(g, h, between).unwrap()).unwrap();
        prop_assert!(est.tau < 0.0);
        prop_assert!(est.warning.is_some());
    }
}
