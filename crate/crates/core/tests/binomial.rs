mod common;

use common::{cl, p};
use proptest::prelude::*;
use qcase_core::binomial::{binom_cdf, cp_lower, cp_upper, max_acceptable_failures, min_sample_size};
use statrs::distribution::{Binomial, DiscreteCDF};

fn oracle_cdf(k: u64, n: u64, prob: f64) -> f64 {
    Binomial::new(prob, n).unwrap().cdf(k)
}

#[test]
fn duality_exhaustive_to_200() {
    for level in [0.9, 0.99, 0.9999] {
        let c = cl(level);
        for n in 1..=200u64 {
            for k in 0..=n {
                let lower = cp_lower(k, n, c).unwrap().value();
                let upper = cp_upper(n - k, n, c).unwrap().value();
                assert!(
                    (lower - (1.0 - upper)).abs() <= 1e-12,
                    "k {k} n {n} cl {level}: {lower} vs {}",
                    1.0 - upper
                );
            }
        }
    }
}

#[test]
fn cdf_agrees_with_incomplete_beta_at_scale() {
    for (k, n, prob) in [
        (0, 100_000, 0.002),
        (149, 100_000, 0.002),
        (64, 100_000, 0.001),
        (300, 100_000, 0.0025),
        (5_000, 1_000_000, 0.005),
        (85, 200, 0.3),
    ] {
        let own = binom_cdf(k, n, p(prob)).unwrap().value();
        let oracle = oracle_cdf(k, n, prob);
        assert!((own - oracle).abs() <= 1e-9, "k {k} n {n} p {prob}: {own} vs {oracle}");
    }
}

#[test]
fn saturation_and_zero() {
    let c = cl(0.99);
    assert_eq!(cp_upper(7, 7, c).unwrap().value(), 1.0);
    assert_eq!(cp_lower(0, 7, c).unwrap().value(), 0.0);
    // cp_upper(0, n) has the closed form 1 - alpha^(1/n).
    let closed = 1.0 - 0.01f64.powf(1.0 / 300.0);
    assert!((cp_upper(0, 300, c).unwrap().value() - closed).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn upper_strictly_increasing_in_k(n in 2..3000u64, frac in 0.0..1.0f64, level in 0.5..0.99999f64) {
        let k = ((n - 1) as f64 * frac) as u64;
        let c = cl(level);
        prop_assert!(cp_upper(k, n, c).unwrap() < cp_upper(k + 1, n, c).unwrap());
        prop_assert!(cp_lower(k, n, c).unwrap() < cp_lower(k + 1, n, c).unwrap());
    }

    #[test]
    fn upper_non_increasing_in_n(n in 1..3000u64, frac in 0.0..=1.0f64, level in 0.5..0.99999f64) {
        let k = (n as f64 * frac) as u64;
        let c = cl(level);
        prop_assert!(cp_upper(k, n + 1, c).unwrap() <= cp_upper(k, n, c).unwrap());
        prop_assert!(cp_lower(k, n + 1, c).unwrap() <= cp_lower(k, n, c).unwrap());
    }

    #[test]
    fn upper_strictly_increasing_in_cl(n in 1..3000u64, frac in 0.0..1.0f64, a in 0.5..0.999f64, gap in 1e-4..0.0009f64) {
        let k = ((n - 1) as f64 * frac).min((n - 1) as f64) as u64;
        let (lo, hi) = (cl(a), cl(a + gap));
        prop_assert!(cp_upper(k, n, lo).unwrap() < cp_upper(k, n, hi).unwrap());
        prop_assert!(cp_lower(k + 1, n, lo).unwrap() > cp_lower(k + 1, n, hi).unwrap());
    }

    #[test]
    fn upper_is_the_tail_root(n in 1..5000u64, frac in 0.0..1.0f64, level in 0.8..0.99999f64) {
        let k = ((n - 1) as f64 * frac) as u64;
        let u = cp_upper(k, n, cl(level)).unwrap().value();
        let residual = oracle_cdf(k, n, u) - (1.0 - level);
        prop_assert!(residual.abs() <= 1e-9, "residual {residual:e}");
    }

    #[test]
    fn max_failures_brackets_the_threshold(n in 10..200_000u64, t in 1e-4..0.05f64, level in 0.9..0.99999f64) {
        let c = cl(level);
        match max_acceptable_failures(n, c, p(t)).unwrap() {
            Some(k) => {
                prop_assert!(cp_upper(k, n, c).unwrap().value() <= t);
                if k < n {
                    prop_assert!(t < cp_upper(k + 1, n, c).unwrap().value());
                }
            }
            None => prop_assert!(cp_upper(0, n, c).unwrap().value() > t),
        }
    }

    #[test]
    fn min_sample_size_is_a_boundary(rate in 0.0..0.001f64, t in 0.002..0.02f64, level in 0.9..0.9999f64) {
        let c = cl(level);
        let n = min_sample_size(p(rate), c, p(t), 100_000_000).unwrap().expect("rate below threshold");
        let passes = |m: u64| {
            let k = (rate * m as f64).round() as u64;
            cp_upper(k, m, c).unwrap().value() <= t
        };
        prop_assert!(passes(n));
        prop_assert!(n == 1 || !passes(n - 1));
    }
}
