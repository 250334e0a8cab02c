//! Partition combinatorics and β = 2 reference values.

use std::f64::consts::{LN_2, PI, TAU};

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use sinebeta_core::combinatorics::{
    bell, cumulants_from_moments, enumerate_partitions, mobius_truncation_weights, moments_from_cumulants,
    ordered_bell, stirling2,
};
use sinebeta_core::oracles::{
    forrester_haldane_leading, overcrowding_bound, rho2_truncated_beta2, rho2_truncated_beta2_integrated,
    rho_k_beta2, INTENSITY,
};
use sinebeta_core::quad::midpoint_2d;

#[test]
fn factorial_weights_sum_to_twice_ordered_bell() {
    let s: i128 = enumerate_partitions(3).unwrap().map(|p| p.mobius_weight().abs()).sum();
    assert_eq!(s, 6);
    assert_eq!(s as u128, 2 * ordered_bell(2).unwrap());
}

#[test]
fn ordered_bell_asymptotics() {
    let k = 15;
    let fact: f64 = (1..=k).map(f64::from).product();
    let approx = fact / (2.0 * LN_2.powi(k + 1));
    let ratio = ordered_bell(k as usize).unwrap() as f64 / approx;
    assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn partition_statistics_match_stirling_numbers() {
    for k in 1..=10usize {
        let mut by_blocks = vec![0u128; k + 1];
        for p in enumerate_partitions(k).unwrap() {
            by_blocks[p.n_blocks()] += 1;
        }
        for (j, count) in by_blocks.iter().enumerate() {
            assert_eq!(*count, stirling2(k, j).unwrap(), "k {k}, j {j}");
        }
        let total: u128 = by_blocks.iter().sum();
        assert_eq!(total, bell(k).unwrap());
        let ordered: u128 = (0..=k).map(|j| stirling2(k, j).unwrap() * (1..=j as u128).product::<u128>()).sum();
        assert_eq!(ordered, ordered_bell(k).unwrap());
        let abs_weights: i128 = mobius_truncation_weights(k).unwrap().iter().map(|(_, w)| w.abs()).sum();
        let expected: u128 =
            (1..=k).map(|j| stirling2(k, j).unwrap() * (1..j as u128).product::<u128>()).sum();
        assert_eq!(abs_weights as u128, expected);
    }
}

#[test]
fn bell_numbers_up_to_ten() {
    let known = [1u128, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
    for (k, b) in (1..=10).zip(known) {
        assert_eq!(enumerate_partitions(k).unwrap().count() as u128, b);
    }
}

#[test]
fn determinant_form_matches_truncated_formula() {
    let mut x = 0.123_f64;
    for _ in 0..1000 {
        // Deterministic scatter over (0, 60).
        x = (x * 7.31 + 0.577).fract();
        let r = 60.0 * x + 1e-3;
        let det = rho_k_beta2(&[0.0, r]) - INTENSITY * INTENSITY;
        assert!((det - rho2_truncated_beta2(r)).abs() < 1e-12, "r {r}: {det} vs {}", rho2_truncated_beta2(r));
        let fh = forrester_haldane_leading(2.0, r).unwrap().value.unwrap();
        // 1 - cos r cancels for small r, so compare relatively.
        assert!((fh / rho2_truncated_beta2(r) - 1.0).abs() < 1e-9, "r {r}");
    }
}

#[test]
fn adaptive_quadrature_matches_midpoint_refinement() {
    let f = |u: f64, v: f64| rho2_truncated_beta2(u - v);
    for r in [2.0, TAU, 2.0 * TAU, 4.0 * TAU] {
        let (w1, w2) = ((0.0, 1.0), (r, r + 1.0));
        let coarse = midpoint_2d(f, w1, w2, 400);
        let fine = midpoint_2d(f, w1, w2, 800);
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        let adaptive = rho2_truncated_beta2_integrated(w1, w2).unwrap();
        assert!((adaptive - extrapolated).abs() < 1e-8, "r {r}: {adaptive} vs {extrapolated}");
    }
}

#[test]
fn integrated_correlation_decays() {
    let vals: Vec<f64> = (1..=6)
        .map(|m| rho2_truncated_beta2_integrated((0.0, 1.0), (TAU * m as f64, TAU * m as f64 + 1.0)).unwrap())
        .collect();
    assert!(vals.iter().all(|v| *v < 0.0));
    assert!(vals.windows(2).all(|w| w[1].abs() < w[0].abs()));
    assert!((rho2_truncated_beta2(PI) * PI.powi(4) + 1.0).abs() < 1e-14);
}

#[test]
fn overcrowding_decreases_beyond_e_lambda() {
    let lambda = 1.5;
    let first = (lambda * std::f64::consts::E).ceil() as u32;
    let vals: Vec<f64> = (first..first + 10).map(|n| overcrowding_bound(2.0, lambda, n).unwrap().value).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
    let vacuous = overcrowding_bound(2.0, 4.0, 4).unwrap();
    assert_eq!(vacuous.value, 1.0);
    assert!(!vacuous.applicable);
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mobius_round_trip_is_exact(
        k in 1usize..=6,
        nums in prop::collection::vec(-100i64..=100, 64),
        dens in prop::collection::vec(1i64..=30, 64),
    ) {
        let mut m: Vec<BigRational> = (0..1usize << k).map(|i| rational(nums[i], dens[i])).collect();
        m[0] = rational(0, 1);
        let c = cumulants_from_moments(&m, k).unwrap();
        prop_assert_eq!(&moments_from_cumulants(&c, k).unwrap()[1..], &m[1..]);
        let back = cumulants_from_moments(&moments_from_cumulants(&m, k).unwrap(), k).unwrap();
        prop_assert_eq!(&back[1..], &m[1..]);
    }

    #[test]
    fn mobius_round_trip_in_floating_point(k in 1usize..=6, xs in prop::collection::vec(-2.0f64..2.0, 64)) {
        let mut m = xs[..1 << k].to_vec();
        m[0] = 0.0;
        let back = moments_from_cumulants(&cumulants_from_moments(&m, k).unwrap(), k).unwrap();
        for (a, b) in m.iter().zip(&back).skip(1) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn independent_blocks_have_vanishing_joint_cumulant(xs in prop::collection::vec(-2.0f64..2.0, 6)) {
        // Moments of (X1, X2, X3) with X3 independent of (X1, X2):
        // every moment factorizes along {1, 2} | {3}.
        let mut m = vec![0.0; 8];
        let pair = [0.0, xs[0], xs[1], xs[2]];
        let third = [1.0, xs[3]];
        for mask in 1..8usize {
            m[mask] = pair[mask & 3] * third[mask >> 2];
            if mask & 3 == 0 {
                m[mask] = third[1];
            }
        }
        let c = cumulants_from_moments(&m, 3).unwrap();
        prop_assert!(c[7].abs() < 1e-12);
        prop_assert!(c[5].abs() < 1e-12 && c[6].abs() < 1e-12);
    }
}
