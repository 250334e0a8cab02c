//! Gaussian coupling: Hellinger distances, determinant bounds, spectral
//! regularization and the increment coupling of separated points.

use std::f64::consts::SQRT_2;

use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sinebeta_core::coupling::{
    default_epsilon, determinant_ratio_bounds, hellinger_complex_gaussian, hellinger_coupled_pair,
    increment_covariance, log_hellinger_affinity, regularized_cross_covariance, small_coupling_bound,
    spectral_regularize, tv_lemma_bound, tv_upper_bound, CovarianceSource, HermitianBlockCov, BINARY_MAGIC,
    SMALL_COUPLING_CONSTANT,
};
use sinebeta_core::error::Error;
use sinebeta_core::linalg::{max_abs, CMatrix};
use sinebeta_core::params::BetaParams;
use sinebeta_core::stats::binned_tv_2d;
use sinebeta_core::validation::hellinger_pair_quadrature;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `G Gᴴ + shift·I` from a flat list of real parts then imaginary parts.
fn hpd(n: usize, xs: &[f64], shift: f64) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |i, j| c(xs[i * n + j], xs[n * n + i * n + j]));
    &g * g.adjoint() + CMatrix::identity(n, n) * c(shift, 0.0)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

#[test]
fn closed_form_matches_radial_quadrature() {
    let (delta, kappa) = (0.1, c(0.05, 0.0));
    let closed = hellinger_coupled_pair(delta, &[kappa]).unwrap();
    let quad = hellinger_pair_quadrature(delta, kappa);
    assert!((closed - quad).abs() < 1e-6, "{closed} vs {quad}");
    let x = HermitianBlockCov::coupled_pair(delta, &[kappa]).unwrap();
    let y = HermitianBlockCov::independent(delta, 2, 1).unwrap();
    assert!((hellinger_complex_gaussian(&x, &y).unwrap() - closed).abs() < 1e-12);
}

#[test]
fn small_coupling_constant_is_one_over_two_root_two() {
    assert!((SMALL_COUPLING_CONSTANT - 0.5 / SQRT_2).abs() < 1e-16);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let delta = rng.random_range(0.01..2.0);
        let n = rng.random_range(1..20);
        let kappas: Vec<Complex64> =
            (0..n).map(|_| Complex64::from_polar(delta * rng.random::<f64>(), rng.random_range(0.0..6.3))).collect();
        let h = hellinger_coupled_pair(delta, &kappas).unwrap();
        assert!(h <= small_coupling_bound(delta, &kappas) * (1.0 + 1e-12));
    }
}

#[test]
fn coupling_at_twice_delta_is_degenerate() {
    assert!(matches!(hellinger_coupled_pair(0.5, &[c(1.0, 0.0)]), Err(Error::DegenerateCovariance(_))));
}

#[test]
fn sylvester_determinant_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (m, n) in [(1, 3), (2, 2), (3, 5), (4, 1)] {
        let a = random_matrix(&mut rng, m, n) * c(0.3, 0.0);
        let b = random_matrix(&mut rng, n, m) * c(0.3, 0.0);
        let lhs = (CMatrix::identity(m, m) - &a * &b).determinant();
        let rhs = (CMatrix::identity(n, n) - &b * &a).determinant();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }
}

#[test]
fn determinant_ratio_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut applicable = 0;
    for i in 0..1000 {
        let (m1, m2) = (1 + i % 3, 1 + (i / 3) % 3);
        let n = m1 + m2;
        let g = random_matrix(&mut rng, n, n) * c(rng.random_range(0.05..0.6), 0.0);
        let k = &g * g.adjoint() + CMatrix::identity(n, n);
        let mut l = k.clone();
        l.view_mut((0, m1), (m1, m2)).fill(c(0.0, 0.0));
        l.view_mut((m1, 0), (m2, m1)).fill(c(0.0, 0.0));
        let d = determinant_ratio_bounds(&k, &l, m1).unwrap();
        let direct = k.determinant().re / l.determinant().re;
        assert!((d.ratio - direct).abs() < 1e-10, "{} vs {direct}", d.ratio);
        assert!(d.ratio <= 1.0 + 1e-12 && d.trace >= -1e-12);
        if d.applicable {
            applicable += 1;
            assert!(d.ratio >= 1.0 - d.trace - 1e-12);
        }
    }
    assert!(applicable > 100);
}

#[test]
fn determinant_ratio_rejects_mismatched_blocks() {
    let k = CMatrix::identity(3, 3);
    let mut l = CMatrix::identity(3, 3);
    l[(0, 0)] = c(2.0, 0.0);
    assert!(determinant_ratio_bounds(&k, &l, 1).is_err());
    assert!(determinant_ratio_bounds(&k, &k, 3).is_err());
}

#[test]
fn regularization_is_identity_without_small_modes() {
    let xs: Vec<f64> = (0..18).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
    let cov = hpd(3, &xs, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raw: Vec<Vec<Complex64>> = (0..50).map(|_| random_matrix(&mut rng, 3, 1).iter().copied().collect()).collect();
    let reg = spectral_regularize(&raw, CovarianceSource::Known(&cov), 0.1, 9).unwrap();
    assert_eq!(reg.cutoff, 3);
    assert_eq!(reg.expected_sq_gap(), 0.0);
    for (a, b) in raw.iter().zip(&reg.samples) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() < 1e-12);
        }
    }
    assert!(max_abs(&(reg.covariance() - &cov)) < 1e-12);
    assert!(max_abs(&(reg.projector() - CMatrix::identity(3, 3))) < 1e-12);
}

#[test]
fn regularized_covariance_has_floor_epsilon() {
    // Two identical coordinates: one mode carries everything, one is null.
    let one = c(1.0, 0.0);
    let cov = CMatrix::from_row_slice(2, 2, &[one, one, one, one]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let raw: Vec<Vec<Complex64>> = (0..20_000)
        .map(|_| {
            let z = c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) / SQRT_2;
            vec![z, z]
        })
        .collect();
    let eps = default_epsilon(2, 10);
    let reg = spectral_regularize(&raw, CovarianceSource::Known(&cov), eps, 3).unwrap();
    assert_eq!(reg.cutoff, 1);
    let mut emp = CMatrix::zeros(2, 2);
    for w in &reg.samples {
        let v = DVector::from_column_slice(w);
        emp += &v * v.adjoint();
    }
    emp /= c(raw.len() as f64, 0.0);
    // Null mode (1, -1)/√2 now has variance ε.
    let u = DVector::from_column_slice(&[c(1.0 / SQRT_2, 0.0), c(-1.0 / SQRT_2, 0.0)]);
    let null_var = (u.adjoint() * &emp * &u)[(0, 0)].re;
    assert!((null_var / eps - 1.0).abs() < 0.05, "{null_var} vs {eps}");
    let gap: f64 = raw
        .iter()
        .zip(&reg.samples)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / raw.len() as f64;
    assert!((gap / reg.expected_sq_gap() - 1.0).abs() < 0.05);
}

#[test]
fn empirical_tv_respects_hellinger_bound() {
    // One step, one coupled pair: compare the joint law of the real parts
    // with its independent counterpart.
    let (delta, kappa) = (0.5, c(0.6, 0.0));
    let x = HermitianBlockCov::coupled_pair(delta, &[kappa]).unwrap();
    let y = HermitianBlockCov::independent(delta, 2, 1).unwrap();
    let bound = tv_upper_bound(&x, &y).unwrap();
    let rho = kappa.re / (2.0 * delta);
    let sd = delta.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut draw = |rho: f64| -> Vec<(f64, f64)> {
        (0..200_000)
            .map(|_| {
                let (g1, g2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                (sd * g1, sd * (rho * g1 + (1.0 - rho * rho).sqrt() * g2))
            })
            .collect()
    };
    let (a, b) = (draw(rho), draw(0.0));
    let tv = binned_tv_2d(&a, &b, 20, 3.0 * sd).unwrap();
    assert!(tv > 0.05, "coupling should be visible: {tv}");
    assert!(tv <= bound, "{tv} > {bound}");
}

#[test]
fn lemma_bound_monotonicity() {
    let base = tv_lemma_bound(1.0, 10, 1.0, 100.0, 2.0);
    assert!(tv_lemma_bound(1.0, 11, 1.0, 100.0, 2.0) > base);
    assert!(tv_lemma_bound(1.0, 10, 1.5, 100.0, 2.0) > base);
    assert!(tv_lemma_bound(1.0, 10, 1.0, 200.0, 2.0) < base);
    assert!((tv_lemma_bound(1.0, 10, 1.0, 200.0, 2.0) * 2.0 - base).abs() < 1e-15);
    assert!(tv_lemma_bound(1.0, 10, 1.0, 100.0, 4.0) > base);
}

#[test]
fn coupling_of_coincident_points_is_exact() {
    let p = BetaParams::new(2.0).unwrap();
    let grid = [0.0, 0.25, 0.5];
    let est = increment_covariance(&p, 0.0, (0.0, 0.0), &grid, 16, 3, Some(0.01)).unwrap();
    for e in &est {
        assert!((e.value - c(2.0 * (e.t1 - e.t0), 0.0)).norm() < 1e-12);
        assert!(e.se_abs() < 1e-12);
    }
}

#[test]
fn coupling_is_bounded_by_step_length() {
    let p = BetaParams::new(4.0).unwrap();
    let grid = [0.1, 0.3, 0.6];
    let est = increment_covariance(&p, 20.0, (0.0, 0.0), &grid, 200, 5, Some(0.01)).unwrap();
    assert_eq!(est.len(), 2);
    for e in &est {
        assert!(e.value.norm() <= 2.0 * (e.t1 - e.t0) + 1e-12);
    }
    assert!(increment_covariance(&p, 1.0, (0.0, 0.0), &[0.5, 0.2], 10, 0, None).is_err());
}

#[test]
fn binary_round_trip() {
    let cov = HermitianBlockCov::coupled_pair(0.3, &[c(0.1, 0.2), c(-0.05, 0.0), c(0.0, -0.3)]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cov.bin");
    cov.save_binary(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], BINARY_MAGIC);
    assert_eq!(bytes.len(), 8 + 16 + 3 * 4 * 16);
    assert_eq!(HermitianBlockCov::load_binary(&path).unwrap(), cov);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(HermitianBlockCov::read_binary(&bad[..]), Err(Error::Format(_))));
    assert!(matches!(HermitianBlockCov::read_binary(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
}

#[test]
fn json_round_trip() {
    let cov = HermitianBlockCov::coupled_pair(0.3, &[c(0.1, 0.2), c(0.0, -0.3)]).unwrap();
    let s = cov.to_json().unwrap();
    assert_eq!(HermitianBlockCov::from_json(&s).unwrap(), cov);
    assert!(HermitianBlockCov::from_json(r#"{"m": 2, "blocks": [[[[1, 0]]]]}"#).is_err());
    // Not Hermitian.
    assert!(HermitianBlockCov::from_json(r#"{"m": 1, "blocks": [[[[1, 1]]]]}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hellinger_is_symmetric_and_block_multiplicative(
        xs in prop::collection::vec(-1.0f64..1.0, 72),
        ys in prop::collection::vec(-1.0f64..1.0, 72),
    ) {
        let bx: Vec<CMatrix> = (0..4).map(|i| hpd(3, &xs[i * 18..(i + 1) * 18], 0.2)).collect();
        let by: Vec<CMatrix> = (0..4).map(|i| hpd(3, &ys[i * 18..(i + 1) * 18], 0.2)).collect();
        let x = HermitianBlockCov::new(bx).unwrap();
        let y = HermitianBlockCov::new(by).unwrap();
        let hxy = hellinger_complex_gaussian(&x, &y).unwrap();
        let hyx = hellinger_complex_gaussian(&y, &x).unwrap();
        prop_assert!((hxy - hyx).abs() < 1e-12);
        prop_assert!(hellinger_complex_gaussian(&x, &x).unwrap() < 1e-7);
        let sx = HermitianBlockCov::new(vec![x.stacked()]).unwrap();
        let sy = HermitianBlockCov::new(vec![y.stacked()]).unwrap();
        let a = log_hellinger_affinity(&x, &y).unwrap();
        let b = log_hellinger_affinity(&sx, &sy).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{} vs {}", a, b);
        prop_assert!((0.0..=1.0).contains(&hxy));
    }

    #[test]
    fn projection_contracts_and_cross_covariance_is_bounded(
        xs in prop::collection::vec(-1.0f64..1.0, 32),
        ys in prop::collection::vec(-1.0f64..1.0, 32),
        cs in prop::collection::vec(-1.0f64..1.0, 32),
        eps in 0.01f64..1.0,
    ) {
        let k = 4;
        let raw = vec![vec![c(1.0, 0.0); k]];
        let first = spectral_regularize(&raw, CovarianceSource::Known(&hpd(k, &xs, 0.0)), eps, 1).unwrap();
        let second = spectral_regularize(&raw, CovarianceSource::Known(&hpd(k, &ys, 0.0)), eps, 2).unwrap();
        let p = first.projector();
        prop_assert!(max_abs(&(&p * &p - &p)) < 1e-10);
        let v = DVector::from_fn(k, |i, _| c(cs[i], cs[k + i]));
        prop_assert!((&p * &v).norm() <= v.norm() * (1.0 + 1e-12));
        let c12 = CMatrix::from_fn(k, k, |i, j| c(cs[i * k + j], cs[16 + i * k + j]));
        let cross = regularized_cross_covariance(&first, &second, &c12);
        prop_assert!(max_abs(&cross) <= k as f64 * max_abs(&c12) + 1e-12);
        let (vals, _) = sinebeta_core::linalg::hermitian_eigen(&first.covariance()).unwrap();
        prop_assert!(vals.iter().all(|l| *l >= eps.min(vals[0]) - 1e-10));
    }
}
