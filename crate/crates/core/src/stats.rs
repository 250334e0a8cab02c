//! Distribution comparisons used by the property checks.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};

/// Two-sample Kolmogorov–Smirnov statistic and its asymptotic p-value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // The alternating series converges slowly here; the survival is 1
        // to double precision.
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample KS test. On discrete data the p-value is conservative.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(invalid("KS samples must be non-empty and free of NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let sq = ne.sqrt();
    let p = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult { statistic: d, p_value: p })
}

/// Empirical pmf of integer samples.
pub fn empirical_pmf(samples: &[i64]) -> BTreeMap<i64, f64> {
    let mut m = BTreeMap::new();
    for s in samples {
        *m.entry(*s).or_insert(0.0) += 1.0;
    }
    let n = samples.len() as f64;
    m.values_mut().for_each(|v| *v /= n);
    m
}

/// Total-variation distance `½ Σ |p̂(k) - q(k)|` between the empirical pmf of
/// non-negative integer samples and a reference pmf on `0..=k_max`; reference
/// mass beyond `k_max` counts as missed.
pub fn tv_to_pmf(samples: &[i64], reference: impl Fn(u64) -> f64, k_max: u64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    let emp = empirical_pmf(samples);
    let mut tv = 0.0;
    let mut covered = 0.0;
    for k in 0..=k_max {
        let q = reference(k);
        covered += q;
        tv += (emp.get(&(k as i64)).copied().unwrap_or(0.0) - q).abs();
    }
    tv += emp.iter().filter(|(k, _)| **k < 0 || **k > k_max as i64).map(|(_, p)| p).sum::<f64>();
    tv += (1.0 - covered).max(0.0);
    Ok(0.5 * tv)
}

/// Total-variation distance between the binned empirical laws of two 2-D
/// samples on a common `bins × bins` grid over `[-half_width, half_width]²`
/// (points outside fall into the border bins).
pub fn binned_tv_2d(a: &[(f64, f64)], b: &[(f64, f64)], bins: usize, half_width: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() || bins == 0 || !(half_width > 0.0) {
        return Err(invalid("need non-empty samples, bins > 0 and a positive width"));
    }
    let cell = |x: f64| {
        let u = ((x + half_width) / (2.0 * half_width) * bins as f64).floor();
        u.clamp(0.0, (bins - 1) as f64) as usize
    };
    let hist = |s: &[(f64, f64)]| {
        let mut h = vec![0.0; bins * bins];
        for (x, y) in s {
            h[cell(*x) * bins + cell(*y)] += 1.0 / s.len() as f64;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    Ok(0.5 * ha.iter().zip(&hb).map(|(p, q)| (p - q).abs()).sum::<f64>())
}

/// Mean and standard error of a sample.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (v / n).sqrt())
}
