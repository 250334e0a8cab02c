//! Mergeable moment accumulators and Monte Carlo estimates.

use serde::{Deserialize, Serialize};

/// Running mean and co-moment matrix of a vector statistic.
///
/// Updates follow Welford; merges follow the pairwise formula of Chan,
/// Golub and LeVeque, so accumulating disjoint blocks and merging them gives
/// the pooled moments up to rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    n: u64,
    mean: Vec<f64>,
    /// Row-major `d × d` sum of centred cross products.
    comoment: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![0.0; dim], comoment: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        assert_eq!(x.len(), d, "statistic dimension mismatch");
        self.n += 1;
        let nf = self.n as f64;
        let before: Vec<f64> = x.iter().zip(&self.mean).map(|(xi, m)| xi - m).collect();
        for (m, b) in self.mean.iter_mut().zip(&before) {
            *m += b / nf;
        }
        for a in 0..d {
            let after = x[a] - self.mean[a];
            for b in 0..d {
                self.comoment[a * d + b] += after * before[b];
            }
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "statistic dimension mismatch");
        if self.n == 0 {
            return other.clone();
        }
        if other.n == 0 {
            return self.clone();
        }
        let d = self.dim();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, dl)| a + dl * nb / n).collect();
        let mut comoment = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                comoment[a * d + b] = self.comoment[a * d + b]
                    + other.comoment[a * d + b]
                    + delta[a] * delta[b] * na * nb / n;
            }
        }
        Self { n: self.n + other.n, mean, comoment }
    }

    /// Unbiased sample covariance entry.
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let d = self.dim();
        0.5 * (self.comoment[a * d + b] + self.comoment[b * d + a]) / (self.n - 1) as f64
    }

    pub fn variance(&self, a: usize) -> f64 {
        self.covariance(a, a).max(0.0)
    }

    pub fn std_err(&self, a: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance(a) / self.n as f64).sqrt()
    }

    /// Variance of the mean projected on `grad`, `gradᵀ Σ grad / n`.
    pub fn projected_mean_variance(&self, grad: &[f64]) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let d = self.dim();
        let mut v = 0.0;
        for a in 0..d {
            for b in 0..d {
                v += grad[a] * grad[b] * self.covariance(a, b);
            }
        }
        (v / self.n as f64).max(0.0)
    }
}

/// Which integrated correlation an estimate targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    ProductMoment,
    PartiallyTruncated,
    FullyTruncated,
    /// Plain mean of a scalar statistic (counts, variances, rates).
    Mean,
}

impl EstimatorTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ProductMoment => "product_moment",
            Self::PartiallyTruncated => "partially_truncated",
            Self::FullyTruncated => "fully_truncated",
            Self::Mean => "mean",
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub estimator_tag: EstimatorTag,
    /// Replicates whose family never met the freeze rule.
    pub unfrozen: u64,
    /// Set when more than 1% of replicates were unfrozen.
    pub quality_warning: bool,
}

impl CorrelationEstimate {
    pub fn new(value: f64, std_err: f64, n_samples: u64, estimator_tag: EstimatorTag, unfrozen: u64) -> Self {
        Self {
            value,
            std_err,
            n_samples,
            estimator_tag,
            unfrozen,
            quality_warning: unfrozen as f64 > 0.01 * n_samples as f64,
        }
    }

    /// Estimate of the mean of statistic `a` of an accumulator.
    pub fn from_mean(acc: &MomentAccumulator, a: usize, tag: EstimatorTag, unfrozen: u64) -> Self {
        Self::new(acc.mean()[a], acc.std_err(a), acc.count(), tag, unfrozen)
    }

    /// Pool two sample-mean estimates from disjoint seed ranges. Exact for
    /// estimates whose value is a plain sample mean and whose standard error
    /// is `s / sqrt(n)` with the unbiased sample deviation `s`.
    pub fn merge_means(&self, other: &Self) -> Self {
        let (na, nb) = (self.n_samples as f64, other.n_samples as f64);
        if self.n_samples == 0 {
            return other.clone();
        }
        if other.n_samples == 0 {
            return self.clone();
        }
        let n = na + nb;
        let ss = |e: &Self, k: f64| e.std_err * e.std_err * k * (k - 1.0);
        let delta = other.value - self.value;
        let m2 = ss(self, na) + ss(other, nb) + delta * delta * na * nb / n;
        let value = self.value + delta * nb / n;
        let std_err = if n > 1.0 { (m2 / (n - 1.0) / n).sqrt() } else { 0.0 };
        Self::new(value, std_err, self.n_samples + other.n_samples, self.estimator_tag, self.unfrozen + other.unfrozen)
    }

    /// `|value - target| <= k * sqrt(std_err² + extra²)`.
    pub fn agrees_with(&self, target: f64, k: f64, extra_err: f64) -> bool {
        (self.value - target).abs() <= k * (self.std_err.powi(2) + extra_err.powi(2)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_two_pass() {
        let xs: Vec<[f64; 2]> = (0..50).map(|i| [(i as f64).sin(), (i as f64 * 0.3).cos() + i as f64]).collect();
        let mut acc = MomentAccumulator::new(2);
        for x in &xs {
            acc.push(x);
        }
        let n = xs.len() as f64;
        let m0 = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let m1 = xs.iter().map(|x| x[1]).sum::<f64>() / n;
        let c01 = xs.iter().map(|x| (x[0] - m0) * (x[1] - m1)).sum::<f64>() / (n - 1.0);
        assert!((acc.mean()[0] - m0).abs() < 1e-14);
        assert!((acc.covariance(0, 1) - c01).abs() < 1e-12);
    }

    #[test]
    fn merge_means_matches_pooled() {
        let data: Vec<f64> = (0..30).map(|i| (i as f64 * 1.7).sin() * 3.0).collect();
        let est = |xs: &[f64]| {
            let mut a = MomentAccumulator::new(1);
            xs.iter().for_each(|x| a.push(&[*x]));
            CorrelationEstimate::from_mean(&a, 0, EstimatorTag::Mean, 0)
        };
        let pooled = est(&data);
        let merged = est(&data[..11]).merge_means(&est(&data[11..]));
        assert!((pooled.value - merged.value).abs() < 1e-12);
        assert!((pooled.std_err - merged.std_err).abs() < 1e-12);
    }

    #[test]
    fn quality_warning_threshold() {
        assert!(!CorrelationEstimate::new(0.0, 0.0, 1000, EstimatorTag::Mean, 10).quality_warning);
        assert!(CorrelationEstimate::new(0.0, 0.0, 1000, EstimatorTag::Mean, 11).quality_warning);
    }
}
