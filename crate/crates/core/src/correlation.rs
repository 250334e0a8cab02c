//! Monte Carlo estimates of integrated correlation quantities: product
//! moments of window counts, partially and fully truncated correlations,
//! and power-law fits of their decay.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::carousel::{run_family, FreezeCriterion, Schedule};
use crate::combinatorics::mobius_truncation_weights;
use crate::error::{invalid, Error, Result};
use crate::estimate::{CorrelationEstimate, EstimatorTag, MomentAccumulator};
use crate::noise::NoiseStream;
use crate::oracles::windows_overlap;
use crate::parallel::{map_chunks, replicate_seed};
use crate::params::BetaParams;

pub const MAX_TRUNCATED_K: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Disjoint intervals `[start, start + length]` on one side of the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalCluster {
    intervals: Vec<(f64, f64)>,
    side: Side,
}

impl IntervalCluster {
    /// Left clusters must lie in `(-∞, 0]`, right clusters in `[0, ∞)`.
    pub fn new(intervals: Vec<(f64, f64)>, side: Side) -> Result<Self> {
        if intervals.is_empty() {
            return Err(invalid("a cluster needs at least one interval"));
        }
        for &(s, l) in &intervals {
            if !(s.is_finite() && l.is_finite() && l > 0.0) {
                return Err(invalid(format!("interval ({s}, {l}) needs a finite start and positive length")));
            }
            let ok = match side {
                Side::Left => s + l <= 0.0,
                Side::Right => s >= 0.0,
            };
            if !ok {
                return Err(invalid(format!("interval starting at {s} is on the wrong side of the origin")));
            }
        }
        check_disjoint(&Self::to_windows(&intervals, 0.0))?;
        Ok(Self { intervals, side })
    }

    /// Reject intervals longer than `cap`.
    pub fn with_length_cap(self, cap: f64) -> Result<Self> {
        if self.intervals.iter().any(|(_, l)| *l > cap) {
            return Err(invalid(format!("interval longer than the cap {cap}")));
        }
        Ok(self)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    fn to_windows(intervals: &[(f64, f64)], shift: f64) -> Vec<(f64, f64)> {
        intervals.iter().map(|(s, l)| (s + shift, s + l + shift)).collect()
    }

    /// Intervals as `(a, b)` windows after shifting by `shift`.
    pub fn windows(&self, shift: f64) -> Vec<(f64, f64)> {
        Self::to_windows(&self.intervals, shift)
    }
}

/// A left cluster and a right cluster; the right one is shifted by `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPair {
    pub left: IntervalCluster,
    pub right: IntervalCluster,
}

impl ClusterPair {
    pub fn new(left: IntervalCluster, right: IntervalCluster) -> Result<Self> {
        if left.side != Side::Left || right.side != Side::Right {
            return Err(invalid("cluster pair needs a left and a right cluster"));
        }
        Ok(Self { left, right })
    }

    /// Windows of both clusters with the right one shifted by `r >= 0`.
    pub fn windows(&self, r: f64) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid(format!("shift r must be non-negative, got {r}")));
        }
        let l = self.left.windows(0.0);
        let rt = self.right.windows(r);
        check_disjoint(&[l.clone(), rt.clone()].concat())?;
        Ok((l, rt))
    }

    pub fn k(&self) -> usize {
        self.left.len() + self.right.len()
    }
}

/// Error unless all windows are proper intervals with pairwise overlap of
/// zero length.
pub fn check_disjoint(windows: &[(f64, f64)]) -> Result<()> {
    for (i, a) in windows.iter().enumerate() {
        if !(a.0.is_finite() && a.1.is_finite() && a.1 > a.0) {
            return Err(invalid(format!("window {a:?} is not a proper interval")));
        }
        for b in &windows[..i] {
            if windows_overlap(*a, *b) {
                return Err(invalid(format!("windows {b:?} and {a:?} overlap")));
            }
        }
    }
    Ok(())
}

/// Window counts of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub counts: Vec<i64>,
    pub frozen: bool,
}

/// Source of joint window counts. One replicate may consist of several
/// draws (an antithetic pair); statistics are averaged over them.
pub trait CountSampler: Sync {
    type Plan: Sync;
    fn plan(&self, windows: &[(f64, f64)]) -> Result<Self::Plan>;
    fn draws(&self, plan: &Self::Plan, seed: u64) -> Result<Vec<Draw>>;
}

/// Counts from one carousel family per draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarouselSampler {
    pub params: BetaParams,
    pub criterion: FreezeCriterion,
    /// Pair each seed's noise `W` with its mirror `-conj(W)`.
    pub antithetic: bool,
    /// Step override; the default depends on the window span.
    pub step: Option<f64>,
}

impl CarouselSampler {
    pub fn new(params: BetaParams) -> Self {
        Self { params, criterion: FreezeCriterion::default(), antithetic: true, step: None }
    }

    pub fn plain(params: BetaParams) -> Self {
        Self { antithetic: false, ..Self::new(params) }
    }
}

/// Family layout for a set of windows: endpoints are translated so the
/// leftmost sits at 0, which the carousel counts from.
#[derive(Clone, Debug)]
pub struct CarouselPlan {
    pub lambdas: Vec<f64>,
    /// Family index of each window's endpoints; `None` marks the origin.
    ends: Vec<(Option<usize>, Option<usize>)>,
    pub schedule: Schedule,
}

impl CountSampler for CarouselSampler {
    type Plan = CarouselPlan;

    fn plan(&self, windows: &[(f64, f64)]) -> Result<CarouselPlan> {
        check_disjoint(windows)?;
        let origin = windows.iter().map(|w| w.0).fold(f64::INFINITY, f64::min);
        let mut lambdas: Vec<f64> = windows
            .iter()
            .flat_map(|w| [w.0 - origin, w.1 - origin])
            .filter(|x| *x > 0.0)
            .collect();
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        let index = |x: f64| {
            let y = x - origin;
            if y == 0.0 {
                None
            } else {
                lambdas.iter().position(|l| *l == y)
            }
        };
        let ends = windows.iter().map(|w| (index(w.0), index(w.1))).collect();
        let span = *lambdas.last().unwrap();
        let mut schedule = Schedule::for_span(&self.params, span, self.criterion);
        if let Some(step) = self.step {
            let t_max = schedule.step * schedule.max_steps as f64;
            schedule = schedule.with_step(step, t_max);
        }
        schedule.validate()?;
        Ok(CarouselPlan { lambdas, ends, schedule })
    }

    fn draws(&self, plan: &CarouselPlan, seed: u64) -> Result<Vec<Draw>> {
        let mirrors: &[bool] = if self.antithetic { &[false, true] } else { &[false] };
        mirrors
            .iter()
            .map(|&mirrored| {
                let noise = if mirrored {
                    NoiseStream::mirrored(seed, plan.schedule.step)
                } else {
                    NoiseStream::new(seed, plan.schedule.step)
                };
                let out = run_family(&self.params, &plan.lambdas, noise, seed, &plan.schedule)?;
                let c = out.counts();
                let at = |i: Option<usize>| i.map_or(0, |i| c[i]);
                Ok(Draw {
                    counts: plan.ends.iter().map(|(a, b)| at(*b) - at(*a)).collect(),
                    frozen: out.all_frozen(),
                })
            })
            .collect()
    }
}

/// Independent Poisson counts with mean `intensity × length` per window; a
/// null model with vanishing truncated correlations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonMock {
    pub intensity: f64,
}

impl CountSampler for PoissonMock {
    type Plan = Vec<f64>;

    fn plan(&self, windows: &[(f64, f64)]) -> Result<Vec<f64>> {
        check_disjoint(windows)?;
        if !(self.intensity > 0.0) {
            return Err(invalid("intensity must be positive"));
        }
        Ok(windows.iter().map(|w| self.intensity * (w.1 - w.0)).collect())
    }

    fn draws(&self, means: &Vec<f64>, seed: u64) -> Result<Vec<Draw>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = means
            .iter()
            .map(|m| {
                let d = Poisson::new(*m).map_err(|e| invalid(e.to_string()))?;
                Ok(d.sample(&mut rng) as i64)
            })
            .collect::<Result<_>>()?;
        Ok(vec![Draw { counts, frozen: true }])
    }
}

/// Draws of replicates `range` in index order.
pub fn sample_draws<S: CountSampler>(
    sampler: &S,
    windows: &[(f64, f64)],
    range: Range<u64>,
    seed0: u64,
    workers: usize,
) -> Result<Vec<Vec<Draw>>> {
    let plan = sampler.plan(windows)?;
    let chunks = map_chunks(range, workers, |r| {
        r.map(|i| sampler.draws(&plan, replicate_seed(seed0, i))).collect::<Result<Vec<_>>>()
    })?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Where the factors of multi-block partition terms are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPlan {
    /// Every moment from the same replicates `0..n`.
    Shared,
    /// The joint moment from replicates `0..n`; the `l`-th block of every
    /// split partition from the `l`-th of `m` equal sub-blocks of `n..2n`.
    SplitMarginals,
}

impl SeedPlan {
    /// Replicate ranges: the joint block, then one range per variable when
    /// marginals are split.
    pub fn ranges(&self, n: u64, m: usize) -> Vec<Range<u64>> {
        let mut out = vec![0..n];
        if *self == SeedPlan::SplitMarginals {
            let m64 = m as u64;
            out.extend((0..m64).map(|l| n + l * n / m64..n + (l + 1) * n / m64));
        }
        out
    }
}

/// Accumulated subset-product statistics of `m` variables for every replicate
/// group of a seed plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationAccumulator {
    pub m: usize,
    pub plan: SeedPlan,
    pub groups: Vec<MomentAccumulator>,
    pub unfrozen: u64,
}

impl TruncationAccumulator {
    /// Merge accumulators of disjoint replicate sets, group by group.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.m != other.m || self.plan != other.plan {
            return Err(invalid("cannot merge accumulators of different designs"));
        }
        Ok(Self {
            m: self.m,
            plan: self.plan,
            groups: self.groups.iter().zip(&other.groups).map(|(a, b)| a.merge(b)).collect(),
            unfrozen: self.unfrozen + other.unfrozen,
        })
    }

    /// Joint cumulant of the `m` variables with a delta-method standard error
    /// that accounts for the covariance of all subset products.
    pub fn cumulant(&self, tag: EstimatorTag) -> Result<CorrelationEstimate> {
        let dim = (1usize << self.m) - 1;
        let mut grads = vec![vec![0.0; dim]; self.groups.len()];
        let mut value = 0.0;
        for (p, w) in mobius_truncation_weights(self.m)? {
            let w = w as f64;
            let masks = p.block_masks();
            let source: Vec<usize> = if masks.len() == 1 || self.plan == SeedPlan::Shared {
                vec![0; masks.len()]
            } else {
                (1..=masks.len()).collect()
            };
            let vals: Vec<f64> =
                masks.iter().zip(&source).map(|(b, g)| self.groups[*g].mean()[*b as usize - 1]).collect();
            value += w * vals.iter().product::<f64>();
            for l in 0..masks.len() {
                let others: f64 = vals.iter().enumerate().filter(|(i, _)| *i != l).map(|(_, v)| v).product();
                grads[source[l]][masks[l] as usize - 1] += w * others;
            }
        }
        let var: f64 = self.groups.iter().zip(&grads).map(|(g, d)| g.projected_mean_variance(d)).sum();
        let n = self.groups[0].count();
        Ok(CorrelationEstimate::new(value, var.sqrt(), n, tag, self.unfrozen))
    }
}

/// Subset products `Π_{i ∈ mask} X_i` averaged over the draws of one
/// replicate, for masks `1..2^m`.
fn subset_products(draws: &[Draw], variables: &[Vec<usize>]) -> Vec<f64> {
    let m = variables.len();
    let mut out = vec![0.0; (1 << m) - 1];
    for d in draws {
        let x: Vec<f64> = variables.iter().map(|v| v.iter().map(|w| d.counts[*w] as f64).product()).collect();
        for mask in 1..(1usize << m) {
            let p: f64 = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| x[i]).product();
            out[mask - 1] += p;
        }
    }
    let k = draws.len() as f64;
    out.iter_mut().for_each(|v| *v /= k);
    out
}

/// Simulate a design: variables are products of window counts, given as
/// lists of window indices.
pub fn accumulate_truncation<S: CountSampler>(
    sampler: &S,
    windows: &[(f64, f64)],
    variables: &[Vec<usize>],
    n: u64,
    seed0: u64,
    plan: SeedPlan,
    workers: usize,
) -> Result<TruncationAccumulator> {
    let m = variables.len();
    if m == 0 || m > MAX_TRUNCATED_K {
        return Err(Error::PartitionExplosion { k: m, max: MAX_TRUNCATED_K });
    }
    if variables.iter().flatten().any(|w| *w >= windows.len()) {
        return Err(invalid("variable refers to a missing window"));
    }
    if n < m as u64 || n < 2 {
        return Err(invalid(format!("need at least max(2, {m}) samples, got {n}")));
    }
    let sampler_plan = sampler.plan(windows)?;
    let dim = (1usize << m) - 1;
    let groups = plan
        .ranges(n, m)
        .into_iter()
        .map(|range| {
            let parts = map_chunks(range, workers, |r| {
                let mut acc = MomentAccumulator::new(dim);
                let mut unfrozen = 0u64;
                for i in r {
                    let draws = sampler.draws(&sampler_plan, replicate_seed(seed0, i))?;
                    if draws.iter().any(|d| !d.frozen) {
                        unfrozen += 1;
                    }
                    acc.push(&subset_products(&draws, variables));
                }
                Ok((acc, unfrozen))
            })?;
            Ok(parts
                .into_iter()
                .fold((MomentAccumulator::new(dim), 0u64), |(a, u), (b, v)| (a.merge(&b), u + v)))
        })
        .collect::<Result<Vec<_>>>()?;
    let unfrozen = groups.iter().map(|g| g.1).sum();
    Ok(TruncationAccumulator { m, plan, groups: groups.into_iter().map(|g| g.0).collect(), unfrozen })
}

/// `E[P1 P2]` together with `E[P1]` and `E[P2]` from the same replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductMoment {
    pub joint: CorrelationEstimate,
    pub left: CorrelationEstimate,
    pub right: CorrelationEstimate,
}

fn cluster_variables(n_left: usize, n_right: usize) -> Vec<Vec<usize>> {
    vec![(0..n_left).collect(), (n_left..n_left + n_right).collect()]
}

/// Product moment of the two cluster count products for arbitrary samplers.
pub fn product_moment_with<S: CountSampler>(
    sampler: &S,
    left: &[(f64, f64)],
    right: &[(f64, f64)],
    n: u64,
    seed0: u64,
    workers: usize,
) -> Result<ProductMoment> {
    let windows = [left, right].concat();
    let acc = accumulate_truncation(
        sampler,
        &windows,
        &cluster_variables(left.len(), right.len()),
        n,
        seed0,
        SeedPlan::Shared,
        workers,
    )?;
    let g = &acc.groups[0];
    let tag = EstimatorTag::ProductMoment;
    Ok(ProductMoment {
        joint: CorrelationEstimate::from_mean(g, 2, tag, acc.unfrozen),
        left: CorrelationEstimate::from_mean(g, 0, tag, acc.unfrozen),
        right: CorrelationEstimate::from_mean(g, 1, tag, acc.unfrozen),
    })
}

/// `E[P1 P2] - E[P1] E[P2]` for the two cluster products.
pub fn partially_truncated_with<S: CountSampler>(
    sampler: &S,
    left: &[(f64, f64)],
    right: &[(f64, f64)],
    n: u64,
    seed0: u64,
    plan: SeedPlan,
    workers: usize,
) -> Result<CorrelationEstimate> {
    let windows = [left, right].concat();
    accumulate_truncation(sampler, &windows, &cluster_variables(left.len(), right.len()), n, seed0, plan, workers)?
        .cumulant(EstimatorTag::PartiallyTruncated)
}

/// Joint cumulant of the counts of `k` disjoint windows, i.e. the integral
/// of the truncated `k`-point function over their product.
pub fn fully_truncated_with<S: CountSampler>(
    sampler: &S,
    windows: &[(f64, f64)],
    n: u64,
    seed0: u64,
    plan: SeedPlan,
    workers: usize,
) -> Result<CorrelationEstimate> {
    let k = windows.len();
    if k > MAX_TRUNCATED_K {
        return Err(Error::PartitionExplosion { k, max: MAX_TRUNCATED_K });
    }
    let variables: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    accumulate_truncation(sampler, windows, &variables, n, seed0, plan, workers)?
        .cumulant(EstimatorTag::FullyTruncated)
}

/// [`product_moment_with`] on the carousel with default settings.
pub fn product_moment(
    params: &BetaParams,
    clusters: &ClusterPair,
    r: f64,
    n: u64,
    seed0: u64,
) -> Result<ProductMoment> {
    let (l, rt) = clusters.windows(r)?;
    product_moment_with(&CarouselSampler::new(*params), &l, &rt, n, seed0, 0)
}

/// [`partially_truncated_with`] on the carousel with split marginals.
pub fn partially_truncated(
    params: &BetaParams,
    clusters: &ClusterPair,
    r: f64,
    n: u64,
    seed0: u64,
) -> Result<CorrelationEstimate> {
    let (l, rt) = clusters.windows(r)?;
    partially_truncated_with(&CarouselSampler::new(*params), &l, &rt, n, seed0, SeedPlan::SplitMarginals, 0)
}

/// [`fully_truncated_with`] on the carousel with shared samples.
pub fn fully_truncated(params: &BetaParams, windows: &[(f64, f64)], n: u64, seed0: u64) -> Result<CorrelationEstimate> {
    fully_truncated_with(&CarouselSampler::new(*params), windows, n, seed0, SeedPlan::Shared, 0)
}

/// Weighted least-squares fit of `ln|value|` against `ln r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub slope_err: f64,
    pub intercept: f64,
    /// Values changed sign across `r`; the fit used `|value|`.
    pub oscillating: bool,
}

/// Fit a power law to `(r, estimate)` pairs. Weights are `1/σ²` with
/// `σ = std_err/|value|`; when some standard error is zero the fit is
/// unweighted and the slope error comes from the residuals.
pub fn fit_decay_exponent(points: &[(f64, CorrelationEstimate)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(invalid("need at least three distances"));
    }
    for (r, e) in points {
        if !(*r > 0.0) || e.value == 0.0 || !(e.std_err < e.value.abs() / 3.0) {
            return Err(invalid(format!(
                "estimate at r = {r} too noisy for a log fit: value {}, std_err {}",
                e.value, e.std_err
            )));
        }
    }
    let oscillating = points.windows(2).any(|w| w[0].1.value.signum() != w[1].1.value.signum());
    let xs: Vec<f64> = points.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.value.abs().ln()).collect();
    let weighted = points.iter().all(|(_, e)| e.std_err > 0.0);
    let ws: Vec<f64> = points
        .iter()
        .map(|(_, e)| if weighted { (e.value / e.std_err).powi(2) } else { 1.0 })
        .collect();
    let s: f64 = ws.iter().sum();
    let sx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * x).sum();
    let sy: f64 = ws.iter().zip(&ys).map(|(w, y)| w * y).sum();
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = ws.iter().zip(xs.iter().zip(&ys)).map(|(w, (x, y))| w * x * y).sum();
    let det = s * sxx - sx * sx;
    if det <= 0.0 {
        return Err(invalid("distances must not all coincide"));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope_err = if weighted {
        (s / det).sqrt()
    } else {
        let n = xs.len() as f64;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2.0) * s / det).sqrt()
    };
    Ok(DecayFit { slope, slope_err, intercept, oscillating })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(v: f64, se: f64) -> CorrelationEstimate {
        CorrelationEstimate::new(v, se, 100, EstimatorTag::PartiallyTruncated, 0)
    }

    #[test]
    fn cluster_validation() {
        assert!(IntervalCluster::new(vec![(-1.0, 1.0)], Side::Left).is_ok());
        assert!(IntervalCluster::new(vec![(-1.0, 2.0)], Side::Left).is_err());
        assert!(IntervalCluster::new(vec![(0.0, 1.0), (0.5, 1.0)], Side::Right).is_err());
        assert!(IntervalCluster::new(vec![(0.0, 1.0), (1.0, 1.0)], Side::Right).is_ok());
        let c = IntervalCluster::new(vec![(0.0, 2.0)], Side::Right).unwrap();
        assert!(c.with_length_cap(1.0).is_err());
    }

    #[test]
    fn overlapping_windows_rejected() {
        assert!(check_disjoint(&[(0.0, 1.0), (0.0, 1.0)]).is_err());
        let p = BetaParams::new(2.0).unwrap();
        let s = CarouselSampler::new(p);
        assert!(partially_truncated_with(&s, &[(0.0, 1.0)], &[(0.5, 1.5)], 10, 0, SeedPlan::Shared, 1).is_err());
    }

    #[test]
    fn carousel_plan_translates_to_origin() {
        let p = BetaParams::new(2.0).unwrap();
        let plan = CarouselSampler::new(p).plan(&[(-1.0, 0.0), (3.0, 4.0)]).unwrap();
        assert_eq!(plan.lambdas, vec![1.0, 4.0, 5.0]);
        assert_eq!(plan.ends, vec![(None, Some(0)), (Some(1), Some(2))]);
    }

    #[test]
    fn seed_plan_ranges() {
        assert_eq!(SeedPlan::Shared.ranges(10, 3), vec![0..10]);
        assert_eq!(SeedPlan::SplitMarginals.ranges(10, 3), vec![0..10, 10..13, 13..16, 16..20]);
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0, 2.0, 4.0, 8.0].iter().map(|r: &f64| (*r, est(r.powi(-2), 0.0))).collect();
        let fit = fit_decay_exponent(&pts).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!(fit.slope_err < 1e-10);
        assert!(!fit.oscillating);
    }

    #[test]
    fn sign_changes_flag_oscillation() {
        let pts = vec![(1.0, est(1.0, 0.1)), (2.0, est(-0.5, 0.05)), (4.0, est(0.25, 0.02))];
        let fit = fit_decay_exponent(&pts).unwrap();
        assert!(fit.oscillating);
        assert!((fit.slope + 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_points_rejected() {
        let pts = vec![(1.0, est(1.0, 0.5)), (2.0, est(0.5, 0.05)), (4.0, est(0.25, 0.02))];
        assert!(fit_decay_exponent(&pts).is_err());
        assert!(fit_decay_exponent(&pts[1..]).is_err());
    }

    #[test]
    fn too_many_windows() {
        let w: Vec<_> = (0..9).map(|i| (i as f64, i as f64 + 0.5)).collect();
        let m = PoissonMock { intensity: 1.0 };
        assert!(matches!(
            fully_truncated_with(&m, &w, 10, 0, SeedPlan::Shared, 1),
            Err(Error::PartitionExplosion { .. })
        ));
    }
}
