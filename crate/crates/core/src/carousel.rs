//! Sine-beta samples from the carousel: counts, point locations by
//! bisection in λ, the log-tangent coordinate and its Girsanov tilt.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Error, Result};
use crate::noise::{NoisePath, NoiseStream};
use crate::params::BetaParams;
use crate::sde::{check_sorted, clamp_ordered, count_from_angle, sine_step, DiffusionTrajectory};

/// When a member of the family counts as frozen: within `tol_angle` of
/// `2πZ` while the remaining drift `|λ| e^{-βt/4}` is below `tol_drift`, for
/// `run_length` consecutive steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreezeCriterion {
    pub tol_angle: f64,
    pub tol_drift: f64,
    pub run_length: usize,
}

impl Default for FreezeCriterion {
    /// Without drift the angle is a martingale, so rounding at offset `x`
    /// from the lattice shifts the expected count by `-E[x]/2π`; the mean
    /// offset at freeze is about `tol_angle / 7`.
    fn default() -> Self {
        Self { tol_angle: 0.01, tol_drift: 1e-3, run_length: 50 }
    }
}

impl FreezeCriterion {
    pub fn new(tol_angle: f64, tol_drift: f64, run_length: usize) -> Result<Self> {
        let c = Self { tol_angle, tol_drift, run_length };
        c.validate()?;
        Ok(c)
    }

    /// Time for the distance to the lattice to fall below `tol_angle` once
    /// the drift has died out. Near `2πk` that distance follows
    /// `d ln x = dB - dt/2`, so `x(t) <= tol_angle` holds except with
    /// probability about 0.1% once `-t/2 + 3 sqrt(t) <= ln tol_angle`.
    pub fn settle_time(&self) -> f64 {
        let z = 3.0;
        (z + (z * z - 2.0 * self.tol_angle.ln()).sqrt()).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_angle > 0.0 && self.tol_angle < PI / 2.0) {
            return Err(invalid(format!("tol_angle must lie in (0, pi/2), got {}", self.tol_angle)));
        }
        if !(self.tol_drift > 0.0 && self.tol_drift.is_finite()) {
            return Err(invalid(format!("tol_drift must be positive, got {}", self.tol_drift)));
        }
        if self.run_length == 0 {
            return Err(invalid("run_length must be at least 1"));
        }
        Ok(())
    }
}

/// Distance from `alpha` to the nearest multiple of 2π.
#[inline]
pub fn distance_to_lattice(alpha: f64) -> f64 {
    let x = alpha / TAU;
    (x - x.round()).abs() * TAU
}

/// Step size, step cap and freeze rule for one integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub step: f64,
    pub max_steps: usize,
    pub criterion: FreezeCriterion,
}

impl Schedule {
    /// Defaults for a family whose largest `|λ|` is `lambda_max`.
    pub fn for_span(params: &BetaParams, lambda_max: f64, criterion: FreezeCriterion) -> Self {
        let step = BetaParams::default_step(lambda_max);
        let t_max = params.max_horizon(lambda_max, criterion.tol_drift) + criterion.settle_time();
        Self { step, max_steps: (t_max / step).ceil() as usize, criterion }
    }

    pub fn with_step(mut self, step: f64, t_max: f64) -> Self {
        self.step = step;
        self.max_steps = (t_max / step).ceil() as usize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.criterion.validate()?;
        if !(self.step > 0.0 && self.step.is_finite()) || self.max_steps == 0 {
            return Err(invalid("schedule needs a positive step and at least one step"));
        }
        Ok(())
    }
}

/// Terminal state of a family integrated until every member froze.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOutcome {
    pub terminal: Vec<f64>,
    pub frozen_at: Vec<Option<usize>>,
    pub stop_step: usize,
    pub step: f64,
    pub clamps: usize,
}

impl FamilyOutcome {
    pub fn counts(&self) -> Vec<i64> {
        self.terminal.iter().map(|a| count_from_angle(*a)).collect()
    }

    pub fn all_frozen(&self) -> bool {
        self.frozen_at.iter().all(Option::is_some)
    }

    pub fn stop_time(&self) -> f64 {
        self.step * self.stop_step as f64
    }
}

/// Integrate a sorted family with the ordering clamp until all members
/// satisfy the freeze rule or the step cap is hit. `observe(j, state, dw)`
/// sees the state at `t_j` and the increment about to be applied.
pub fn run_family_observed<I, O>(
    params: &BetaParams,
    lambdas: &[f64],
    noise: I,
    seed: u64,
    schedule: &Schedule,
    mut observe: O,
) -> Result<FamilyOutcome>
where
    I: IntoIterator<Item = Complex64>,
    O: FnMut(usize, &[f64], Complex64),
{
    check_sorted(lambdas)?;
    let m = lambdas.len();
    let dt = schedule.step;
    let crit = schedule.criterion;
    let shrink = -(-params.rate() * dt).exp_m1();
    let mut state = vec![0.0; m];
    let mut runs = vec![0usize; m];
    let mut frozen_at = vec![None; m];
    let mut n_frozen = 0;
    let mut clamps = 0;
    let mut noise = noise.into_iter();
    let mut j = 0;
    while j < schedule.max_steps && n_frozen < m {
        let dw = noise
            .next()
            .ok_or_else(|| invalid(format!("noise exhausted after {j} steps")))?;
        observe(j, &state, dw);
        let tail = params.tail_mass(dt * j as f64);
        let mass = tail * shrink;
        for (a, l) in state.iter_mut().zip(lambdas) {
            *a = sine_step(*a, l * mass, dw);
        }
        clamps += clamp_ordered(&mut state);
        j += 1;
        let tail_next = params.tail_mass(dt * j as f64);
        for i in 0..m {
            let a = state[i];
            if !a.is_finite() {
                return Err(Error::NumericalFailure { step: j - 1, seed, lambda: lambdas[i] });
            }
            if frozen_at[i].is_some() {
                continue;
            }
            if distance_to_lattice(a) < crit.tol_angle && lambdas[i].abs() * tail_next < crit.tol_drift {
                runs[i] += 1;
                if runs[i] == crit.run_length {
                    frozen_at[i] = Some(j + 1 - crit.run_length);
                    n_frozen += 1;
                }
            } else {
                runs[i] = 0;
            }
        }
    }
    Ok(FamilyOutcome { terminal: state, frozen_at, stop_step: j, step: dt, clamps })
}

/// [`run_family_observed`] without an observer.
pub fn run_family<I: IntoIterator<Item = Complex64>>(
    params: &BetaParams,
    lambdas: &[f64],
    noise: I,
    seed: u64,
    schedule: &Schedule,
) -> Result<FamilyOutcome> {
    run_family_observed(params, lambdas, noise, seed, schedule, |_, _, _| {})
}

/// Frozen count on `(0, λ]` for one seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountOutcome {
    pub count: i64,
    /// False when the freeze rule never held before the step cap.
    pub frozen: bool,
    pub stop_time: f64,
    pub clamps: usize,
}

/// Number of points in `(0, λ]` read off the frozen angle
/// `round(alpha_λ(T) / 2π)`.
pub fn count_points(
    params: &BetaParams,
    lambda: f64,
    seed: u64,
    criterion: &FreezeCriterion,
) -> Result<CountOutcome> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    criterion.validate()?;
    if lambda == 0.0 {
        return Ok(CountOutcome { count: 0, frozen: true, stop_time: 0.0, clamps: 0 });
    }
    let schedule = Schedule::for_span(params, lambda, *criterion);
    let out = run_family(params, &[lambda], NoiseStream::new(seed, schedule.step), seed, &schedule)?;
    Ok(CountOutcome {
        count: out.counts()[0],
        frozen: out.all_frozen(),
        stop_time: out.stop_time(),
        clamps: out.clamps,
    })
}

/// Points of one sample inside the window `(start, end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub window: (f64, f64),
    pub points: Vec<f64>,
    pub seed: u64,
    pub resolution: f64,
    pub stop_time: f64,
    pub frozen: bool,
}

impl PointConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Gaps between consecutive points.
    pub fn gaps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Rows `seed, window_start, window_end, position`, header included.
    pub fn write_csv<W: std::io::Write>(configs: &[PointConfiguration], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["seed", "window_start", "window_end", "position"]).map_err(fmt)?;
        for c in configs {
            for p in &c.points {
                w.write_record([
                    c.seed.to_string(),
                    format!("{:.17e}", c.window.0),
                    format!("{:.17e}", c.window.1),
                    format!("{p:.17e}"),
                ])
                .map_err(fmt)?;
            }
        }
        w.flush().map_err(io_err("<csv writer>"))?;
        Ok(())
    }

    pub fn save_csv(configs: &[PointConfiguration], path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(io_err(path))?;
        Self::write_csv(configs, std::io::BufWriter::new(f))
    }
}

/// Frozen-count oracle on one stored path: integrates a single λ for exactly
/// the stored number of steps.
struct StoredCounter {
    increments: Vec<Complex64>,
    masses: Vec<f64>,
    evaluations: usize,
}

impl StoredCounter {
    fn count(&mut self, lambda: f64) -> i64 {
        self.evaluations += 1;
        let mut a = 0.0;
        for (dw, m) in self.increments.iter().zip(&self.masses) {
            a = sine_step(a, lambda * m, *dw);
        }
        count_from_angle(a)
    }
}

/// Sample the points of `(0, window_length]` with default freeze rule and
/// step.
pub fn sample_configuration(
    params: &BetaParams,
    window_length: f64,
    seed: u64,
    resolution: f64,
) -> Result<PointConfiguration> {
    let schedule = Schedule::for_span(params, window_length, FreezeCriterion::default());
    sample_configuration_with(params, window_length, seed, resolution, &schedule)
}

/// Locate the points by bisection in λ. The window run fixes the number of
/// steps `S`; every query re-integrates exactly `S` steps of the same stored
/// noise, so counts are a deterministic non-decreasing function of λ.
pub fn sample_configuration_with(
    params: &BetaParams,
    window_length: f64,
    seed: u64,
    resolution: f64,
    schedule: &Schedule,
) -> Result<PointConfiguration> {
    if !(window_length > 0.0 && window_length.is_finite()) {
        return Err(invalid(format!("window_length must be positive, got {window_length}")));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(invalid(format!("resolution must be positive, got {resolution}")));
    }
    schedule.validate()?;
    let window = run_family(params, &[window_length], NoiseStream::new(seed, schedule.step), seed, schedule)?;
    let n = window.counts()[0];
    let mut config = PointConfiguration {
        window: (0.0, window_length),
        points: Vec::new(),
        seed,
        resolution,
        stop_time: window.stop_time(),
        frozen: window.all_frozen(),
    };
    if n <= 0 {
        return Ok(config);
    }
    let s = window.stop_step;
    let dt = schedule.step;
    let mut counter = StoredCounter {
        increments: NoiseStream::new(seed, dt).take(s).collect(),
        masses: (0..s).map(|j| params.drift_mass_between(dt * j as f64, dt * (j + 1) as f64)).collect(),
        evaluations: 0,
    };
    let budget = (window_length / resolution).log2().ceil().max(0.0) as usize + 5;
    // Evaluated (λ, count) pairs, kept sorted by λ.
    let mut known: Vec<(f64, i64)> = vec![(0.0, 0), (window_length, n)];
    for j in 1..=n {
        let mut spent = 0;
        loop {
            let lo_idx = known.iter().rposition(|&(_, c)| c < j).unwrap();
            let (lo, c_lo) = known[lo_idx];
            let (hi, c_hi) = known[lo_idx + 1];
            // A narrow bracket still holding two points is split further.
            let crowded = c_hi > j;
            if hi - lo <= resolution && !crowded {
                config.points.push(0.5 * (lo + hi));
                break;
            }
            if spent >= budget {
                return Err(Error::ResolutionFailure { seed });
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Err(Error::ResolutionFailure { seed });
            }
            let c = counter.count(mid);
            spent += 1;
            if c < c_lo || c > c_hi {
                return Err(Error::ResolutionFailure { seed });
            }
            known.insert(lo_idx + 1, (mid, c));
        }
    }
    if config.points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ResolutionFailure { seed });
    }
    Ok(config)
}

/// `ln tan({alpha}_{2π} / 4)`; `-∞` exactly on the lattice `2πZ`.
pub fn log_tangent(alpha: f64) -> f64 {
    let x = alpha.rem_euclid(TAU);
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        (x / 4.0).tan().ln()
    }
}

/// Inverse of [`log_tangent`] on `(0, 2π)`.
pub fn angle_from_log_tangent(r: f64) -> f64 {
    4.0 * r.exp().atan()
}

/// Log-tangent coordinate of one trajectory member on its grid. Infinite
/// entries mark lattice hits; `last_finite[j]` carries the most recent
/// finite value up to `j` (NaN before the first one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogTangentPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub last_finite: Vec<f64>,
}

pub fn log_tangent_path(trajectory: &DiffusionTrajectory, member: usize) -> Result<LogTangentPath> {
    if member >= trajectory.width() {
        return Err(invalid(format!("member {member} out of range")));
    }
    let values: Vec<f64> = trajectory.series(member).into_iter().map(log_tangent).collect();
    let mut last = f64::NAN;
    let last_finite = values
        .iter()
        .map(|v| {
            if v.is_finite() {
                last = *v;
            }
            last
        })
        .collect();
    Ok(LogTangentPath { times: trajectory.times(), values, last_finite })
}

/// Ensemble estimate of the drift of `R` at `(r0, t0)`: the mean of
/// `(R(t0 + h) - r0) / h` over `n_paths` angle paths started at the matching
/// angle, each resolved with `n_sub` steps. Returns `(mean, std_err)`.
pub fn log_tangent_drift_estimate(
    params: &BetaParams,
    lambda: f64,
    r0: f64,
    t0: f64,
    h: f64,
    n_sub: usize,
    n_paths: u64,
    seed0: u64,
) -> Result<(f64, f64)> {
    if n_sub == 0 || n_paths < 2 || h <= 0.0 {
        return Err(invalid("need h > 0, n_sub >= 1 and at least two paths"));
    }
    let a0 = angle_from_log_tangent(r0);
    let dt = h / n_sub as f64;
    let masses: Vec<f64> =
        (0..n_sub).map(|j| lambda * params.drift_mass_between(t0 + dt * j as f64, t0 + dt * (j + 1) as f64)).collect();
    let mut acc = crate::estimate::MomentAccumulator::new(1);
    for i in 0..n_paths {
        let mut a = a0;
        for (dw, m) in NoiseStream::new(seed0 ^ i, dt).zip(&masses) {
            a = sine_step(a, *m, dw);
        }
        let da = a - a0;
        if da.abs() >= TAU {
            return Err(invalid("increment span too long for a local drift estimate"));
        }
        acc.push(&[(log_tangent(a) - r0) / h]);
    }
    Ok((acc.mean()[0], acc.std_err(0)))
}

/// A path of the log-tangent diffusion (or its tilt) with the accumulated
/// log Radon–Nikodym weight of the untilted law against the tilted one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltedPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub log_weight: f64,
    /// Set when `cosh` overflowed and the drift or weight was clamped.
    pub overflow: bool,
}

#[inline]
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[inline]
fn clamped_cosh(x: f64, flag: &mut bool) -> f64 {
    let c = x.cosh();
    if c.is_finite() {
        c
    } else {
        *flag = true;
        f64::MAX
    }
}

fn check_span(t_span: (f64, f64), n_steps: usize) -> Result<()> {
    if !(t_span.0 >= 0.0 && t_span.1 > t_span.0) || n_steps == 0 {
        return Err(invalid("need 0 <= t0 < t1 and at least one step"));
    }
    Ok(())
}

/// Euler path of the tilted diffusion
/// `dR = (λ/2) f cosh R dt - (1/2) tanh R dt + dB` on `t_span`, together with
/// the log weight
/// `ln cosh R(end) - ln cosh R(start) - ½∫(1 - tanh² R) dt - ½∫ λ f cosh R tanh R dt`.
pub fn girsanov_tilted_path(
    params: &BetaParams,
    lambda: f64,
    seed: u64,
    t_span: (f64, f64),
    r_start: f64,
    n_steps: usize,
) -> Result<TiltedPath> {
    check_span(t_span, n_steps)?;
    let dt = (t_span.1 - t_span.0) / n_steps as f64;
    let mut overflow = false;
    let mut r = r_start;
    let mut integral = 0.0;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    times.push(t_span.0);
    values.push(r);
    for (j, dw) in NoiseStream::new(seed, dt).take(n_steps).enumerate() {
        let t = t_span.0 + dt * j as f64;
        let th = r.tanh();
        let lf_cosh = lambda * params.drift(t) * clamped_cosh(r, &mut overflow);
        integral += 0.5 * (1.0 - th * th) * dt + 0.5 * lf_cosh * th * dt;
        r += (0.5 * lf_cosh - 0.5 * th) * dt + dw.re;
        if !r.is_finite() {
            return Err(Error::NumericalFailure { step: j, seed, lambda });
        }
        times.push(t + dt);
        values.push(r);
    }
    let mut log_weight = ln_cosh(r) - ln_cosh(r_start) - integral;
    if !log_weight.is_finite() {
        overflow = true;
        log_weight = log_weight.clamp(-f64::MAX, f64::MAX);
    }
    Ok(TiltedPath { times, values, log_weight, overflow })
}

/// Euler path of the untilted log-tangent diffusion
/// `dR = (λ/2) f cosh R dt + (1/2) tanh R dt + dB`; `log_weight` is zero.
pub fn log_tangent_sde_path(
    params: &BetaParams,
    lambda: f64,
    seed: u64,
    t_span: (f64, f64),
    r_start: f64,
    n_steps: usize,
) -> Result<TiltedPath> {
    check_span(t_span, n_steps)?;
    let dt = (t_span.1 - t_span.0) / n_steps as f64;
    let mut overflow = false;
    let mut r = r_start;
    let mut times = vec![t_span.0];
    let mut values = vec![r];
    for (j, dw) in NoiseStream::new(seed, dt).take(n_steps).enumerate() {
        let t = t_span.0 + dt * j as f64;
        let lf_cosh = lambda * params.drift(t) * clamped_cosh(r, &mut overflow);
        r += (0.5 * lf_cosh + 0.5 * r.tanh()) * dt + dw.re;
        if !r.is_finite() {
            return Err(Error::NumericalFailure { step: j, seed, lambda });
        }
        times.push(t + dt);
        values.push(r);
    }
    Ok(TiltedPath { times, values, log_weight: 0.0, overflow })
}

/// Empirical rate of late jumps: for each horizon `T`, the fraction of
/// seeds with `|alpha_λ(T) - alpha_λ(2T)| > π/2`, with its standard error.
pub fn late_jump_rates(
    params: &BetaParams,
    lambda: f64,
    horizons: &[f64],
    n_paths: u64,
    seed0: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    if horizons.is_empty() || horizons.iter().any(|t| *t <= 0.0) || n_paths < 2 {
        return Err(invalid("need positive horizons and at least two paths"));
    }
    let dt = BetaParams::default_step(lambda);
    let t_last = 2.0 * horizons.iter().cloned().fold(0.0, f64::max);
    let n = (t_last / dt).ceil() as usize;
    let mut marks: Vec<usize> = horizons.iter().flat_map(|t| [(t / dt).round() as usize, (2.0 * t / dt).round() as usize]).collect();
    marks.sort_unstable();
    marks.dedup();
    let masses: Vec<f64> = (0..n).map(|j| lambda * params.drift_mass_between(dt * j as f64, dt * (j + 1) as f64)).collect();
    let per_seed = crate::parallel::map_chunks(0..n_paths, 0, |range| {
        let mut hits = vec![0u64; horizons.len()];
        for i in range {
            let mut seen = vec![0.0; marks.len()];
            let mut a = 0.0;
            let mut next = 0;
            for (j, (dw, m)) in NoiseStream::new(seed0 ^ i, dt).zip(&masses).enumerate() {
                a = sine_step(a, *m, dw);
                while next < marks.len() && marks[next] == j + 1 {
                    seen[next] = a;
                    next += 1;
                }
            }
            for (h, t) in horizons.iter().enumerate() {
                let at = |s: usize| seen[marks.binary_search(&s).unwrap()];
                let j1 = (t / dt).round() as usize;
                let j2 = (2.0 * t / dt).round() as usize;
                if (at(j1) - at(j2)).abs() > PI / 2.0 {
                    hits[h] += 1;
                }
            }
        }
        Ok(hits)
    })?;
    let nf = n_paths as f64;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(h, t)| {
            let k: u64 = per_seed.iter().map(|v| v[h]).sum();
            let p = k as f64 / nf;
            (*t, p, (p * (1.0 - p) / nf).sqrt())
        })
        .collect())
}

/// Number of grid steps at which `alpha` sits more than `tol` below the
/// running maximum of its lattice floor `2π⌊alpha / 2π⌋`.
pub fn floor_violations(series: &[f64], tol: f64) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut violations = 0;
    for &a in series {
        let floor = (a / TAU).floor() * TAU;
        if a < best - tol {
            violations += 1;
        }
        best = best.max(floor);
    }
    violations
}

/// Borrowed noise of a stored path, for [`run_family`].
pub fn path_increments(noise: &NoisePath) -> impl Iterator<Item = Complex64> + '_ {
    noise.increments.iter().copied()
}
