//! Config-driven experiment runner producing results CSV, a manifest and a
//! per-experiment summary.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::carousel::{count_points, FreezeCriterion};
use crate::correlation::{
    fit_decay_exponent, fully_truncated_with, partially_truncated_with, product_moment_with, CarouselSampler,
    ClusterPair, IntervalCluster, SeedPlan, Side,
};
use crate::coupling::{hellinger_complex_gaussian, increment_covariance, HermitianBlockCov};
use crate::error::{io_err, Error, Result};
use crate::estimate::{CorrelationEstimate, MomentAccumulator};
use crate::linalg::CMatrix;
use crate::noise::generate_noise;
use crate::oracles::{overcrowding_bound, rho2_truncated_beta2_integrated};
use crate::parallel::{map_chunks, replicate_seed, CHUNK};
use crate::params::BetaParams;
use crate::sde::{integrate_family, l2_error_bound, self_convergence, Drift, SineDrift};

/// Version of the CSV layouts below; bumped on any column change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

fn two_pi() -> f64 {
    TAU
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn split() -> SeedPlan {
    SeedPlan::SplitMarginals
}
fn unit_stride() -> usize {
    1
}
fn default_t_end() -> f64 {
    1.0
}
fn default_n0() -> usize {
    16
}
fn default_levels() -> u32 {
    6
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPointEstimator {
    ProductMoment,
    PartiallyTruncated,
    FullyTruncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Mean count on `[0, window]`.
    Intensity {
        #[serde(default = "two_pi")]
        window: f64,
    },
    /// Truncated two-point correlation of `[0, w]` and `[r, r + w]`.
    TwoPointDecay {
        #[serde(default = "one")]
        window: f64,
        r_grid: Vec<f64>,
        #[serde(default = "split")]
        seed_plan: SeedPlan,
        #[serde(default = "yes")]
        antithetic: bool,
    },
    /// Cluster correlations; `left` intervals lie in `(-∞, 0]`, `right` in
    /// `[0, ∞)` before the shift `r`. Intervals are `(start, length)`.
    KPoint {
        left: Vec<(f64, f64)>,
        right: Vec<(f64, f64)>,
        r_grid: Vec<f64>,
        estimator: KPointEstimator,
        #[serde(default = "split")]
        seed_plan: SeedPlan,
        #[serde(default = "yes")]
        antithetic: bool,
    },
    /// Tail probabilities `P(N[0, λ] ≥ n)` against the overcrowding envelope.
    Overcrowding { lambda: f64, n_max: u32 },
    /// `α_r(t)` and `cos α_r(t)` along sample paths.
    OscillationTrace {
        r: f64,
        t_end: f64,
        n_steps: usize,
        #[serde(default = "unit_stride")]
        stride: usize,
    },
    /// Terminal gaps between dyadic step sizes.
    EulerConvergence {
        lambda: f64,
        #[serde(default = "default_t_end")]
        t_end: f64,
        #[serde(default = "default_n0")]
        n0: usize,
        #[serde(default = "default_levels")]
        levels: u32,
    },
    /// Per-step increment coupling `κ_j` and the resulting total-variation
    /// bound between coupled and independent increments.
    CouplingTv {
        r: f64,
        #[serde(default)]
        x_shifts: (f64, f64),
        grid: Vec<f64>,
        #[serde(default)]
        substep: Option<f64>,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Intensity { .. } => "intensity",
            Self::TwoPointDecay { .. } => "two_point_decay",
            Self::KPoint { .. } => "k_point",
            Self::Overcrowding { .. } => "overcrowding",
            Self::OscillationTrace { .. } => "oscillation_trace",
            Self::EulerConvergence { .. } => "euler_convergence",
            Self::CouplingTv { .. } => "coupling_tv",
        }
    }

    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            Self::Intensity { .. } => &["beta", "window_start", "window_end", "estimator_tag", "value", "std_err", "n_samples"],
            Self::TwoPointDecay { .. } | Self::KPoint { .. } => {
                &["beta", "r", "k", "k0", "estimator_tag", "value", "std_err", "n_samples"]
            }
            Self::Overcrowding { .. } => &["beta", "lambda", "n", "probability", "std_err", "bound", "n_samples"],
            Self::OscillationTrace { .. } => &["seed", "t", "alpha", "cos_alpha"],
            Self::EulerConvergence { .. } => &["beta", "lambda", "delta", "rms_gap", "rms_bound", "n_samples"],
            Self::CouplingTv { .. } => {
                &["beta", "r", "t0", "t1", "kappa_re", "kappa_im", "kappa_abs", "std_err_abs", "n_samples"]
            }
        }
    }
}

/// A complete, self-describing experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub beta: f64,
    pub n_samples: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; 0 or absent uses every core. Never affects results.
    #[serde(default)]
    pub n_workers: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        BetaParams::new(self.beta).map_err(|e| Error::Config(e.to_string()))?;
        if self.n_samples < 2 {
            return cfg("n_samples must be at least 2".into());
        }
        let grid_ok = |g: &[f64]| !g.is_empty() && g.iter().all(|r| r.is_finite() && *r >= 0.0);
        match &self.experiment {
            Experiment::Intensity { window } if !(*window > 0.0 && window.is_finite()) => {
                cfg(format!("window must be positive, got {window}"))
            }
            Experiment::TwoPointDecay { window, r_grid, .. } => {
                if !(*window > 0.0) || !grid_ok(r_grid) || r_grid.iter().any(|r| r < window) {
                    return cfg("two_point_decay needs window > 0 and every r >= window".into());
                }
                Ok(())
            }
            Experiment::KPoint { left, right, r_grid, .. } => {
                let pair = cluster_pair(left, right).map_err(|e| Error::Config(e.to_string()))?;
                if !grid_ok(r_grid) {
                    return cfg("r_grid must be non-empty and non-negative".into());
                }
                for r in r_grid {
                    pair.windows(*r).map_err(|e| Error::Config(e.to_string()))?;
                }
                if pair.k() > crate::correlation::MAX_TRUNCATED_K {
                    return cfg(format!("k = {} exceeds the partition guard", pair.k()));
                }
                Ok(())
            }
            Experiment::Overcrowding { lambda, n_max } if !(*lambda > 0.0) || *n_max == 0 => {
                cfg("overcrowding needs lambda > 0 and n_max >= 1".into())
            }
            Experiment::OscillationTrace { r, t_end, n_steps, stride } => {
                if !(*r >= 0.0 && *t_end > 0.0) || *n_steps == 0 || *stride == 0 {
                    return cfg("oscillation_trace needs r >= 0, t_end > 0, n_steps > 0, stride > 0".into());
                }
                Ok(())
            }
            Experiment::EulerConvergence { t_end, n0, levels, .. } if !(*t_end > 0.0) || *n0 == 0 || *levels < 2 => {
                cfg("euler_convergence needs t_end > 0, n0 > 0 and levels >= 2".into())
            }
            Experiment::CouplingTv { r, grid, substep, .. } => {
                if !(*r >= 0.0) || grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
                    return cfg("coupling_tv needs r >= 0 and an increasing grid of at least two times".into());
                }
                if substep.is_some_and(|h| !(h > 0.0)) {
                    return cfg("substep must be positive".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn cluster_pair(left: &[(f64, f64)], right: &[(f64, f64)]) -> Result<ClusterPair> {
    ClusterPair::new(
        IntervalCluster::new(left.to_vec(), Side::Left)?,
        IntervalCluster::new(right.to_vec(), Side::Right)?,
    )
}

/// Results of a run, before anything is written.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
    /// Set when the run stopped early; `error` says why.
    pub incomplete: bool,
    pub error: Option<String>,
}

impl ExperimentOutput {
    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&self.columns).map_err(fmt)?;
        for row in &self.rows {
            w.write_record(row).map_err(fmt)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Floats with 17 significant digits, the round-trip precision of `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Rows {
    rows: Vec<Vec<String>>,
}

impl Rows {
    fn push(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

fn estimate_row(beta: f64, r: f64, k: usize, k0: usize, e: &CorrelationEstimate) -> Vec<String> {
    vec![
        fmt_f64(beta),
        fmt_f64(r),
        k.to_string(),
        k0.to_string(),
        e.estimator_tag.as_str().to_string(),
        fmt_f64(e.value),
        fmt_f64(e.std_err),
        e.n_samples.to_string(),
    ]
}

/// Run `config` in memory with `workers` threads (0: all cores). Errors in
/// the middle of a run are reported through `incomplete`/`error` together
/// with the rows finished so far.
pub fn run_collect(config: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    let job = || {
        let mut rows = Rows { rows: Vec::new() };
        let mut summary = json!({ "kind": config.experiment.name() });
        let result = execute(config, &mut rows, &mut summary);
        ExperimentOutput {
            columns: config.experiment.columns().iter().map(|s| s.to_string()).collect(),
            rows: rows.rows,
            summary,
            incomplete: result.is_err(),
            error: result.err().map(|e| e.to_string()),
        }
    };
    if workers == 0 {
        Ok(job())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        Ok(pool.install(job))
    }
}

fn execute(config: &ExperimentConfig, rows: &mut Rows, summary: &mut Value) -> Result<()> {
    let params = BetaParams::new(config.beta)?;
    let beta = config.beta;
    let n = config.n_samples;
    let seed0 = config.base_seed;
    let crit = FreezeCriterion::default();
    match &config.experiment {
        Experiment::Intensity { window } => {
            let parts = map_chunks(0..n, 0, |range| {
                let mut acc = MomentAccumulator::new(1);
                let mut unfrozen = 0u64;
                for i in range {
                    let c = count_points(&params, *window, replicate_seed(seed0, i), &crit)?;
                    unfrozen += u64::from(!c.frozen);
                    acc.push(&[c.count as f64]);
                }
                Ok((acc, unfrozen))
            })?;
            let (acc, unfrozen) =
                parts.into_iter().fold((MomentAccumulator::new(1), 0), |(a, u), (b, v)| (a.merge(&b), u + v));
            let e = CorrelationEstimate::from_mean(&acc, 0, crate::estimate::EstimatorTag::Mean, unfrozen);
            rows.push(vec![
                fmt_f64(beta),
                fmt_f64(0.0),
                fmt_f64(*window),
                e.estimator_tag.as_str().into(),
                fmt_f64(e.value),
                fmt_f64(e.std_err),
                n.to_string(),
            ]);
            let expected = window / TAU;
            summary["mean"] = json!(e.value);
            summary["std_err"] = json!(e.std_err);
            summary["ci95"] = json!([e.value - 1.96 * e.std_err, e.value + 1.96 * e.std_err]);
            summary["expected"] = json!(expected);
            summary["z_score"] = json!((e.value - expected) / e.std_err);
            summary["unfrozen"] = json!(unfrozen);
        }
        Experiment::TwoPointDecay { window, r_grid, seed_plan, antithetic } => {
            let sampler = CarouselSampler { antithetic: *antithetic, ..CarouselSampler::new(params) };
            let mut points = Vec::new();
            let mut table = Vec::new();
            for &r in r_grid {
                let e = partially_truncated_with(&sampler, &[(0.0, *window)], &[(r, r + window)], n, seed0, *seed_plan, 0)?;
                rows.push(estimate_row(beta, r, 2, 1, &e));
                let mut entry = json!({ "r": r, "value": e.value, "std_err": e.std_err, "unfrozen": e.unfrozen });
                if beta == 2.0 {
                    let exact = rho2_truncated_beta2_integrated((0.0, *window), (r, r + window))?;
                    entry["exact_beta2"] = json!(exact);
                    entry["z_score"] = json!((e.value - exact) / e.std_err);
                }
                table.push(entry);
                points.push((r, e));
                summary["points"] = json!(table);
            }
            summary["fit"] = fit_summary(&points);
        }
        Experiment::KPoint { left, right, r_grid, estimator, seed_plan, antithetic } => {
            let pair = cluster_pair(left, right)?;
            let sampler = CarouselSampler { antithetic: *antithetic, ..CarouselSampler::new(params) };
            let (k, k0) = (pair.k(), pair.left.len());
            let mut points = Vec::new();
            for &r in r_grid {
                let (l, rt) = pair.windows(r)?;
                let e = match estimator {
                    KPointEstimator::ProductMoment => product_moment_with(&sampler, &l, &rt, n, seed0, 0)?.joint,
                    KPointEstimator::PartiallyTruncated => {
                        partially_truncated_with(&sampler, &l, &rt, n, seed0, *seed_plan, 0)?
                    }
                    KPointEstimator::FullyTruncated => {
                        fully_truncated_with(&sampler, &[l, rt].concat(), n, seed0, *seed_plan, 0)?
                    }
                };
                rows.push(estimate_row(beta, r, k, k0, &e));
                points.push((r, e));
            }
            summary["points"] =
                json!(points.iter().map(|(r, e)| json!({"r": r, "value": e.value, "std_err": e.std_err})).collect::<Vec<_>>());
            summary["fit"] = fit_summary(&points);
        }
        Experiment::Overcrowding { lambda, n_max } => {
            let parts = map_chunks(0..n, 0, |range| {
                range
                    .map(|i| count_points(&params, *lambda, replicate_seed(seed0, i), &crit).map(|c| c.count))
                    .collect::<Result<Vec<i64>>>()
            })?;
            let counts: Vec<i64> = parts.into_iter().flatten().collect();
            let mut table = Vec::new();
            for m in 1..=*n_max {
                let p = counts.iter().filter(|c| **c >= i64::from(m)).count() as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                let b = overcrowding_bound(beta, *lambda, m)?;
                rows.push(vec![
                    fmt_f64(beta),
                    fmt_f64(*lambda),
                    m.to_string(),
                    fmt_f64(p),
                    fmt_f64(se),
                    fmt_f64(b.value),
                    n.to_string(),
                ]);
                table.push(json!({"n": m, "probability": p, "std_err": se, "bound": b.value, "bound_applicable": b.applicable}));
            }
            summary["tail"] = json!(table);
        }
        Experiment::OscillationTrace { r, t_end, n_steps, stride } => {
            let traces = map_chunks(0..n, 0, |range| {
                range
                    .map(|i| {
                        let seed = replicate_seed(seed0, i);
                        let noise = generate_noise(seed, *t_end, *n_steps)?;
                        let tr = integrate_family(&params, &[*r], &noise)?;
                        Ok((seed, tr))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut frozen_cos = Vec::new();
            for (seed, tr) in traces.into_iter().flatten() {
                for j in (0..=tr.n_steps).step_by(*stride) {
                    let a = tr.at(j, 0);
                    rows.push(vec![seed.to_string(), fmt_f64(tr.time(j)), fmt_f64(a), fmt_f64(a.cos())]);
                }
                frozen_cos.push(tr.terminal()[0].cos());
            }
            // Time at which the rotation speed r f(t) drops to 1: before it the
            // drift dominates the noise, after it the angle diffuses.
            let rate = params.rate();
            let crossover = if r * beta / 4.0 > 1.0 { (r * beta / 4.0).ln() / rate } else { 0.0 };
            summary["traces"] = json!(n);
            summary["drift_dominated_until"] = json!(crossover);
            summary["mean_terminal_cos"] = json!(frozen_cos.iter().sum::<f64>() / frozen_cos.len() as f64);
        }
        Experiment::EulerConvergence { lambda, t_end, n0, levels } => {
            let table = self_convergence(&params, *lambda, *t_end, *n0, *levels, n as usize, seed0)?;
            let f_sup = SineDrift { params, lambda: *lambda }.sup();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for row in &table {
                let rms_bound = row.bound.sqrt() + l2_error_bound(1.0, 2.0, f_sup, *t_end, row.delta / 2.0).sqrt();
                rows.push(vec![
                    fmt_f64(beta),
                    fmt_f64(*lambda),
                    fmt_f64(row.delta),
                    fmt_f64(row.rms_gap),
                    fmt_f64(rms_bound),
                    n.to_string(),
                ]);
                xs.push(row.delta.ln());
                ys.push(row.rms_gap.ln());
            }
            summary["slope"] = json!(ols_slope(&xs, &ys));
        }
        Experiment::CouplingTv { r, x_shifts, grid, substep } => {
            let est = increment_covariance(&params, *r, *x_shifts, grid, n, seed0, *substep)?;
            let mut blocks_x = Vec::new();
            let mut blocks_y = Vec::new();
            for e in &est {
                rows.push(vec![
                    fmt_f64(beta),
                    fmt_f64(*r),
                    fmt_f64(e.t0),
                    fmt_f64(e.t1),
                    fmt_f64(e.value.re),
                    fmt_f64(e.value.im),
                    fmt_f64(e.value.norm()),
                    fmt_f64(e.se_abs()),
                    n.to_string(),
                ]);
                let d = Complex64::new(2.0 * (e.t1 - e.t0), 0.0);
                blocks_x.push(CMatrix::from_row_slice(2, 2, &[d, e.value, e.value.conj(), d]));
                blocks_y.push(CMatrix::identity(2, 2) * d);
            }
            let h = HermitianBlockCov::new(blocks_x)
                .and_then(|x| hellinger_complex_gaussian(&x, &HermitianBlockCov::new(blocks_y)?));
            match h {
                Ok(h) => {
                    summary["hellinger"] = json!(h);
                    summary["tv_bound"] = json!(std::f64::consts::SQRT_2 * h);
                }
                Err(e) => summary["hellinger_error"] = json!(e.to_string()),
            }
        }
    }
    Ok(())
}

fn fit_summary(points: &[(f64, CorrelationEstimate)]) -> Value {
    if points.len() < 3 {
        return json!({ "skipped": "fewer than three distances" });
    }
    match fit_decay_exponent(points) {
        Ok(f) => json!({ "slope": f.slope, "slope_err": f.slope_err, "oscillating": f.oscillating }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Ordinary least-squares slope.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Files written by [`run`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunFiles {
    pub results: PathBuf,
    pub manifest: PathBuf,
    pub summary: PathBuf,
}

fn git_revision() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// Run `config` and write `results.csv`, `manifest.json` and `summary.json`
/// into `out_dir`. Partial results are flushed before an error is returned.
pub fn run(config: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<RunFiles> {
    let start = Instant::now();
    let output = run_collect(config, workers)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = RunFiles {
        results: out_dir.join("results.csv"),
        manifest: out_dir.join("manifest.json"),
        summary: out_dir.join("summary.json"),
    };
    let write = |p: &Path, s: &str| std::fs::write(p, s).map_err(io_err(p));
    write(&files.results, &output.csv()?)?;
    write(&files.summary, &serde_json::to_string_pretty(&output.summary).map_err(|e| Error::Format(e.to_string()))?)?;
    let manifest = json!({
        "config": config,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "git_revision": git_revision(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "workers": workers,
        "seed_plan": {
            "base_seed": config.base_seed,
            "replicate_seed": "base_seed XOR replicate_index",
            "generator": "ChaCha8, stream selected by dyadic level",
            "chunk": CHUNK,
            "replicates": config.n_samples,
        },
        "csv_schema": { "version": CSV_SCHEMA_VERSION, "columns": output.columns, "float_format": "17 significant digits" },
        "incomplete": output.incomplete,
        "error": output.error,
    });
    write(&files.manifest, &serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?)?;
    match output.error {
        Some(message) => Err(Error::Incomplete { path: out_dir.to_path_buf(), message }),
        None => Ok(files),
    }
}
