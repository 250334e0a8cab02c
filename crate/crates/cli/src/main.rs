use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Deserialize;
use sinebeta_core::experiment::{run, ExperimentConfig};
use sinebeta_core::validation::{validate_suite, ValidationOptions, CRITERIA};
use sinebeta_core::Error;

/// Simulate the Sine-beta point process and run correlation experiments.
#[derive(Parser, Debug)]
#[command(name = "sinebeta", version)]
struct Args {
    /// Experiment config (JSON). With --validate: optional list of criteria.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for results.csv, manifest.json and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores). Results do not depend on it.
    #[arg(long, env = "SINEBETA_WORKERS")]
    workers: Option<usize>,
    /// Base seed, overriding the one in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Run the acceptance checks and print one line per criterion.
    #[arg(long)]
    validate: bool,
}

/// `--validate --config` file: which criteria to run and at what size.
#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct ValidationConfig {
    #[serde(default = "all_criteria")]
    criteria: Vec<u32>,
    #[serde(default = "unit")]
    scale: f64,
    #[serde(default)]
    seed: Option<u64>,
}

fn all_criteria() -> Vec<u32> {
    CRITERIA.iter().map(|c| c.0).collect()
}

fn unit() -> f64 {
    1.0
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.validate {
        validate(&args)
    } else {
        experiment(&args)
    }
}

fn validate(args: &Args) -> ExitCode {
    let cfg = match &args.config {
        None => ValidationConfig { criteria: all_criteria(), scale: 1.0, seed: None },
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return config_error(format!("{}: {e}", path.display())),
            };
            match serde_json::from_str::<ValidationConfig>(&text) {
                Ok(c) if c.scale > 0.0 => c,
                Ok(_) => return config_error("scale must be positive"),
                Err(e) => return config_error(e),
            }
        }
    };
    if let Some(w) = args.workers.filter(|w| *w > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            return config_error(e);
        }
    }
    let mut opts = ValidationOptions { scale: cfg.scale, ..Default::default() };
    if let Some(seed) = args.seed.or(cfg.seed) {
        opts.seed = seed;
    }
    let report = validate_suite(&cfg.criteria, &opts);
    print!("{report}");
    let passed = report.entries.iter().filter(|e| e.passed).count();
    println!("{passed}/{} criteria passed", report.entries.len());
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn experiment(args: &Args) -> ExitCode {
    let Some(path) = &args.config else {
        return config_error("--config is required unless --validate is given");
    };
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    let workers = args.workers.or(cfg.n_workers).unwrap_or(0);
    let out = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
    match run(&cfg, &out, workers) {
        Ok(files) => {
            println!("wrote {}", files.results.display());
            println!("wrote {}", files.manifest.display());
            println!("wrote {}", files.summary.display());
            match std::fs::read_to_string(&files.summary) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("cannot read back summary: {e}"),
            }
            ExitCode::SUCCESS
        }
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_))) => config_error(e),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
