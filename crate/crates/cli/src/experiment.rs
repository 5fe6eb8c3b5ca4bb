//! Multi-seed experiment runner.
//!
//! Layout under the output directory:
//!
//! ```text
//! <env>_<shield>/seed_<n>.csv     one per (cell, seed)
//! <env>_<shield>/aggregate.csv    one per cell
//! plots/<env>_<metric>.svg        reward, cum_violations, cum_aborts
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use revshield::envs::EnvKind;
use revshield::policy::PolicyParams;
use revshield::trainer::{train, RunMetrics, ShieldMode};

use crate::aggregate::{self, AggregateSeries, Band};
use crate::config::{AnyEnv, RunConfig};
use crate::manifest::{Cell, Manifest};
use crate::plot::{self, Curve};
use crate::records;

pub const METRICS: [&str; 3] = ["reward", "cum_violations", "cum_aborts"];

/// Trains one (env, shield, seed) run.
pub fn train_one(
    config: &RunConfig,
    env: EnvKind,
    shield: ShieldMode,
    seed: u64,
) -> Result<(PolicyParams<f64>, RunMetrics)> {
    let (env_impl, cfg) = config.build(env, shield, seed)?;
    let out = match env_impl {
        AnyEnv::Cartpole(e) => train(e, cfg),
        AnyEnv::Nav2d(e) => train(e, cfg),
    };
    out.with_context(|| format!("training {env} with shield {shield}, seed {seed}"))
}

/// Counters of one freshly trained run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub env: EnvKind,
    pub shield: ShieldMode,
    pub seed: u64,
    pub episodes: usize,
    pub final_window_mean: f64,
    pub cum_violations: usize,
    pub cum_aborts: usize,
    pub total_steps: usize,
    pub plans_returned: usize,
    pub plan_verification_failures: usize,
    pub shield_oracle_calls: usize,
    pub unsafe_loop_heads: usize,
    pub seconds: f64,
}

impl RunSummary {
    pub fn new(env: EnvKind, shield: ShieldMode, seed: u64, m: &RunMetrics, window: usize, seconds: f64) -> Self {
        Self {
            env,
            shield,
            seed,
            episodes: m.records.len(),
            final_window_mean: m.final_window_mean(window),
            cum_violations: m.cum_violations,
            cum_aborts: m.cum_aborts,
            total_steps: m.total_steps,
            plans_returned: m.shield.plans_returned,
            plan_verification_failures: m.shield.plan_verification_failures,
            shield_oracle_calls: m.shield_oracle_calls,
            unsafe_loop_heads: m.unsafe_loop_heads,
            seconds,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{}_{} seed {}: {} episodes, final mean reward {:.2}, violations {}, aborts {}, {:.1}s",
            self.env,
            self.shield,
            self.seed,
            self.episodes,
            self.final_window_mean,
            self.cum_violations,
            self.cum_aborts,
            self.seconds
        )
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub trained: Vec<RunSummary>,
    /// (cell, seed) pairs whose CSV already existed.
    pub skipped: Vec<(String, u64)>,
    pub seed_csvs: Vec<PathBuf>,
    pub aggregate_csvs: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

pub fn seed_csv(cell_dir: &Path, seed: u64) -> PathBuf {
    cell_dir.join(format!("seed_{seed}.csv"))
}

/// Runs a single seed and writes its CSV; returns the summary.
pub fn run_seed(
    config: &RunConfig,
    cell: &Cell,
    seed: u64,
    cell_dir: &Path,
    window: usize,
) -> Result<(RunSummary, PolicyParams<f64>)> {
    let started = Instant::now();
    let (params, metrics) = train_one(config, cell.env, cell.shield, seed)?;
    let path = seed_csv(cell_dir, seed);
    records::write_atomic(&path, &records::to_csv(&records::rows(&metrics))?)
        .with_context(|| format!("writing {}", path.display()))?;
    let summary = RunSummary::new(
        cell.env,
        cell.shield,
        seed,
        &metrics,
        window,
        started.elapsed().as_secs_f64(),
    );
    Ok((summary, params))
}

/// Reads every `seed_*.csv` of `seeds` in `cell_dir` and aggregates them.
pub fn aggregate_cell(cell_dir: &Path, seeds: &[u64], window: usize) -> Result<AggregateSeries> {
    let runs = seeds
        .iter()
        .map(|&s| {
            let path = seed_csv(cell_dir, s);
            records::read(&path).with_context(|| format!("reading {}", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate::aggregate(&runs, window)?)
}

/// Seeds with a `seed_<n>.csv` in `cell_dir`, ascending.
pub fn seeds_in(cell_dir: &Path) -> Result<Vec<u64>> {
    let mut seeds = BTreeSet::new();
    for entry in fs::read_dir(cell_dir).with_context(|| format!("listing {}", cell_dir.display()))? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(seed) = name
            .strip_prefix("seed_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse().ok())
        {
            seeds.insert(seed);
        }
    }
    Ok(seeds.into_iter().collect())
}

fn band<'a>(series: &'a AggregateSeries, metric: &str) -> &'a Band {
    match metric {
        "reward" => &series.reward,
        "cum_violations" => &series.cum_violations,
        _ => &series.cum_aborts,
    }
}

pub fn run_experiment(manifest: &Manifest, force: bool) -> Result<Report> {
    let config = match &manifest.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = &manifest.out_dir;
    fs::create_dir_all(out.join("plots")).with_context(|| format!("creating {}", out.display()))?;
    for cell in &manifest.cells {
        let dir = out.join(cell.name());
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let mut report = Report::default();
    let mut jobs = Vec::new();
    for cell in &manifest.cells {
        let dir = out.join(cell.name());
        for &seed in &cell.seeds {
            let done = !force && records::read(&seed_csv(&dir, seed)).is_ok();
            if done {
                report.skipped.push((cell.name(), seed));
            } else {
                jobs.push((cell, seed, dir.clone()));
            }
        }
    }
    report.trained = jobs
        .par_iter()
        .with_max_len(1)
        .map(|(cell, seed, dir)| {
            let (summary, _) = run_seed(&config, cell, *seed, dir, manifest.window)?;
            eprintln!("{}", summary.line());
            Ok(summary)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut aggregates = Vec::new();
    for cell in &manifest.cells {
        let dir = out.join(cell.name());
        report.seed_csvs.extend(cell.seeds.iter().map(|&s| seed_csv(&dir, s)));
        let series = aggregate_cell(&dir, &cell.seeds, manifest.window)?;
        let path = dir.join("aggregate.csv");
        aggregate::write(&path, &series)?;
        report.aggregate_csvs.push(path);
        aggregates.push((cell, series));
    }

    let envs: BTreeSet<EnvKind> = manifest.cells.iter().map(|c| c.env).collect();
    for env in envs {
        for metric in METRICS {
            let curves: Vec<Curve> = aggregates
                .iter()
                .filter(|(c, _)| c.env == env)
                .map(|(c, s)| Curve {
                    label: c.shield.to_string(),
                    band: band(s, metric),
                })
                .collect();
            let path = out.join("plots").join(format!("{env}_{metric}.svg"));
            plot::plot_metric(&path, &format!("{env}: {metric}"), metric, &curves)
                .with_context(|| format!("plotting {}", path.display()))?;
            report.plots.push(path);
        }
    }
    Ok(report)
}
