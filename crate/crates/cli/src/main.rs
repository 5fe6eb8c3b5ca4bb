use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use revshield::envs::EnvKind;
use revshield::policy::checkpoint;
use revshield::trainer::ShieldMode;
use revshield_cli::aggregate::{self, DEFAULT_WINDOW};
use revshield_cli::experiment::{self, seed_csv, RunSummary};
use revshield_cli::{records, Cell, Manifest, RunConfig};

#[derive(Parser)]
#[command(name = "revshield", version, about = "Reversibility-shielded PPO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its episode CSV and policy checkpoint.
    Train {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        shield: ShieldMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run configuration (`section.key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Run every (cell, seed) of a manifest, then aggregate and plot.
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        /// Retrain seeds whose CSV already exists.
        #[arg(long)]
        force: bool,
        /// Use seeds 0..10 in every cell.
        #[arg(long)]
        full: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Aggregate the seed CSVs of one cell directory into aggregate.csv.
    Aggregate {
        #[arg(long)]
        cell: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            env,
            shield,
            seed,
            config,
            out,
        } => {
            let config = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let cell = Cell {
                env,
                shield,
                seeds: vec![seed],
            };
            let dir = out.join(cell.name());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let (summary, params) = experiment::run_seed(&config, &cell, seed, &dir, DEFAULT_WINDOW)?;
            let policy = dir.join(format!("seed_{seed}.policy"));
            records::write_atomic(&policy, checkpoint::save_to_string(&params).as_bytes())
                .with_context(|| format!("writing {}", policy.display()))?;
            print_summary(&summary);
            println!("wrote {} and {}", seed_csv(&dir, seed).display(), policy.display());
        }
        Command::Experiment {
            manifest,
            force,
            full,
            jobs,
        } => {
            if let Some(n) = jobs {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            }
            let mut m = Manifest::load(&manifest)?;
            if full {
                m = m.with_seed_count(10);
            }
            let report = experiment::run_experiment(&m, force)?;
            println!(
                "trained {} runs, skipped {}; {} seed CSVs, {} aggregates, {} plots in {}",
                report.trained.len(),
                report.skipped.len(),
                report.seed_csvs.len(),
                report.aggregate_csvs.len(),
                report.plots.len(),
                m.out_dir.display()
            );
        }
        Command::Aggregate { cell, window } => {
            let seeds = experiment::seeds_in(&cell)?;
            let series = experiment::aggregate_cell(&cell, &seeds, window)?;
            let path = cell.join("aggregate.csv");
            aggregate::write(&path, &series)?;
            let last = series.len().saturating_sub(1);
            println!(
                "{} seeds, {} episodes; final smoothed reward {:.2} ± {:.2}, cumulative violations {:.2}, aborts {:.2}",
                series.seeds,
                series.len(),
                series.reward.mean.get(last).copied().unwrap_or(f64::NAN),
                series.reward.std.get(last).copied().unwrap_or(f64::NAN),
                series.cum_violations.mean.get(last).copied().unwrap_or(f64::NAN),
                series.cum_aborts.mean.get(last).copied().unwrap_or(f64::NAN),
            );
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn print_summary(s: &RunSummary) {
    println!("{}", s.line());
    if s.shield == ShieldMode::SavMpc {
        println!(
            "plans returned {}, replay failures {}, shield oracle calls {}",
            s.plans_returned, s.plan_verification_failures, s.shield_oracle_calls
        );
    }
}
