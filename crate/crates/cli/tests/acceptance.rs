//! Acceptance harness: trains the desk-scale grid (2 environments x 3 shields
//! x 3 seeds) and checks every criterion, printing one PASS/FAIL line each.
//! Exits non-zero if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::process::ExitCode;
use std::time::Instant;

use revshield::env::{State, Task};
use revshield::envs::{nav_reward, Cartpole, EnvKind};
use revshield::trainer::ShieldMode;
use revshield_cli::experiment::seed_csv;
use revshield_cli::{records, run_experiment, train_one, Cell, Manifest, RunConfig, RunSummary};

const SEEDS: [u64; 3] = [0, 1, 2];
const WINDOW: usize = 20;
const RUNTIME_BUDGET_SECS: f64 = 30.0 * 60.0;
const CARTPOLE_RATIO: f64 = 0.8;
const COMPLETENESS: f64 = 0.9;
const GRAD_TOL: f64 = 1e-4;

struct Check {
    id: u32,
    pass: bool,
    text: String,
}

fn runs(summaries: &[RunSummary], env: EnvKind, shield: ShieldMode) -> Vec<&RunSummary> {
    summaries
        .iter()
        .filter(|s| s.env == env && s.shield == shield)
        .collect()
}

fn mean_final(summaries: &[RunSummary], env: EnvKind, shield: ShieldMode) -> f64 {
    let r = runs(summaries, env, shield);
    r.iter().map(|s| s.final_window_mean).sum::<f64>() / r.len() as f64
}

fn list<T: std::fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/")
}

fn main() -> ExitCode {
    let started = Instant::now();
    let out_dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let cells = EnvKind::ALL
        .iter()
        .flat_map(|&env| {
            ShieldMode::ALL.iter().map(move |&shield| Cell {
                env,
                shield,
                seeds: SEEDS.to_vec(),
            })
        })
        .collect();
    let manifest = Manifest {
        cells,
        out_dir: out_dir.clone(),
        window: WINDOW,
        config: None,
    };
    eprintln!(
        "acceptance: training {} runs into {}",
        manifest.runs(),
        out_dir.display()
    );
    let report = match run_experiment(&manifest, true) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL  experiment did not complete: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let grid_secs = started.elapsed().as_secs_f64();
    let s = &report.trained;
    let mut checks = Vec::new();

    // 1. zero violations under both shields
    let shielded: Vec<&RunSummary> = s.iter().filter(|r| r.shield != ShieldMode::None).collect();
    let violations: usize = shielded.iter().map(|r| r.cum_violations).sum();
    checks.push(Check {
        id: 1,
        pass: shielded.len() == 12 && violations == 0 && grid_secs < RUNTIME_BUDGET_SECS,
        text: format!(
            "zero violations with savmpc/oracle shields: {violations} over {} runs; grid wall time {:.0}s (budget {:.0}s)",
            shielded.len(),
            grid_secs,
            RUNTIME_BUDGET_SECS
        ),
    });

    // 2. the baseline violates on every seed
    let mut parts = Vec::new();
    let mut pass = true;
    for env in EnvKind::ALL {
        let v: Vec<usize> = runs(s, env, ShieldMode::None)
            .iter()
            .map(|r| r.cum_violations)
            .collect();
        pass &= v.len() == SEEDS.len() && v.iter().all(|&n| n >= 1);
        parts.push(format!("{env} {}", list(v)));
    }
    checks.push(Check {
        id: 2,
        pass,
        text: format!("unshielded baseline violates on every seed: {}", parts.join(", ")),
    });

    // 3. comparable learning
    let (cp_none, cp_sav) = (
        mean_final(s, EnvKind::Cartpole, ShieldMode::None),
        mean_final(s, EnvKind::Cartpole, ShieldMode::SavMpc),
    );
    let (nav_none, nav_sav) = (
        mean_final(s, EnvKind::Nav2d, ShieldMode::None),
        mean_final(s, EnvKind::Nav2d, ShieldMode::SavMpc),
    );
    checks.push(Check {
        id: 3,
        pass: cp_sav >= CARTPOLE_RATIO * cp_none && nav_sav >= nav_none,
        text: format!(
            "final-{WINDOW} reward: cartpole savmpc {cp_sav:.2} vs {CARTPOLE_RATIO} x none {cp_none:.2} (ratio {:.3}); nav2d savmpc {nav_sav:.2} vs none {nav_none:.2}",
            cp_sav / cp_none
        ),
    });

    // 4. lookahead advantage
    let nav_oracle = mean_final(s, EnvKind::Nav2d, ShieldMode::OracleResample);
    let shell = support::shell::shell_outcome(3);
    checks.push(Check {
        id: 4,
        pass: nav_sav > nav_oracle && shell.contrasts == shell.cases && shell.cases > 0,
        text: format!(
            "nav2d savmpc {nav_sav:.2} > oracle {nav_oracle:.2}; shell states: savmpc aborts and resampling executes in {}/{}",
            shell.contrasts, shell.cases
        ),
    });

    // 5. planner soundness over full runs
    let sav: Vec<&RunSummary> = s.iter().filter(|r| r.shield == ShieldMode::SavMpc).collect();
    let plans: usize = sav.iter().map(|r| r.plans_returned).sum();
    let failures: usize = sav.iter().map(|r| r.plan_verification_failures).sum();
    checks.push(Check {
        id: 5,
        pass: failures == 0 && plans > 0,
        text: format!("returned plans failing replay: {failures} of {plans}"),
    });

    // 6. the planning shield never queries the constraint oracle
    let oracle_calls: usize = sav.iter().map(|r| r.shield_oracle_calls).sum();
    checks.push(Check {
        id: 6,
        pass: oracle_calls == 0 && sav.len() == 6,
        text: format!(
            "constraint-oracle calls by the savmpc shield over {} runs: {oracle_calls}",
            sav.len()
        ),
    });

    // 7. brute-force completeness on the double integrator
    let c = support::grid_reachability::completeness(support::grid_reachability::PAIRS, 17);
    let rate = c.found as f64 / c.pairs as f64;
    checks.push(Check {
        id: 7,
        pass: rate >= COMPLETENESS && c.unsound == 0,
        text: format!(
            "planner found {}/{} grid-feasible returns ({:.1}%), {} unsound plans",
            c.found,
            c.pairs,
            100.0 * rate,
            c.unsound
        ),
    });

    // 8. gradient check
    let worst = support::gradcheck::worst_relative_error(support::gradcheck::TRIALS, 2024);
    checks.push(Check {
        id: 8,
        pass: worst < GRAD_TOL,
        text: format!(
            "PPO gradient vs central differences over {} trials (hidden 4): max relative error {worst:.2e} < {GRAD_TOL:e}",
            support::gradcheck::TRIALS
        ),
    });

    // 9. determinism: retrain one full run and compare bytes
    let nav_dir = out_dir.join("nav2d_savmpc");
    let det = train_one(&RunConfig::default(), EnvKind::Nav2d, ShieldMode::SavMpc, 0)
        .map_err(|e| format!("{e:#}"))
        .and_then(|(_, m)| records::to_csv(&records::rows(&m)).map_err(|e| e.to_string()))
        .and_then(|bytes| {
            let previous = std::fs::read(seed_csv(&nav_dir, 0)).map_err(|e| e.to_string())?;
            Ok((bytes == previous, bytes.len()))
        });
    checks.push(match det {
        Ok((same, len)) => Check {
            id: 9,
            pass: same,
            text: format!("nav2d savmpc seed 0 retrained: per-seed CSV byte-identical = {same} ({len} bytes)"),
        },
        Err(e) => Check {
            id: 9,
            pass: false,
            text: format!("determinism rerun failed: {e}"),
        },
    });

    // 10. reward values
    let cp = Cartpole::<f64>::default();
    let upright = cp.reward(&State::new(vec![0.0; 4]).unwrap());
    let nav: [f64; 3] = [
        nav_reward(false, false),
        nav_reward(true, false),
        nav_reward(false, true),
    ];
    checks.push(Check {
        id: 10,
        pass: upright == 1.0 && nav == [-1.0, 999.0, -101.0],
        text: format!(
            "cartpole reward at theta=0: {upright}; nav2d step/goal/terminal: {}",
            list(nav)
        ),
    });

    println!();
    for c in &checks {
        println!("{}  {:>2}. {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.text);
    }
    for r in s {
        eprintln!("  {}", r.line());
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed, {:.0}s total",
        checks.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
