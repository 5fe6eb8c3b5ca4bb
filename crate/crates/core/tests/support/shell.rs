//! Navigation states inside the inevitability shell: safe now, but every
//! action moves the agent closer to the sink.

use std::f64::consts::TAU;

use revshield::env::{Action, Dynamics, State};
use revshield::envs::Nav2d;
use revshield::mppi::MppiParams;
use revshield::policy::PolicySample;
use revshield::shield::{ResamplingShield, SavMpcShield, Shield, ShieldConfig, Verdict};

pub const DIRECTIONS: usize = 16;
pub const RADII: [f64; 5] = [0.75, 0.78, 0.81, 0.85, 0.88];

pub fn at(d: f64, angle: f64) -> State<f64> {
    State::new(vec![d * angle.cos(), d * angle.sin(), 4.0, 4.0]).unwrap()
}

/// Full-speed action pointing away from the sink.
pub fn outward(x: &State<f64>) -> PolicySample<f64> {
    let n = x[0].hypot(x[1]);
    PolicySample::scripted(Action::new(vec![x[0] / n, x[1] / n]))
}

pub fn cases() -> impl Iterator<Item = State<f64>> {
    RADII
        .into_iter()
        .flat_map(|d| (0..DIRECTIONS).map(move |k| at(d, TAU * k as f64 / DIRECTIONS as f64 + 0.1)))
}

#[derive(Debug, Default)]
pub struct ShellOutcome {
    pub cases: usize,
    pub savmpc_aborts: usize,
    pub resampling_executes: usize,
    /// Cases where the planner shield aborted and the resampling shield executed.
    pub contrasts: usize,
}

pub fn shell_outcome(seed: u64) -> ShellOutcome {
    let env = Nav2d::<f64>::default();
    let cfg = ShieldConfig::new(MppiParams::for_spec(env.spec(), 20, 0.05));
    let mut savmpc = SavMpcShield::new(env.clone(), cfg.clone(), seed).unwrap();
    let mut resample = ResamplingShield::new(env, cfg.max_samples);
    let mut out = ShellOutcome::default();
    for x in cases() {
        let mut policy = outward;
        let aborted = savmpc.decide(&x, &mut policy).verdict == Verdict::Abort;
        let executed = resample.decide(&x, &mut policy).verdict == Verdict::Execute;
        out.cases += 1;
        out.savmpc_aborts += aborted as usize;
        out.resampling_executes += executed as usize;
        out.contrasts += (aborted && executed) as usize;
    }
    out
}
