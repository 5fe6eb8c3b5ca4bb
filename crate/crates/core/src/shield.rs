//! Execute-or-abort filters placed between the policy and the environment.
//!
//! [`SavMpcShield`] accepts a sampled action only if the planner can steer the
//! successor back to the current state. It is built from a [`Dynamics`]
//! implementor alone and so cannot consult the constraint oracle.
//! [`ResamplingShield`] is the full-knowledge baseline: it accepts the first
//! sampled action whose immediate successor the oracle calls safe.

use crate::env::{ConstraintOracle, Dynamics, State};
use crate::mppi::{verify_plan, MppiError, MppiParams, MppiPlanner, PlanOutcome, SafetyPlan};
use crate::policy::{ActionSampler, PolicySample};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Execute,
    Abort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShieldDecision<S> {
    /// The accepted sample, or on abort the last one drawn (never executed).
    pub sample: PolicySample<S>,
    /// Return plan backing an execute verdict of the planning shield.
    pub plan: Option<SafetyPlan<S>>,
    pub verdict: Verdict,
    pub samples_drawn: usize,
    pub planner_calls: usize,
}

impl<S> ShieldDecision<S> {
    pub fn is_execute(&self) -> bool {
        self.verdict == Verdict::Execute
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShieldConfig<S> {
    /// Policy samples tried per decision before aborting.
    pub max_samples: usize,
    pub mppi: MppiParams<S>,
}

pub const DEFAULT_MAX_SAMPLES: usize = 8;

impl<S: Scalar> ShieldConfig<S> {
    pub fn new(mppi: MppiParams<S>) -> Self {
        Self {
            max_samples: DEFAULT_MAX_SAMPLES,
            mppi,
        }
    }

    pub fn validate<D: Dynamics<S> + ?Sized>(&self, dynamics: &D) -> Result<(), MppiError> {
        if self.max_samples == 0 {
            return Err(MppiError::InvalidParams("max_samples must be >= 1".into()));
        }
        self.mppi.validate(dynamics.spec())
    }
}

/// Running counters over every decision a shield has made.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShieldStats {
    pub decisions: usize,
    pub executes: usize,
    pub aborts: usize,
    pub samples_drawn: usize,
    pub planner_calls: usize,
    pub plans_returned: usize,
    /// Returned plans that failed an independent replay.
    pub plan_verification_failures: usize,
}

impl ShieldStats {
    fn record<S>(&mut self, d: &ShieldDecision<S>) {
        self.decisions += 1;
        match d.verdict {
            Verdict::Execute => self.executes += 1,
            Verdict::Abort => self.aborts += 1,
        }
        self.samples_drawn += d.samples_drawn;
        self.planner_calls += d.planner_calls;
    }
}

pub trait Shield<S: Scalar> {
    fn decide(&mut self, state: &State<S>, policy: &mut dyn ActionSampler<S>) -> ShieldDecision<S>;

    /// Clears trajectory-local state; called at every episode start.
    fn reset(&mut self) {}

    fn stats(&self) -> ShieldStats;
}

/// Executes every first sample.
#[derive(Debug, Clone, Default)]
pub struct Unshielded {
    stats: ShieldStats,
}

impl<S: Scalar> Shield<S> for Unshielded {
    fn decide(&mut self, state: &State<S>, policy: &mut dyn ActionSampler<S>) -> ShieldDecision<S> {
        let d = ShieldDecision {
            sample: policy.sample(state),
            plan: None,
            verdict: Verdict::Execute,
            samples_drawn: 1,
            planner_calls: 0,
        };
        self.stats.record(&d);
        d
    }

    fn stats(&self) -> ShieldStats {
        self.stats
    }
}

/// Reverse-reachability shield.
#[derive(Debug, Clone)]
pub struct SavMpcShield<S, D> {
    dynamics: D,
    max_samples: usize,
    planner: MppiPlanner<S>,
    seed: u64,
    stats: ShieldStats,
}

impl<S: Scalar, D: Dynamics<S>> SavMpcShield<S, D> {
    pub fn new(dynamics: D, cfg: ShieldConfig<S>, seed: u64) -> Result<Self, MppiError> {
        cfg.validate(&dynamics)?;
        Ok(Self {
            dynamics,
            max_samples: cfg.max_samples,
            planner: MppiPlanner::new(cfg.mppi),
            seed,
            stats: ShieldStats::default(),
        })
    }

    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }
}

impl<S: Scalar, D: Dynamics<S>> Shield<S> for SavMpcShield<S, D> {
    fn decide(&mut self, state: &State<S>, policy: &mut dyn ActionSampler<S>) -> ShieldDecision<S> {
        let decision_index = self.stats.decisions as u64;
        let mut last = None;
        let mut planner_calls = 0;
        for n in 0..self.max_samples {
            let sample = policy.sample(state);
            // An out-of-bounds sample cannot be simulated and counts as a miss.
            let Ok(next) = self.dynamics.dyn_step(state, &sample.action) else {
                last = Some(sample);
                continue;
            };
            let call_seed = seed::derive(self.seed, decision_index, n as u64);
            planner_calls += 1;
            let outcome = self.planner.plan(&next, state, &self.dynamics, call_seed);
            if let PlanOutcome::Found(plan) = outcome {
                self.stats.plans_returned += 1;
                let sound = plan.start() == &next
                    && plan.target() == state
                    && verify_plan(&next, &plan, &self.dynamics, plan.tolerance());
                if sound {
                    let d = ShieldDecision {
                        sample,
                        plan: Some(plan),
                        verdict: Verdict::Execute,
                        samples_drawn: n + 1,
                        planner_calls,
                    };
                    self.stats.record(&d);
                    return d;
                }
                self.stats.plan_verification_failures += 1;
            }
            last = Some(sample);
        }
        let d = ShieldDecision {
            sample: last.expect("max_samples >= 1"),
            plan: None,
            verdict: Verdict::Abort,
            samples_drawn: self.max_samples,
            planner_calls,
        };
        self.stats.record(&d);
        d
    }

    fn reset(&mut self) {
        self.planner.reset();
    }

    fn stats(&self) -> ShieldStats {
        self.stats
    }
}

/// One-step full-knowledge resampling shield.
#[derive(Debug, Clone)]
pub struct ResamplingShield<E> {
    env: E,
    max_samples: usize,
    stats: ShieldStats,
}

impl<E> ResamplingShield<E> {
    pub fn new(env: E, max_samples: usize) -> Self {
        assert!(max_samples >= 1, "max_samples must be >= 1");
        Self {
            env,
            max_samples,
            stats: ShieldStats::default(),
        }
    }
}

impl<S: Scalar, E: Dynamics<S> + ConstraintOracle<S>> Shield<S> for ResamplingShield<E> {
    fn decide(&mut self, state: &State<S>, policy: &mut dyn ActionSampler<S>) -> ShieldDecision<S> {
        let mut last = None;
        for n in 0..self.max_samples {
            let sample = policy.sample(state);
            let safe = self
                .env
                .dyn_step(state, &sample.action)
                .map(|next| !self.env.is_unsafe(&next))
                .unwrap_or(false);
            if safe {
                let d = ShieldDecision {
                    sample,
                    plan: None,
                    verdict: Verdict::Execute,
                    samples_drawn: n + 1,
                    planner_calls: 0,
                };
                self.stats.record(&d);
                return d;
            }
            last = Some(sample);
        }
        let d = ShieldDecision {
            sample: last.expect("max_samples >= 1"),
            plan: None,
            verdict: Verdict::Abort,
            samples_drawn: self.max_samples,
            planner_calls: 0,
        };
        self.stats.record(&d);
        d
    }

    fn stats(&self) -> ShieldStats {
        self.stats
    }
}

/// Single reverse-reachability decision with a fresh planner.
pub fn mpc_safety<S: Scalar, D: Dynamics<S>>(
    state: &State<S>,
    policy: &mut dyn ActionSampler<S>,
    dynamics: D,
    cfg: &ShieldConfig<S>,
    seed: u64,
) -> Result<ShieldDecision<S>, MppiError> {
    Ok(SavMpcShield::new(dynamics, cfg.clone(), seed)?.decide(state, policy))
}

/// Single one-step oracle decision.
pub fn resampling_shield<S: Scalar, E: Dynamics<S> + ConstraintOracle<S>>(
    state: &State<S>,
    policy: &mut dyn ActionSampler<S>,
    env: E,
    max_samples: usize,
) -> ShieldDecision<S> {
    ResamplingShield::new(env, max_samples).decide(state, policy)
}
