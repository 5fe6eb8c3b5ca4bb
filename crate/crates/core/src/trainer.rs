//! Shielded on-policy training loop.
//!
//! Each episode starts from a fresh initial state. At every step the shield
//! vets a policy sample; an abort ends the episode without executing anything,
//! otherwise the action is applied, the transition is stored and the policy is
//! updated on the configured cadence. Entering the unsafe set or reaching the
//! goal also ends the episode.
//!
//! The constraint oracle is consulted here only for bookkeeping (violation
//! flags and the loop-head audit); it never influences which action runs.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{CountingOracle, Dynamics, EnvError, Environment, State, Transition};
use crate::envs::EnvKind;
use crate::mppi::{MppiError, MppiParams};
use crate::policy::{BufferEntry, PolicyError, PolicyParams, PpoConfig, PpoLearner, RolloutBuffer};
use crate::scalar::Scalar;
use crate::seed;
use crate::shield::{ResamplingShield, SavMpcShield, Shield, ShieldConfig, ShieldStats, Unshielded, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShieldMode {
    None,
    SavMpc,
    OracleResample,
}

impl ShieldMode {
    pub const ALL: [ShieldMode; 3] = [ShieldMode::None, ShieldMode::SavMpc, ShieldMode::OracleResample];

    pub fn name(self) -> &'static str {
        match self {
            ShieldMode::None => "none",
            ShieldMode::SavMpc => "savmpc",
            ShieldMode::OracleResample => "oracle",
        }
    }
}

impl fmt::Display for ShieldMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShieldMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ShieldMode::None),
            "savmpc" => Ok(ShieldMode::SavMpc),
            "oracle" | "oracle-resample" => Ok(ShieldMode::OracleResample),
            other => Err(format!("unknown shield `{other}` (expected none, savmpc or oracle)")),
        }
    }
}

/// When the policy is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateCadence {
    /// Whenever this many transitions have been collected.
    Steps(usize),
    /// After every episode that stored at least one transition.
    PerEpisode,
}

pub const DEFAULT_UPDATE_STEPS: usize = 2048;
pub const DEFAULT_HORIZON: usize = 20;
pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<S> {
    pub episodes: usize,
    /// Step limit per episode.
    pub max_steps: usize,
    pub cadence: UpdateCadence,
    pub seed: u64,
    pub shield_mode: ShieldMode,
    pub shield: ShieldConfig<S>,
    pub ppo: PpoConfig<S>,
    /// Hidden width of both networks.
    pub hidden: usize,
}

impl<S: Scalar> TrainConfig<S> {
    /// Default budget and settings for one of the benchmark environments.
    pub fn for_env<D: Dynamics<S> + ?Sized>(kind: EnvKind, dynamics: &D, shield_mode: ShieldMode, seed: u64) -> Self {
        let spec = dynamics.spec();
        let (episodes, ent_coef) = match kind {
            EnvKind::Cartpole => (1500, 0.0),
            EnvKind::Nav2d => (750, 0.01),
        };
        Self {
            episodes,
            max_steps: spec.max_episode_steps,
            cadence: UpdateCadence::Steps(DEFAULT_UPDATE_STEPS),
            seed,
            shield_mode,
            shield: ShieldConfig::new(MppiParams::for_spec(spec, DEFAULT_HORIZON, S::lit(DEFAULT_TOLERANCE))),
            ppo: PpoConfig {
                ent_coef: S::lit(ent_coef),
                ..PpoConfig::default()
            },
            hidden: 64,
        }
    }

    pub fn validate<D: Dynamics<S> + ?Sized>(&self, dynamics: &D) -> Result<(), TrainError> {
        if self.episodes == 0 || self.max_steps == 0 || self.hidden == 0 {
            return Err(TrainError::Config("episodes, max_steps and hidden must be >= 1".into()));
        }
        if self.cadence == UpdateCadence::Steps(0) {
            return Err(TrainError::Config("update cadence must be >= 1 step".into()));
        }
        self.ppo.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.shield.validate(dynamics)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Planner(#[from] MppiError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("policy update failed in episode {episode}: {source}")]
    Update {
        episode: usize,
        #[source]
        source: PolicyError,
    },
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub reward: f64,
    /// Executed steps.
    pub steps: usize,
    pub violated: bool,
    pub aborted: bool,
    pub wall_time: Duration,
}

/// Equality ignores `wall_time`.
impl PartialEq for EpisodeRecord {
    fn eq(&self, other: &Self) -> bool {
        self.episode == other.episode
            && self.reward.to_bits() == other.reward.to_bits()
            && self.steps == other.steps
            && self.violated == other.violated
            && self.aborted == other.aborted
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub records: Vec<EpisodeRecord>,
    pub cum_violations: usize,
    pub cum_aborts: usize,
    pub total_steps: usize,
    pub updates: usize,
    /// Loop heads at which the current state was already unsafe.
    pub unsafe_loop_heads: usize,
    pub shield: ShieldStats,
    /// Constraint-oracle queries made by the shield itself.
    pub shield_oracle_calls: usize,
}

impl RunMetrics {
    pub fn push(&mut self, record: EpisodeRecord) {
        self.cum_violations += record.violated as usize;
        self.cum_aborts += record.aborted as usize;
        self.total_steps += record.steps;
        self.records.push(record);
    }

    /// Mean episode reward over the last `window` episodes.
    pub fn final_window_mean(&self, window: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(window)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.reward).sum::<f64>() / tail.len() as f64
    }
}

/// Abort bookkeeping: the episode ends where it stands and counts as aborted.
pub fn abort_trajectory(record: &mut EpisodeRecord) {
    record.aborted = true;
}

const STREAM_INIT: u64 = 1;
const STREAM_POLICY: u64 = 2;
const STREAM_RESET: u64 = 3;
const STREAM_SHIELD: u64 = 4;
const STREAM_PPO: u64 = 5;

pub struct Trainer<S: Scalar, E> {
    env: E,
    cfg: TrainConfig<S>,
    learner: PpoLearner<S>,
    shield: Box<dyn Shield<S>>,
    shield_oracle: Option<CountingOracle<E>>,
    policy_rng: ChaCha8Rng,
    buffer: RolloutBuffer<S>,
    metrics: RunMetrics,
}

impl<S: Scalar, E: Environment<S> + Clone + 'static> Trainer<S, E> {
    /// Trainer with the shield selected by `cfg.shield_mode` and freshly
    /// initialized networks.
    pub fn new(env: E, cfg: TrainConfig<S>) -> Result<Self, TrainError> {
        cfg.validate(&env)?;
        let counted = CountingOracle::new(env.clone());
        let shield: Box<dyn Shield<S>> = match cfg.shield_mode {
            ShieldMode::None => Box::new(Unshielded::default()),
            ShieldMode::SavMpc => Box::new(SavMpcShield::new(
                counted.clone(),
                cfg.shield.clone(),
                seed::derive(cfg.seed, STREAM_SHIELD, 0),
            )?),
            ShieldMode::OracleResample => Box::new(ResamplingShield::new(counted.clone(), cfg.shield.max_samples)),
        };
        let params = PolicyParams::init(env.spec(), cfg.hidden, seed::derive(cfg.seed, STREAM_INIT, 0));
        let mut t = Self::with_shield(env, cfg, shield, params)?;
        t.shield_oracle = Some(counted);
        Ok(t)
    }

    /// Trainer with a caller-supplied shield and starting parameters.
    pub fn with_shield(
        env: E,
        cfg: TrainConfig<S>,
        shield: Box<dyn Shield<S>>,
        params: PolicyParams<S>,
    ) -> Result<Self, TrainError> {
        cfg.validate(&env)?;
        let learner = PpoLearner::new(params, cfg.ppo.clone(), seed::derive(cfg.seed, STREAM_PPO, 0))
            .map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(Self {
            policy_rng: ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, STREAM_POLICY, 0)),
            env,
            cfg,
            learner,
            shield,
            shield_oracle: None,
            buffer: RolloutBuffer::new(),
            metrics: RunMetrics::default(),
        })
    }

    pub fn params(&self) -> &PolicyParams<S> {
        self.learner.params()
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    /// Transitions collected since the last update.
    pub fn buffer(&self) -> &RolloutBuffer<S> {
        &self.buffer
    }

    pub fn config(&self) -> &TrainConfig<S> {
        &self.cfg
    }

    fn update(&mut self, episode: usize) -> Result<(), TrainError> {
        self.learner
            .update(&self.buffer)
            .map_err(|source| TrainError::Update { episode, source })?;
        self.buffer.clear();
        self.metrics.updates += 1;
        Ok(())
    }

    pub fn run_episode(&mut self) -> Result<&EpisodeRecord, TrainError> {
        let episode = self.metrics.records.len();
        let started = Instant::now();
        let mut record = EpisodeRecord {
            episode,
            reward: 0.0,
            steps: 0,
            violated: false,
            aborted: false,
            wall_time: Duration::ZERO,
        };
        let mut x: State<S> = self
            .env
            .sample_initial(seed::derive(self.cfg.seed, STREAM_RESET, episode as u64));
        self.shield.reset();
        // entries of this episode still in the buffer
        let mut stored = 0usize;

        for t in 0..self.cfg.max_steps {
            if self.env.is_unsafe(&x) {
                self.metrics.unsafe_loop_heads += 1;
            }
            let decision = {
                let params = self.learner.params();
                let rng = &mut self.policy_rng;
                let mut policy = |s: &State<S>| params.act(s, rng);
                self.shield.decide(&x, &mut policy)
            };
            if decision.verdict == Verdict::Abort {
                // the last stored step now ends the trajectory and takes the
                // termination penalty
                let penalty =
                    self.env.transition_reward(&x, false, true) - self.env.transition_reward(&x, false, false);
                record.reward += penalty.as_f64();
                if stored > 0 {
                    if let Some(last) = self.buffer.last_mut() {
                        last.transition.reward = self.env.transition_reward(&last.transition.state, false, true);
                        last.done = true;
                        last.truncated = false;
                    }
                }
                abort_trajectory(&mut record);
                break;
            }

            let sample = decision.sample;
            let next = self.env.dyn_step(&x, &sample.action)?;
            let violated = self.env.is_unsafe(&next);
            let goal = !violated && self.env.is_goal(&next);
            let reward = self.env.transition_reward(&x, goal, violated);
            record.reward += reward.as_f64();
            record.steps += 1;
            record.violated |= violated;
            let done = violated || goal;
            let params = self.learner.params();
            self.buffer.push(BufferEntry {
                value: params.value(x.as_slice()),
                next_value: params.value(next.as_slice()),
                transition: Transition {
                    state: x,
                    action: sample.action,
                    next_state: next.clone(),
                    reward,
                },
                raw_action: sample.raw,
                log_prob: sample.log_prob,
                done,
                truncated: !done && t + 1 == self.cfg.max_steps,
            });
            stored += 1;
            if let UpdateCadence::Steps(n) = self.cfg.cadence {
                if self.buffer.len() >= n {
                    self.update(episode)?;
                    stored = 0;
                }
            }
            if done {
                break;
            }
            x = next;
        }

        if self.cfg.cadence == UpdateCadence::PerEpisode && !self.buffer.is_empty() {
            self.update(episode)?;
        }
        record.wall_time = started.elapsed();
        self.metrics.shield = self.shield.stats();
        self.metrics.shield_oracle_calls = self.shield_oracle.as_ref().map_or(0, |o| o.calls());
        self.metrics.push(record);
        Ok(self.metrics.records.last().expect("just pushed"))
    }

    /// Runs the remaining episodes.
    pub fn run(&mut self) -> Result<(), TrainError> {
        while self.metrics.records.len() < self.cfg.episodes {
            self.run_episode()?;
        }
        Ok(())
    }

    pub fn into_parts(self) -> (PolicyParams<S>, RunMetrics) {
        (self.learner.into_params(), self.metrics)
    }
}

/// Full training run.
pub fn train<S: Scalar, E: Environment<S> + Clone + 'static>(
    env: E,
    cfg: TrainConfig<S>,
) -> Result<(PolicyParams<S>, RunMetrics), TrainError> {
    let mut trainer = Trainer::new(env, cfg)?;
    trainer.run()?;
    Ok(trainer.into_parts())
}
