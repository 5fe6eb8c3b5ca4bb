//! Stochastic actor-critic policy and its PPO learner.
//!
//! The actor maps a state to the mean and log standard deviation of a
//! diagonal Gaussian over an unbounded pre-squash variable `z`; actions are
//! `center + half_width * tanh(z)` per dimension, so every sample is inside
//! the action box. Log-densities include the tanh Jacobian and therefore
//! integrate to one over the box.

pub mod buffer;
pub mod checkpoint;
pub mod mlp;
pub mod ppo;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::env::{Action, EnvSpec, Interval, State};
use crate::scalar::Scalar;

pub use buffer::{gae, BufferEntry, RolloutBuffer};
pub use mlp::Mlp;
pub use ppo::{PpoConfig, PpoLearner, UpdateStats};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("non-finite loss during PPO update (epoch {epoch})")]
    NonFiniteLoss { epoch: usize },
    #[error("PPO update called on an empty buffer")]
    EmptyBuffer,
    #[error("invalid PPO configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One draw from the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample<S> {
    /// Squashed action, inside the bounds.
    pub action: Action<S>,
    /// Pre-squash Gaussian sample.
    pub raw: Vec<S>,
    /// Log-density of `action` (Jacobian-corrected).
    pub log_prob: S,
}

impl<S: Scalar> PolicySample<S> {
    /// A sample carrying only an action, for scripted samplers.
    pub fn scripted(action: Action<S>) -> Self {
        let raw = action.as_slice().to_vec();
        Self {
            action,
            raw,
            log_prob: S::zero(),
        }
    }
}

/// Anything that can propose actions for a state.
pub trait ActionSampler<S: Scalar> {
    fn sample(&mut self, state: &State<S>) -> PolicySample<S>;
}

impl<S: Scalar, F: FnMut(&State<S>) -> PolicySample<S>> ActionSampler<S> for F {
    fn sample(&mut self, state: &State<S>) -> PolicySample<S> {
        self(state)
    }
}

/// Actor and critic networks plus the action box they act in.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<S> {
    pub actor: Mlp<S>,
    pub critic: Mlp<S>,
    pub bounds: Vec<Interval<S>>,
}

/// Gaussian head evaluated at one state.
#[derive(Debug, Clone)]
pub struct GaussianHead<S> {
    pub mean: Vec<S>,
    /// Clamped log standard deviation.
    pub log_std: Vec<S>,
    /// Whether each log-std entry sits inside the clamp range (and so carries
    /// gradient).
    pub log_std_free: Vec<bool>,
}

impl<S: Scalar> GaussianHead<S> {
    pub fn from_output(out: &[S]) -> Self {
        let m = out.len() / 2;
        let (lo, hi) = (S::lit(LOG_STD_MIN), S::lit(LOG_STD_MAX));
        let raw = &out[m..];
        Self {
            mean: out[..m].to_vec(),
            log_std: raw.iter().map(|v| v.max(lo).min(hi)).collect(),
            log_std_free: raw.iter().map(|v| *v > lo && *v < hi).collect(),
        }
    }

    /// Gaussian log-density of the pre-squash sample.
    pub fn log_density(&self, raw: &[S]) -> S {
        let half_ln_2pi = S::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        let mut acc = S::zero();
        for ((z, mu), ls) in raw.iter().zip(&self.mean).zip(&self.log_std) {
            let u = (*z - *mu) / ls.exp();
            acc += -S::lit(0.5) * u * u - *ls - half_ln_2pi;
        }
        acc
    }

    pub fn entropy(&self) -> S {
        let c = S::lit(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
        self.log_std.iter().map(|ls| *ls + c).sum()
    }
}

/// `ln(1 - tanh(z)^2)` without cancellation.
fn log_one_minus_tanh_sq<S: Scalar>(z: S) -> S {
    let y = S::lit(-2.0) * z;
    let softplus = y.max(S::zero()) + (-y.abs()).exp().ln_1p();
    S::lit(2.0) * (S::lit(std::f64::consts::LN_2) - z - softplus)
}

/// Log-determinant of the squash map at `raw`.
pub fn squash_log_det<S: Scalar>(raw: &[S], bounds: &[Interval<S>]) -> S {
    raw.iter()
        .zip(bounds)
        .map(|(z, b)| (b.width() / S::lit(2.0)).ln() + log_one_minus_tanh_sq(*z))
        .sum()
}

pub fn squash<S: Scalar>(raw: &[S], bounds: &[Interval<S>]) -> Vec<S> {
    raw.iter()
        .zip(bounds)
        .map(|(z, b)| b.clamp(b.center() + b.width() / S::lit(2.0) * z.tanh()))
        .collect()
}

impl<S: Scalar> PolicyParams<S> {
    /// Random networks with `hidden` units in each of two tanh layers. The
    /// actor's output layer starts at zero, giving mean 0 and unit scale.
    pub fn init(spec: &EnvSpec<S>, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (spec.state_dim, spec.action_dim);
        Self {
            actor: Mlp::init(&[n, hidden, hidden, 2 * m], 0.0, &mut rng),
            critic: Mlp::init(&[n, hidden, hidden, 1], 1.0, &mut rng),
            bounds: spec.action_bounds.clone(),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn head(&self, state: &[S]) -> GaussianHead<S> {
        GaussianHead::from_output(&self.actor.forward(state))
    }

    pub fn value(&self, state: &[S]) -> S {
        self.critic.forward(state)[0]
    }

    /// Log-density of the squashed action produced from `raw`.
    pub fn log_prob_raw(&self, state: &[S], raw: &[S]) -> S {
        self.head(state).log_density(raw) - squash_log_det(raw, &self.bounds)
    }

    /// Log-density of an action strictly inside the box.
    pub fn log_prob_of_action(&self, state: &[S], action: &[S]) -> S {
        let raw: Vec<S> = action
            .iter()
            .zip(&self.bounds)
            .map(|(a, b)| ((*a - b.center()) / (b.width() / S::lit(2.0))).atanh())
            .collect();
        self.log_prob_raw(state, &raw)
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &State<S>, rng: &mut R) -> PolicySample<S> {
        let head = self.head(state.as_slice());
        let raw: Vec<S> = head
            .mean
            .iter()
            .zip(&head.log_std)
            .map(|(mu, ls)| {
                let eps: f64 = StandardNormal.sample(rng);
                *mu + ls.exp() * S::lit(eps)
            })
            .collect();
        let log_prob = head.log_density(&raw) - squash_log_det(&raw, &self.bounds);
        PolicySample {
            action: Action::new(squash(&raw, &self.bounds)),
            raw,
            log_prob,
        }
    }

    pub fn act_seeded(&self, state: &State<S>, seed: u64) -> PolicySample<S> {
        self.act(state, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Mean action, squashed.
    pub fn act_deterministic(&self, state: &State<S>) -> Action<S> {
        Action::new(squash(&self.head(state.as_slice()).mean, &self.bounds))
    }

    pub fn is_finite(&self) -> bool {
        self.actor
            .params()
            .iter()
            .chain(self.critic.params())
            .all(|v| v.is_finite())
    }
}
