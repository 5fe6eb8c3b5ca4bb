//! Black-box deterministic environment interface.
//!
//! The interface is split in three traits so that code which must stay blind
//! to the constraints can be handed a [`Dynamics`] implementor and nothing
//! else:
//!
//! * [`Dynamics`]: the queryable simulator, a pure `(state, action) -> state`
//!   map together with the dimensions and action bounds.
//! * [`Task`]: reward, initial-state distribution and goal test.
//! * [`ConstraintOracle`]: the hidden ground-truth safety function. Only the
//!   metrics layer and the full-knowledge baseline shield get to see it.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::{weighted_distance, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("{what} has dimension {got}, environment expects {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} contains a non-finite entry at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("action entry {index} = {value} lies outside [{lo}, {hi}]")]
    OutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
}

/// A point of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct State<S>(Vec<S>);

impl<S: Scalar> State<S> {
    /// Builds a state, rejecting NaN and infinite entries.
    pub fn new(values: Vec<S>) -> Result<Self, EnvError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EnvError::NonFinite { what: "state", index });
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[S]) -> Result<Self, EnvError> {
        Self::new(values.to_vec())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<S>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<S> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &State<S>) -> S {
        weighted_distance(&self.0, &other.0, None)
    }
}

impl<S> std::ops::Index<usize> for State<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.0[i]
    }
}

/// A control input. Producers clamp into the bounds before constructing one.
#[derive(Debug, Clone, PartialEq)]
pub struct Action<S>(Vec<S>);

impl<S: Scalar> Action<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl<S> std::ops::Index<usize> for Action<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.0[i]
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> Interval<S> {
    pub fn new(lo: S, hi: S) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(half_width: S) -> Self {
        Self::new(-half_width, half_width)
    }

    pub fn width(&self) -> S {
        self.hi - self.lo
    }

    pub fn center(&self) -> S {
        (self.lo + self.hi) / S::lit(2.0)
    }

    pub fn clamp(&self, v: S) -> S {
        v.max(self.lo).min(self.hi)
    }

    pub fn contains(&self, v: S) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec<S> {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bounds: Vec<Interval<S>>,
    /// Seconds per step.
    pub dt: S,
    pub max_episode_steps: usize,
}

impl<S: Scalar> EnvSpec<S> {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.state_dim == 0 || self.action_dim == 0 {
            return Err(EnvError::InvalidSpec("dimensions must be positive".into()));
        }
        if self.action_bounds.len() != self.action_dim {
            return Err(EnvError::InvalidSpec(format!(
                "{} action bounds for action dimension {}",
                self.action_bounds.len(),
                self.action_dim
            )));
        }
        if self.action_bounds.iter().any(|b| !(b.hi > b.lo)) {
            return Err(EnvError::InvalidSpec("degenerate action bound".into()));
        }
        if !(self.dt > S::zero()) {
            return Err(EnvError::InvalidSpec("dt must be positive".into()));
        }
        if self.max_episode_steps == 0 {
            return Err(EnvError::InvalidSpec("max_episode_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn check_state(&self, state: &State<S>) -> Result<(), EnvError> {
        if state.dim() != self.state_dim {
            return Err(EnvError::DimensionMismatch {
                what: "state",
                expected: self.state_dim,
                got: state.dim(),
            });
        }
        Ok(())
    }

    pub fn check_action(&self, action: &Action<S>) -> Result<(), EnvError> {
        if action.dim() != self.action_dim {
            return Err(EnvError::DimensionMismatch {
                what: "action",
                expected: self.action_dim,
                got: action.dim(),
            });
        }
        for (index, (v, b)) in action.as_slice().iter().zip(&self.action_bounds).enumerate() {
            if !v.is_finite() {
                return Err(EnvError::NonFinite { what: "action", index });
            }
            if !b.contains(*v) {
                return Err(EnvError::OutOfBounds {
                    index,
                    value: v.as_f64(),
                    lo: b.lo.as_f64(),
                    hi: b.hi.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Clamps raw values into the action box.
    pub fn clamp_action(&self, values: &mut [S]) {
        for (v, b) in values.iter_mut().zip(&self.action_bounds) {
            *v = b.clamp(*v);
        }
    }
}

/// One executed step, `(x, u, x', r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: State<S>,
    pub action: Action<S>,
    pub next_state: State<S>,
    pub reward: S,
}

/// Queryable deterministic simulator.
///
/// `step_into` must be a pure function of its arguments: no interior
/// mutability, bit-identical output for identical input. Planners call it from
/// many threads at once.
pub trait Dynamics<S: Scalar>: Send + Sync {
    fn spec(&self) -> &EnvSpec<S>;

    /// Unchecked kernel. Slices have the declared lengths and the action is in
    /// bounds.
    fn step_into(&self, state: &[S], action: &[S], next: &mut [S]);

    /// Checked successor computation.
    fn dyn_step(&self, state: &State<S>, action: &Action<S>) -> Result<State<S>, EnvError> {
        let spec = self.spec();
        spec.check_state(state)?;
        spec.check_action(action)?;
        let mut next = vec![S::zero(); spec.state_dim];
        self.step_into(state.as_slice(), action.as_slice(), &mut next);
        Ok(State::from_vec_unchecked(next))
    }
}

/// Reward, reset distribution and goal test of an environment.
pub trait Task<S: Scalar>: Dynamics<S> {
    /// State reward `R(x)`.
    fn reward(&self, state: &State<S>) -> S;

    /// Reward credited to a step taken from `state`. `reached_goal` and
    /// `terminated` describe how the step ended the trajectory, if it did.
    fn transition_reward(&self, state: &State<S>, reached_goal: bool, terminated: bool) -> S {
        let _ = (reached_goal, terminated);
        self.reward(state)
    }

    /// Draws `x0` from the initial-state set; a pure function of `seed`.
    fn sample_initial(&self, seed: u64) -> State<S>;

    /// Task completion; ends the episode without counting as a violation.
    fn is_goal(&self, _state: &State<S>) -> bool {
        false
    }
}

/// Ground-truth membership test for the unsafe set.
pub trait ConstraintOracle<S: Scalar> {
    fn is_unsafe(&self, state: &State<S>) -> bool;
}

/// Everything the training loop needs from an environment.
pub trait Environment<S: Scalar>: Task<S> + ConstraintOracle<S> {}

impl<S: Scalar, T: Task<S> + ConstraintOracle<S>> Environment<S> for T {}

impl<S: Scalar, T: Dynamics<S> + ?Sized> Dynamics<S> for &T {
    fn spec(&self) -> &EnvSpec<S> {
        (**self).spec()
    }

    fn step_into(&self, state: &[S], action: &[S], next: &mut [S]) {
        (**self).step_into(state, action, next)
    }
}

impl<S: Scalar, T: Task<S> + ?Sized> Task<S> for &T {
    fn reward(&self, state: &State<S>) -> S {
        (**self).reward(state)
    }

    fn transition_reward(&self, state: &State<S>, reached_goal: bool, terminated: bool) -> S {
        (**self).transition_reward(state, reached_goal, terminated)
    }

    fn sample_initial(&self, seed: u64) -> State<S> {
        (**self).sample_initial(seed)
    }

    fn is_goal(&self, state: &State<S>) -> bool {
        (**self).is_goal(state)
    }
}

impl<S: Scalar, T: ConstraintOracle<S> + ?Sized> ConstraintOracle<S> for &T {
    fn is_unsafe(&self, state: &State<S>) -> bool {
        (**self).is_unsafe(state)
    }
}

/// Wraps an environment and counts constraint-oracle queries.
///
/// Clones share the counter.
#[derive(Debug, Clone)]
pub struct CountingOracle<E> {
    inner: E,
    calls: Arc<AtomicUsize>,
}

impl<E> CountingOracle<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<S: Scalar, E: Dynamics<S>> Dynamics<S> for CountingOracle<E> {
    fn spec(&self) -> &EnvSpec<S> {
        self.inner.spec()
    }

    fn step_into(&self, state: &[S], action: &[S], next: &mut [S]) {
        self.inner.step_into(state, action, next)
    }
}

impl<S: Scalar, E: Task<S>> Task<S> for CountingOracle<E> {
    fn reward(&self, state: &State<S>) -> S {
        self.inner.reward(state)
    }

    fn transition_reward(&self, state: &State<S>, reached_goal: bool, terminated: bool) -> S {
        self.inner.transition_reward(state, reached_goal, terminated)
    }

    fn sample_initial(&self, seed: u64) -> State<S> {
        self.inner.sample_initial(seed)
    }

    fn is_goal(&self, state: &State<S>) -> bool {
        self.inner.is_goal(state)
    }
}

impl<S: Scalar, E: ConstraintOracle<S>> ConstraintOracle<S> for CountingOracle<E> {
    fn is_unsafe(&self, state: &State<S>) -> bool {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.is_unsafe(state)
    }
}
