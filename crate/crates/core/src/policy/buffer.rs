//! On-policy rollout storage and generalized advantage estimation.

use crate::env::Transition;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry<S> {
    pub transition: Transition<S>,
    /// Pre-squash sample behind `transition.action`.
    pub raw_action: Vec<S>,
    /// Behaviour-policy log-density of the executed action.
    pub log_prob: S,
    /// Critic estimate of `V(x)` at collection time.
    pub value: S,
    /// Critic estimate of `V(x')` at collection time.
    pub next_value: S,
    /// Trajectory ended here with no value beyond it (violation, goal or
    /// abort).
    pub done: bool,
    /// Trajectory was cut by the step limit; bootstrap from `next_value`.
    pub truncated: bool,
}

/// Executed steps in trajectory order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer<S> {
    entries: Vec<BufferEntry<S>>,
}

impl<S: Scalar> RolloutBuffer<S> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn push(&mut self, entry: BufferEntry<S>) {
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn entries(&self) -> &[BufferEntry<S>] {
        &self.entries
    }

    pub fn last_mut(&mut self) -> Option<&mut BufferEntry<S>> {
        self.entries.last_mut()
    }
}

/// GAE advantages and the matching value targets (`advantage + value`).
///
/// `delta_t = r_t + gamma * V(x'_t) * (1 - done_t) - V(x_t)` and
/// `A_t = delta_t + gamma * lambda * A_{t+1}` within a trajectory. The
/// recursion restarts after any `done` or `truncated` entry and at the end of
/// the buffer.
pub fn gae<S: Scalar>(buffer: &RolloutBuffer<S>, gamma: S, lambda: S) -> (Vec<S>, Vec<S>) {
    let entries = buffer.entries();
    let mut advantages = vec![S::zero(); entries.len()];
    let mut running = S::zero();
    for (t, e) in entries.iter().enumerate().rev() {
        let boundary = e.done || e.truncated || t + 1 == entries.len();
        if boundary {
            running = S::zero();
        }
        let bootstrap = if e.done { S::zero() } else { gamma * e.next_value };
        let delta = e.transition.reward + bootstrap - e.value;
        running = delta + gamma * lambda * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(entries).map(|(a, e)| *a + e.value).collect();
    (advantages, returns)
}
