//! Unit-mass point on a line driven by a bounded acceleration.
//!
//! State `[position, velocity]`, action `[acceleration]`. Explicit Euler:
//! position advances with the old velocity, then velocity with the action.
//! No unsafe set; used as a planner benchmark with exhaustively enumerable
//! action grids.

use crate::env::{Dynamics, EnvError, EnvSpec, Interval};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct DoubleIntegrator<S> {
    spec: EnvSpec<S>,
}

impl<S: Scalar> DoubleIntegrator<S> {
    pub fn new(dt: S, u_max: S) -> Result<Self, EnvError> {
        let spec = EnvSpec {
            state_dim: 2,
            action_dim: 1,
            action_bounds: vec![Interval::symmetric(u_max)],
            dt,
            max_episode_steps: 1,
        };
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn u_max(&self) -> S {
        self.spec.action_bounds[0].hi
    }
}

impl<S: Scalar> Default for DoubleIntegrator<S> {
    fn default() -> Self {
        Self::new(S::lit(0.1), S::one()).expect("valid double integrator")
    }
}

impl<S: Scalar> Dynamics<S> for DoubleIntegrator<S> {
    fn spec(&self) -> &EnvSpec<S> {
        &self.spec
    }

    fn step_into(&self, state: &[S], action: &[S], next: &mut [S]) {
        let dt = self.spec.dt;
        next[0] = state[0] + state[1] * dt;
        next[1] = state[1] + action[0] * dt;
    }
}
