//! Continuous-force cart-pole.
//!
//! State layout: `[cart position, cart velocity, pole angle, pole angular
//! velocity]`. A scalar action in `[-1, 1]` is scaled by `force_mag` and the
//! classic cart-pole equations are integrated with one explicit Euler step.
//! Once the pole leaves the angle limit the state is frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ConstraintOracle, Dynamics, EnvError, EnvSpec, Interval, State, Task};
use crate::scalar::Scalar;

pub const STATE_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CartpoleParams<S> {
    pub gravity: S,
    pub cart_mass: S,
    pub pole_mass: S,
    pub pole_half_length: S,
    pub force_mag: S,
    pub dt: S,
    /// Scale of the lean bonus in `1 + lambda * |theta|`.
    pub lambda: S,
    /// Use the signed `1 + lambda * theta` form instead of `|theta|`.
    pub signed_reward: bool,
    /// Pole angle limit in radians.
    pub theta_limit: S,
    /// Half-width of the uniform reset box around the origin.
    pub reset_half_width: S,
    pub max_episode_steps: usize,
}

impl<S: Scalar> Default for CartpoleParams<S> {
    fn default() -> Self {
        Self {
            gravity: S::lit(9.8),
            cart_mass: S::lit(1.0),
            pole_mass: S::lit(0.1),
            pole_half_length: S::lit(0.5),
            force_mag: S::lit(10.0),
            dt: S::lit(0.02),
            lambda: S::lit(2.0),
            signed_reward: false,
            theta_limit: S::lit(12.0_f64.to_radians()),
            reset_half_width: S::lit(0.05),
            max_episode_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cartpole<S> {
    params: CartpoleParams<S>,
    spec: EnvSpec<S>,
}

impl<S: Scalar> Cartpole<S> {
    pub fn new(params: CartpoleParams<S>) -> Result<Self, EnvError> {
        let positive = [
            params.gravity,
            params.cart_mass,
            params.pole_mass,
            params.pole_half_length,
            params.force_mag,
            params.theta_limit,
        ];
        if positive.iter().any(|v| !(*v > S::zero())) {
            return Err(EnvError::InvalidSpec(
                "cart-pole physical constants must be positive".into(),
            ));
        }
        if params.reset_half_width < S::zero() || params.reset_half_width >= params.theta_limit {
            return Err(EnvError::InvalidSpec(
                "reset box must lie strictly inside the angle limit".into(),
            ));
        }
        let spec = EnvSpec {
            state_dim: STATE_DIM,
            action_dim: 1,
            action_bounds: vec![Interval::symmetric(S::one())],
            dt: params.dt,
            max_episode_steps: params.max_episode_steps,
        };
        spec.validate()?;
        Ok(Self { params, spec })
    }

    pub fn params(&self) -> &CartpoleParams<S> {
        &self.params
    }

    fn angle_unsafe(&self, theta: S) -> bool {
        theta.abs() > self.params.theta_limit
    }

    /// `1 + lambda * |theta|` (or the signed variant).
    pub fn cartpole_reward(&self, theta: S) -> S {
        let lean = if self.params.signed_reward { theta } else { theta.abs() };
        S::one() + self.params.lambda * lean
    }
}

impl<S: Scalar> Default for Cartpole<S> {
    fn default() -> Self {
        Self::new(CartpoleParams::default()).expect("default cart-pole parameters are valid")
    }
}

impl<S: Scalar> Dynamics<S> for Cartpole<S> {
    fn spec(&self) -> &EnvSpec<S> {
        &self.spec
    }

    fn step_into(&self, state: &[S], action: &[S], next: &mut [S]) {
        let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
        if self.angle_unsafe(theta) {
            next.copy_from_slice(state);
            return;
        }
        let p = &self.params;
        let total_mass = p.cart_mass + p.pole_mass;
        let polemass_length = p.pole_mass * p.pole_half_length;
        let force = p.force_mag * action[0];
        let (sin, cos) = theta.sin_cos();

        let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (p.gravity * sin - cos * temp)
            / (p.pole_half_length * (S::lit(4.0 / 3.0) - p.pole_mass * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;

        next[0] = x + p.dt * x_dot;
        next[1] = x_dot + p.dt * x_acc;
        next[2] = theta + p.dt * theta_dot;
        next[3] = theta_dot + p.dt * theta_acc;
    }
}

impl<S: Scalar> Task<S> for Cartpole<S> {
    fn reward(&self, state: &State<S>) -> S {
        self.cartpole_reward(state[2])
    }

    fn sample_initial(&self, seed: u64) -> State<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = self.params.reset_half_width.as_f64();
        let values = (0..STATE_DIM).map(|_| S::lit(rng.random_range(-w..=w))).collect();
        State::from_vec_unchecked(values)
    }
}

impl<S: Scalar> ConstraintOracle<S> for Cartpole<S> {
    fn is_unsafe(&self, state: &State<S>) -> bool {
        self.angle_unsafe(state[2])
    }
}
