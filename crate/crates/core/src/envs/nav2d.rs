//! Planar point-robot navigation around an attracting sinkhole.
//!
//! State layout: `[p_x, p_y, goal_x, goal_y]`. Actions are velocity commands
//! bounded per axis by `v_max`. Inside `r_attract` the sinkhole adds a pull
//! toward its center that grows linearly as the agent gets closer; within
//! `r_term` of the center, or outside the operating rectangle, the state is
//! unsafe and frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ConstraintOracle, Dynamics, EnvError, EnvSpec, Interval, State, Task};
use crate::scalar::Scalar;

pub const STATE_DIM: usize = 4;

pub const STEP_REWARD: f64 = -1.0;
pub const GOAL_REWARD: f64 = 1000.0;
pub const TERMINATION_REWARD: f64 = -100.0;

/// `-1 + 1000 * reached_goal - 100 * terminated`.
pub fn nav_reward<S: Scalar>(reached_goal: bool, terminated: bool) -> S {
    let mut r = STEP_REWARD;
    if reached_goal {
        r += GOAL_REWARD;
    }
    if terminated {
        r += TERMINATION_REWARD;
    }
    S::lit(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavParams<S> {
    pub region_x: Interval<S>,
    pub region_y: Interval<S>,
    pub sink_center: [S; 2],
    pub r_term: S,
    pub r_attract: S,
    pub pull_gain: S,
    /// Speed scale of the pull; at distance `d < r_attract` the pull magnitude
    /// is `pull_gain * pull_speed * (r_attract - d) / r_attract`.
    pub pull_speed: S,
    pub goal_radius: S,
    pub v_max: S,
    pub dt: S,
    /// Start and goal are drawn from the annulus `[spawn_min_radius,
    /// spawn_max_radius]` around the sink, on opposite sides of it and at
    /// least `min_separation` apart.
    pub spawn_min_radius: S,
    pub spawn_max_radius: S,
    pub min_separation: S,
    pub max_episode_steps: usize,
}

impl<S: Scalar> Default for NavParams<S> {
    fn default() -> Self {
        Self {
            region_x: Interval::symmetric(S::lit(5.0)),
            region_y: Interval::symmetric(S::lit(5.0)),
            sink_center: [S::zero(), S::zero()],
            r_term: S::lit(0.5),
            r_attract: S::lit(1.5),
            pull_gain: S::lit(1.2),
            pull_speed: S::lit(4.0),
            goal_radius: S::lit(0.3),
            v_max: S::lit(1.0),
            dt: S::lit(0.1),
            spawn_min_radius: S::lit(1.6),
            spawn_max_radius: S::lit(3.0),
            min_separation: S::lit(0.8),
            max_episode_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Nav2d<S> {
    params: NavParams<S>,
    spec: EnvSpec<S>,
}

impl<S: Scalar> Nav2d<S> {
    pub fn new(params: NavParams<S>) -> Result<Self, EnvError> {
        let p = &params;
        if !(p.r_term > S::zero()) || !(p.r_attract > p.r_term) {
            return Err(EnvError::InvalidSpec("need 0 < r_term < r_attract".into()));
        }
        if !(p.pull_gain > S::zero()) || !(p.pull_speed > S::zero()) {
            return Err(EnvError::InvalidSpec("pull gain and speed must be positive".into()));
        }
        if !(p.goal_radius > S::zero()) || !(p.v_max > S::zero()) {
            return Err(EnvError::InvalidSpec("goal_radius and v_max must be positive".into()));
        }
        if !(p.spawn_min_radius > p.r_attract) || !(p.spawn_max_radius > p.spawn_min_radius) {
            return Err(EnvError::InvalidSpec(
                "spawn annulus must lie outside the attraction radius".into(),
            ));
        }
        if !(p.min_separation > p.goal_radius) || p.min_separation > S::lit(2.0) * p.spawn_max_radius {
            return Err(EnvError::InvalidSpec(
                "min_separation must exceed goal_radius and be attainable in the annulus".into(),
            ));
        }
        if !(p.region_x.width() > S::zero()) || !(p.region_y.width() > S::zero()) {
            return Err(EnvError::InvalidSpec("empty operating region".into()));
        }
        let spec = EnvSpec {
            state_dim: STATE_DIM,
            action_dim: 2,
            action_bounds: vec![Interval::symmetric(p.v_max); 2],
            dt: p.dt,
            max_episode_steps: p.max_episode_steps,
        };
        spec.validate()?;
        Ok(Self { params, spec })
    }

    pub fn params(&self) -> &NavParams<S> {
        &self.params
    }

    pub fn sink_distance(&self, px: S, py: S) -> S {
        let [cx, cy] = self.params.sink_center;
        (px - cx).hypot(py - cy)
    }

    /// Pull velocity exerted by the sinkhole at `(px, py)`.
    pub fn pull(&self, px: S, py: S) -> [S; 2] {
        let p = &self.params;
        let d = self.sink_distance(px, py);
        if d >= p.r_attract || d <= S::zero() {
            return [S::zero(), S::zero()];
        }
        let magnitude = p.pull_gain * p.pull_speed * (p.r_attract - d) / p.r_attract;
        let [cx, cy] = p.sink_center;
        [(cx - px) / d * magnitude, (cy - py) / d * magnitude]
    }

    fn position_unsafe(&self, px: S, py: S) -> bool {
        let p = &self.params;
        !p.region_x.contains(px) || !p.region_y.contains(py) || self.sink_distance(px, py) <= p.r_term
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng, normal: [f64; 2], side: f64) -> (S, S) {
        let p = &self.params;
        let r_lo = p.spawn_min_radius.as_f64();
        let r_hi = p.spawn_max_radius.as_f64();
        let [cx, cy] = [p.sink_center[0].as_f64(), p.sink_center[1].as_f64()];
        loop {
            // Uniform by area over the annulus, rejected into the half-plane
            // and the operating region.
            let r = rng.random_range(r_lo * r_lo..r_hi * r_hi).sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let (dx, dy) = (r * phi.cos(), r * phi.sin());
            if (dx * normal[0] + dy * normal[1]) * side <= 0.0 {
                continue;
            }
            let (x, y) = (S::lit(cx + dx), S::lit(cy + dy));
            if p.region_x.contains(x) && p.region_y.contains(y) {
                return (x, y);
            }
        }
    }
}

impl<S: Scalar> Default for Nav2d<S> {
    fn default() -> Self {
        Self::new(NavParams::default()).expect("default navigation parameters are valid")
    }
}

impl<S: Scalar> Dynamics<S> for Nav2d<S> {
    fn spec(&self) -> &EnvSpec<S> {
        &self.spec
    }

    fn step_into(&self, state: &[S], action: &[S], next: &mut [S]) {
        next.copy_from_slice(state);
        let (px, py) = (state[0], state[1]);
        if self.position_unsafe(px, py) {
            return;
        }
        let [gx, gy] = self.pull(px, py);
        let dt = self.params.dt;
        next[0] = px + (action[0] + gx) * dt;
        next[1] = py + (action[1] + gy) * dt;
    }
}

impl<S: Scalar> Task<S> for Nav2d<S> {
    fn reward(&self, state: &State<S>) -> S {
        nav_reward(self.is_goal(state), self.is_unsafe(state))
    }

    fn transition_reward(&self, _state: &State<S>, reached_goal: bool, terminated: bool) -> S {
        nav_reward(reached_goal, terminated)
    }

    fn sample_initial(&self, seed: u64) -> State<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = [theta.cos(), theta.sin()];
        let min_sep = self.params.min_separation;
        loop {
            let (sx, sy) = self.sample_point(&mut rng, normal, -1.0);
            let (gx, gy) = self.sample_point(&mut rng, normal, 1.0);
            if (sx - gx).hypot(sy - gy) >= min_sep {
                return State::from_vec_unchecked(vec![sx, sy, gx, gy]);
            }
        }
    }

    fn is_goal(&self, state: &State<S>) -> bool {
        (state[0] - state[2]).hypot(state[1] - state[3]) <= self.params.goal_radius
    }
}

impl<S: Scalar> ConstraintOracle<S> for Nav2d<S> {
    fn is_unsafe(&self, state: &State<S>) -> bool {
        self.position_unsafe(state[0], state[1])
    }
}
