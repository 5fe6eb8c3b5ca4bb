//! Exhaustive reachability on the double integrator over a five-level action
//! grid, used as ground truth for the planner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revshield::env::{Dynamics, State};
use revshield::envs::DoubleIntegrator;
use revshield::mppi::{plan_reverse, verify_plan, MppiParams};

pub const GRID: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
pub const DEPTH: usize = 6;
pub const DELTA: f64 = 0.05;
pub const PAIRS: usize = 200;

pub fn st(p: f64, v: f64) -> State<f64> {
    State::new(vec![p, v]).unwrap()
}

pub fn step(s: [f64; 2], u: f64) -> [f64; 2] {
    [s[0] + 0.1 * s[1], s[1] + 0.1 * u]
}

pub fn close(s: [f64; 2], t: [f64; 2]) -> bool {
    (s[0] - t[0]).hypot(s[1] - t[1]) <= DELTA
}

/// Exhaustive search over grid action sequences of length <= `depth`.
pub fn grid_feasible(s: [f64; 2], target: [f64; 2], depth: usize) -> bool {
    if close(s, target) {
        return true;
    }
    depth > 0 && GRID.iter().any(|&u| grid_feasible(step(s, u), target, depth - 1))
}

/// Start/target pairs the grid oracle certifies reachable within `DEPTH`.
pub fn feasible_pairs(n: usize, seed: u64) -> Vec<([f64; 2], [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    while pairs.len() < n {
        let start = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let mut target = start;
        for _ in 0..rng.random_range(1..=DEPTH) {
            target = step(target, GRID[rng.random_range(0..GRID.len())]);
        }
        target[0] += rng.random_range(-0.03..0.03);
        target[1] += rng.random_range(-0.03..0.03);
        if !close(start, target) && grid_feasible(start, target, DEPTH) {
            pairs.push((start, target));
        }
    }
    pairs
}

#[derive(Debug, Default)]
pub struct Completeness {
    pub pairs: usize,
    pub found: usize,
    /// Returned plans that fail replay, exceed the horizon or leave the bounds.
    pub unsound: usize,
}

/// Default planner budget at horizon `DEPTH` on oracle-feasible pairs.
pub fn completeness(n: usize, seed: u64) -> Completeness {
    let env = DoubleIntegrator::<f64>::default();
    let params = MppiParams::for_spec(env.spec(), DEPTH, DELTA);
    let mut out = Completeness {
        pairs: n,
        ..Default::default()
    };
    for (i, (s, t)) in feasible_pairs(n, seed).iter().enumerate() {
        let (start, target) = (st(s[0], s[1]), st(t[0], t[1]));
        if let Some(plan) = plan_reverse(&start, &target, &env, &params, i as u64).into_plan() {
            out.found += 1;
            let sound = plan.len() <= DEPTH
                && plan.achieved_distance() <= DELTA
                && verify_plan(&start, &plan, &env, DELTA)
                && plan.actions().iter().all(|a| a[0].abs() <= 1.0);
            out.unsound += !sound as usize;
        }
    }
    out
}
