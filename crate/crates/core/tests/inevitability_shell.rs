mod support;

use std::f64::consts::TAU;

use revshield::env::{Action, ConstraintOracle, Dynamics, State};
use revshield::envs::Nav2d;
use support::shell::{at, cases, outward, shell_outcome, DIRECTIONS, RADII};

/// Every action on a fine grid of the action box.
fn action_grid() -> Vec<[f64; 2]> {
    let n = 21;
    let level = |i: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    (0..n).flat_map(|i| (0..n).map(move |j| [level(i), level(j)])).collect()
}

fn best_escape(env: &Nav2d<f64>, x: &State<f64>) -> f64 {
    action_grid()
        .iter()
        .map(|a| {
            let next = env.dyn_step(x, &Action::new(a.to_vec())).unwrap();
            env.sink_distance(next[0], next[1])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn shell_is_wider_than_the_unsafe_disc() {
    let env = Nav2d::<f64>::default();
    let r_term = env.params().r_term;
    // largest distance at which no action increases the distance to the sink
    let mut d_crit: f64 = 0.0;
    for i in 1..=200 {
        let d = r_term + 1.0 * i as f64 / 200.0;
        let trapped = (0..DIRECTIONS).all(|k| {
            let x = at(d, TAU * k as f64 / DIRECTIONS as f64);
            best_escape(&env, &x) < d
        });
        if trapped {
            d_crit = d;
        } else {
            break;
        }
    }
    assert!(d_crit > r_term + 0.3, "d_crit {d_crit}");
    assert!(d_crit >= RADII[RADII.len() - 1]);
}

#[test]
fn every_action_sinks_but_the_outward_one_stays_safe() {
    let env = Nav2d::<f64>::default();
    for x in cases() {
        assert!(!env.is_unsafe(&x));
        let d = env.sink_distance(x[0], x[1]);
        for a in action_grid() {
            let next = env.dyn_step(&x, &Action::new(a.to_vec())).unwrap();
            assert!(env.sink_distance(next[0], next[1]) < d);
        }
        assert!(!env.is_unsafe(&env.dyn_step(&x, &outward(&x).action).unwrap()));
    }
}

#[test]
fn planner_shield_aborts_where_resampling_executes() {
    let out = shell_outcome(3);
    assert_eq!(out.cases, RADII.len() * DIRECTIONS);
    assert_eq!(out.savmpc_aborts, out.cases);
    assert_eq!(out.resampling_executes, out.cases);
    assert_eq!(out.contrasts, out.cases);
}
