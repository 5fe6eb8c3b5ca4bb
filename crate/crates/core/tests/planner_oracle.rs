mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revshield::env::Dynamics;
use revshield::envs::DoubleIntegrator;
use revshield::mppi::{plan_reverse, MppiParams};
use support::grid_reachability::{completeness, grid_feasible, st, step, DELTA, DEPTH, PAIRS};

#[test]
fn planner_finds_most_grid_feasible_returns_and_every_plan_replays() {
    let c = completeness(PAIRS, 17);
    assert_eq!(c.unsound, 0);
    let rate = c.found as f64 / c.pairs as f64;
    assert!(rate >= 0.9, "completeness {rate}");
}

#[test]
fn reachability_is_mostly_symmetric() {
    let env = DoubleIntegrator::<f64>::default();
    let params = MppiParams::for_spec(env.spec(), 20, DELTA);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut forward, mut both) = (0, 0);
    for i in 0..100u64 {
        let a = st(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        let b = st(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        if plan_reverse(&a, &b, &env, &params, 2 * i).is_found() {
            forward += 1;
            if plan_reverse(&b, &a, &env, &params, 2 * i + 1).is_found() {
                both += 1;
            }
        }
    }
    assert!(forward >= 50, "only {forward} forward plans");
    let rate = both as f64 / forward as f64;
    assert!(rate >= 0.9, "symmetry {rate} over {forward} pairs");
}

#[test]
fn grid_oracle_sanity() {
    assert!(grid_feasible([0.0, 0.0], [0.0, 0.0], 0));
    let after = (0..3).fold([0.0, 0.0], |s, _| step(s, 1.0));
    assert!(grid_feasible([0.0, 0.0], after, 3));
    assert!(!grid_feasible([0.0, 0.0], [5.0, 0.0], DEPTH));
}
