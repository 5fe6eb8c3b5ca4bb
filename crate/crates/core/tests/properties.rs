use proptest::prelude::*;
use revshield::env::{Action, ConstraintOracle, Dynamics, State, Task};
use revshield::envs::{Cartpole, DoubleIntegrator, Nav2d};
use revshield::mppi::{plan_reverse, softmax_weights, verify_plan, MppiParams};
use revshield::policy::ppo::normalize;

fn cartpole_state() -> impl Strategy<Value = State<f64>> {
    (-2.0..2.0f64, -3.0..3.0f64, -0.6..0.6f64, -3.0..3.0f64)
        .prop_map(|(a, b, c, d)| State::new(vec![a, b, c, d]).unwrap())
}

fn nav_state() -> impl Strategy<Value = State<f64>> {
    (-6.0..6.0f64, -6.0..6.0f64, -4.0..4.0f64, -4.0..4.0f64)
        .prop_map(|(a, b, c, d)| State::new(vec![a, b, c, d]).unwrap())
}

fn action(dim: usize) -> impl Strategy<Value = Action<f64>> {
    prop::collection::vec(-1.0..1.0f64, dim).prop_map(Action::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cartpole_step_is_deterministic(x in cartpole_state(), a in action(1)) {
        let env = Cartpole::<f64>::default();
        let copy = x.clone();
        let first = env.dyn_step(&x, &a).unwrap();
        prop_assert_eq!(&x, &copy);
        prop_assert_eq!(first, env.dyn_step(&x, &a).unwrap());
    }

    #[test]
    fn nav_step_is_deterministic(x in nav_state(), a in action(2)) {
        let env = Nav2d::<f64>::default();
        prop_assert_eq!(env.dyn_step(&x, &a).unwrap(), env.dyn_step(&x, &a).unwrap());
    }

    #[test]
    fn cartpole_unsafe_set_is_absorbing(x in cartpole_state(), a in action(1)) {
        let env = Cartpole::<f64>::default();
        if env.is_unsafe(&x) {
            prop_assert_eq!(env.dyn_step(&x, &a).unwrap(), x);
        }
    }

    #[test]
    fn nav_unsafe_set_is_absorbing(x in nav_state(), actions in prop::collection::vec(action(2), 1..6)) {
        let env = Nav2d::<f64>::default();
        if env.is_unsafe(&x) {
            let mut s = x.clone();
            for a in &actions {
                s = env.dyn_step(&s, a).unwrap();
            }
            prop_assert_eq!(s, x);
        }
    }

    #[test]
    fn initial_states_are_safe_and_seeded(seed in any::<u64>()) {
        let cp = Cartpole::<f64>::default();
        let nav = Nav2d::<f64>::default();
        let (c, n) = (cp.sample_initial(seed), nav.sample_initial(seed));
        prop_assert!(!cp.is_unsafe(&c));
        prop_assert!(!nav.is_unsafe(&n));
        prop_assert!(!nav.is_goal(&n));
        prop_assert_eq!(c, cp.sample_initial(seed));
        prop_assert_eq!(n, nav.sample_initial(seed));
    }

    #[test]
    fn softmax_weights_are_a_distribution(
        costs in prop::collection::vec(prop_oneof![0.0..50.0f64, Just(f64::INFINITY)], 1..40),
        beta in 0.01..10.0f64,
    ) {
        match softmax_weights(&costs, beta) {
            None => prop_assert!(costs.iter().all(|c| c.is_infinite())),
            Some(w) => {
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(w.iter().all(|v| *v >= 0.0));
                for (c, v) in costs.iter().zip(&w) {
                    if c.is_infinite() {
                        prop_assert_eq!(*v, 0.0);
                    }
                }
                let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
                let argmin = costs.iter().position(|c| *c == best).unwrap();
                prop_assert!(w.iter().all(|v| *v <= w[argmin]));
            }
        }
    }

    #[test]
    fn normalization_preserves_advantage_order(mut adv in prop::collection::vec(-100.0..100.0f64, 2..50)) {
        let before = adv.clone();
        normalize(&mut adv);
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        for i in 0..adv.len() {
            for j in 0..adv.len() {
                if before[i] < before[j] {
                    prop_assert!(adv[i] <= adv[j]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn returned_plans_always_replay(
        p in -1.0..1.0f64, v in -1.0..1.0f64, tp in -1.0..1.0f64, tv in -1.0..1.0f64, seed in any::<u64>(),
    ) {
        let env = DoubleIntegrator::<f64>::default();
        let params = MppiParams::for_spec(env.spec(), 10, 0.05);
        let (start, target) = (State::new(vec![p, v]).unwrap(), State::new(vec![tp, tv]).unwrap());
        if let Some(plan) = plan_reverse(&start, &target, &env, &params, seed).into_plan() {
            prop_assert_eq!(plan.start(), &start);
            prop_assert_eq!(plan.target(), &target);
            prop_assert!(plan.len() <= 10);
            prop_assert!(verify_plan(&start, &plan, &env, 0.05));
        }
    }
}
