//! Finite-difference check of the PPO loss gradient on a small network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use revshield::env::Dynamics;
use revshield::envs::Nav2d;
use revshield::policy::ppo::{ppo_loss, ppo_loss_grad, PpoConfig, PpoSample};
use revshield::policy::{Mlp, PolicyParams, LOG_STD_MAX, LOG_STD_MIN};

pub const FD_STEP: f64 = 1e-5;
pub const MAX_REL_ERR: f64 = 1e-4;
pub const TRIALS: usize = 100;
pub const BATCH: usize = 6;

pub struct Batch {
    pub states: Vec<[f64; 4]>,
    pub raws: Vec<[f64; 2]>,
    pub old: Vec<f64>,
    pub adv: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn samples(&self) -> Vec<PpoSample<'_, f64>> {
        (0..self.states.len())
            .map(|i| PpoSample {
                state: &self.states[i],
                raw_action: &self.raws[i],
                old_log_prob: self.old[i],
                advantage: self.adv[i],
                value_target: self.targets[i],
            })
            .collect()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn draw(rng: &mut ChaCha8Rng) -> (PolicyParams<f64>, Batch) {
    let env = Nav2d::<f64>::default();
    let mut params = PolicyParams::init(env.spec(), 4, rng.random());
    params.actor = Mlp::init(params.actor.sizes(), 1.0, rng);
    let mut batch = Batch {
        states: vec![],
        raws: vec![],
        old: vec![],
        adv: vec![],
        targets: vec![],
    };
    for _ in 0..BATCH {
        let s = [0; 4].map(|_| 2.0 * normal(rng));
        let r = [0; 2].map(|_| normal(rng));
        batch.old.push(params.log_prob_raw(&s, &r) + 0.3 * normal(rng));
        batch.states.push(s);
        batch.raws.push(r);
        batch.adv.push(normal(rng));
        batch.targets.push(normal(rng));
    }
    (params, batch)
}

/// True when every sample sits away from the clip and log-std clamp kinks.
pub fn smooth(params: &PolicyParams<f64>, batch: &Batch, cfg: &PpoConfig<f64>) -> bool {
    (0..BATCH).all(|i| {
        let ratio = (params.log_prob_raw(&batch.states[i], &batch.raws[i]) - batch.old[i]).exp();
        let out = params.actor.forward(&batch.states[i]);
        let clip_ok = (ratio - (1.0 - cfg.clip_eps)).abs() > 1e-3 && (ratio - (1.0 + cfg.clip_eps)).abs() > 1e-3;
        let clamp_ok = out[2..]
            .iter()
            .all(|ls| *ls > LOG_STD_MIN + 1e-3 && *ls < LOG_STD_MAX - 1e-3);
        clip_ok && clamp_ok
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest per-parameter relative error between the analytic gradient and
/// central differences over `trials` random networks and batches.
pub fn worst_relative_error(trials: usize, seed: u64) -> f64 {
    let cfg = PpoConfig::<f64> {
        ent_coef: 0.01,
        ..PpoConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < trials {
        let (params, batch) = draw(&mut rng);
        if !smooth(&params, &batch, &cfg) {
            continue;
        }
        done += 1;
        let samples = batch.samples();
        let (_, grads) = ppo_loss_grad(&params, &samples, &cfg);
        let loss = |p: &PolicyParams<f64>| ppo_loss(p, &samples, &cfg).total;
        for (net, analytic) in [(0, &grads.actor), (1, &grads.critic)] {
            for (i, g) in analytic.iter().enumerate() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                let (p, m) = if net == 0 {
                    (plus.actor.params_mut(), minus.actor.params_mut())
                } else {
                    (plus.critic.params_mut(), minus.critic.params_mut())
                };
                p[i] += FD_STEP;
                m[i] -= FD_STEP;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP);
                worst = worst.max(rel_err(*g, fd));
            }
        }
    }
    worst
}
