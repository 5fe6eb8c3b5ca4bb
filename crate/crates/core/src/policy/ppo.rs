//! Clipped-surrogate PPO with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::buffer::{gae, RolloutBuffer};
use super::{squash_log_det, GaussianHead, PolicyError, PolicyParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig<S> {
    pub gamma: S,
    pub gae_lambda: S,
    pub clip_eps: S,
    pub learning_rate: S,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub ent_coef: S,
    pub vf_coef: S,
    /// Global gradient-norm clip; `None` disables clipping.
    pub max_grad_norm: Option<S>,
    pub normalize_advantages: bool,
    pub adam_eps: S,
}

impl<S: Scalar> Default for PpoConfig<S> {
    fn default() -> Self {
        Self {
            gamma: S::lit(0.99),
            gae_lambda: S::lit(0.95),
            clip_eps: S::lit(0.2),
            learning_rate: S::lit(3e-4),
            epochs: 10,
            minibatch_size: 64,
            ent_coef: S::zero(),
            vf_coef: S::lit(0.5),
            max_grad_norm: Some(S::lit(0.5)),
            normalize_advantages: true,
            adam_eps: S::lit(1e-5),
        }
    }
}

impl<S: Scalar> PpoConfig<S> {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::InvalidConfig(m.to_string()));
        if !(self.gamma > S::zero() && self.gamma <= S::one()) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.gae_lambda >= S::zero() && self.gae_lambda <= S::one()) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > S::zero()) {
            return bad("clip_eps must be positive");
        }
        if !(self.learning_rate > S::zero()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 || self.minibatch_size == 0 {
            return bad("epochs and minibatch_size must be >= 1");
        }
        Ok(())
    }
}

/// One training sample as seen by the loss.
#[derive(Debug, Clone, Copy)]
pub struct PpoSample<'a, S> {
    pub state: &'a [S],
    pub raw_action: &'a [S],
    pub old_log_prob: S,
    pub advantage: S,
    pub value_target: S,
}

/// Loss terms averaged over a minibatch. `total` is what gets minimized:
/// `-surrogate - ent_coef * entropy + vf_coef * value_loss`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts<S> {
    pub total: S,
    pub surrogate: S,
    pub entropy: S,
    pub value_loss: S,
    pub clip_fraction: S,
}

/// Gradients of `LossParts::total` with respect to both networks.
#[derive(Debug, Clone)]
pub struct PpoGrads<S> {
    pub actor: Vec<S>,
    pub critic: Vec<S>,
}

fn per_sample<S: Scalar>(
    params: &PolicyParams<S>,
    s: &PpoSample<'_, S>,
    clip_eps: S,
) -> (GaussianHead<S>, S, S, S, bool) {
    let head = params.head(s.state);
    let log_prob = head.log_density(s.raw_action) - squash_log_det(s.raw_action, &params.bounds);
    let ratio = (log_prob - s.old_log_prob).exp();
    let unclipped = ratio * s.advantage;
    let clipped = ratio.max(S::one() - clip_eps).min(S::one() + clip_eps) * s.advantage;
    // gradient flows through the unclipped branch only when it is the minimum
    let active = unclipped <= clipped;
    (head, ratio, unclipped.min(clipped), log_prob, active)
}

/// Forward-only loss.
pub fn ppo_loss<S: Scalar>(params: &PolicyParams<S>, batch: &[PpoSample<'_, S>], cfg: &PpoConfig<S>) -> LossParts<S> {
    let n = S::lit(batch.len() as f64);
    let mut parts = LossParts::<S>::default();
    for s in batch {
        let (head, ratio, surrogate, _, _) = per_sample(params, s, cfg.clip_eps);
        let v = params.value(s.state);
        parts.surrogate += surrogate / n;
        parts.entropy += head.entropy() / n;
        parts.value_loss += (v - s.value_target) * (v - s.value_target) / n;
        if (ratio - S::one()).abs() > cfg.clip_eps {
            parts.clip_fraction += S::one() / n;
        }
    }
    parts.total = -parts.surrogate - cfg.ent_coef * parts.entropy + cfg.vf_coef * parts.value_loss;
    parts
}

/// Loss and its gradient by backpropagation.
pub fn ppo_loss_grad<S: Scalar>(
    params: &PolicyParams<S>,
    batch: &[PpoSample<'_, S>],
    cfg: &PpoConfig<S>,
) -> (LossParts<S>, PpoGrads<S>) {
    let n = S::lit(batch.len() as f64);
    let m = params.action_dim();
    let mut grads = PpoGrads {
        actor: vec![S::zero(); params.actor.params().len()],
        critic: vec![S::zero(); params.critic.params().len()],
    };
    let mut parts = LossParts::<S>::default();
    let mut grad_out = vec![S::zero(); 2 * m];
    for s in batch {
        let trace = params.actor.forward_trace(s.state);
        let head = GaussianHead::from_output(trace.output());
        let log_prob = head.log_density(s.raw_action) - squash_log_det(s.raw_action, &params.bounds);
        let ratio = (log_prob - s.old_log_prob).exp();
        let unclipped = ratio * s.advantage;
        let clipped = ratio.max(S::one() - cfg.clip_eps).min(S::one() + cfg.clip_eps) * s.advantage;
        parts.surrogate += unclipped.min(clipped) / n;
        parts.entropy += head.entropy() / n;
        if (ratio - S::one()).abs() > cfg.clip_eps {
            parts.clip_fraction += S::one() / n;
        }

        // d total / d log_prob
        let d_logp = if unclipped <= clipped {
            -unclipped / n
        } else {
            S::zero()
        };
        for j in 0..m {
            let sigma = head.log_std[j].exp();
            let u = (s.raw_action[j] - head.mean[j]) / sigma;
            grad_out[j] = d_logp * u / sigma;
            grad_out[m + j] = if head.log_std_free[j] {
                d_logp * (u * u - S::one()) - cfg.ent_coef / n
            } else {
                S::zero()
            };
        }
        params.actor.backward(&trace, &grad_out, &mut grads.actor);

        let ctrace = params.critic.forward_trace(s.state);
        let v = ctrace.output()[0];
        let err = v - s.value_target;
        parts.value_loss += err * err / n;
        params
            .critic
            .backward(&ctrace, &[cfg.vf_coef * S::lit(2.0) * err / n], &mut grads.critic);
    }
    parts.total = -parts.surrogate - cfg.ent_coef * parts.entropy + cfg.vf_coef * parts.value_loss;
    (parts, grads)
}

/// Adam first/second moment state for one parameter vector.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    m: Vec<S>,
    v: Vec<S>,
    t: i32,
}

impl<S: Scalar> Adam<S> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [S], grads: &[S], lr: S, eps: S) {
        let (b1, b2) = (S::lit(0.9), S::lit(0.999));
        self.t += 1;
        let c1 = S::one() - b1.powi(self.t);
        let c2 = S::one() - b2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (S::one() - b1) * *g;
            *v = b2 * *v + (S::one() - b2) * *g * *g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub samples: usize,
    pub minibatches: usize,
    pub last_loss: f64,
    pub last_surrogate: f64,
    pub last_value_loss: f64,
    pub last_entropy: f64,
    pub clip_fraction: f64,
}

/// Policy parameters together with optimizer state.
#[derive(Debug, Clone)]
pub struct PpoLearner<S> {
    params: PolicyParams<S>,
    cfg: PpoConfig<S>,
    adam_actor: Adam<S>,
    adam_critic: Adam<S>,
    rng: ChaCha8Rng,
}

impl<S: Scalar> PpoLearner<S> {
    pub fn new(params: PolicyParams<S>, cfg: PpoConfig<S>, seed: u64) -> Result<Self, PolicyError> {
        cfg.validate()?;
        Ok(Self {
            adam_actor: Adam::new(params.actor.params().len()),
            adam_critic: Adam::new(params.critic.params().len()),
            params,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn params(&self) -> &PolicyParams<S> {
        &self.params
    }

    pub fn into_params(self) -> PolicyParams<S> {
        self.params
    }

    pub fn config(&self) -> &PpoConfig<S> {
        &self.cfg
    }

    /// Runs `epochs` passes of shuffled minibatch updates over the buffer.
    /// The buffer is left untouched; the caller clears it.
    pub fn update(&mut self, buffer: &RolloutBuffer<S>) -> Result<UpdateStats, PolicyError> {
        if buffer.is_empty() {
            return Err(PolicyError::EmptyBuffer);
        }
        let cfg = self.cfg.clone();
        let (advantages, returns) = gae(buffer, cfg.gamma, cfg.gae_lambda);
        let entries = buffer.entries();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        let mut stats = UpdateStats {
            samples: entries.len(),
            ..Default::default()
        };
        let mut clipped = S::zero();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                let mut adv: Vec<S> = chunk.iter().map(|&i| advantages[i]).collect();
                if cfg.normalize_advantages && adv.len() > 1 {
                    normalize(&mut adv);
                }
                let batch: Vec<PpoSample<'_, S>> = chunk
                    .iter()
                    .zip(&adv)
                    .map(|(&i, a)| PpoSample {
                        state: entries[i].transition.state.as_slice(),
                        raw_action: &entries[i].raw_action,
                        old_log_prob: entries[i].log_prob,
                        advantage: *a,
                        value_target: returns[i],
                    })
                    .collect();
                let (loss, mut grads) = ppo_loss_grad(&self.params, &batch, &cfg);
                let finite_grads = grads.actor.iter().chain(&grads.critic).all(|g| g.is_finite());
                if !loss.total.is_finite() || !finite_grads {
                    return Err(PolicyError::NonFiniteLoss { epoch });
                }
                if let Some(max_norm) = cfg.max_grad_norm {
                    clip_global_norm(&mut grads, max_norm);
                }
                self.adam_actor.step(
                    self.params.actor.params_mut(),
                    &grads.actor,
                    cfg.learning_rate,
                    cfg.adam_eps,
                );
                self.adam_critic.step(
                    self.params.critic.params_mut(),
                    &grads.critic,
                    cfg.learning_rate,
                    cfg.adam_eps,
                );
                stats.minibatches += 1;
                stats.last_loss = loss.total.as_f64();
                stats.last_surrogate = loss.surrogate.as_f64();
                stats.last_value_loss = loss.value_loss.as_f64();
                stats.last_entropy = loss.entropy.as_f64();
                clipped += loss.clip_fraction;
            }
        }
        stats.clip_fraction = clipped.as_f64() / stats.minibatches.max(1) as f64;
        if !self.params.is_finite() {
            return Err(PolicyError::NonFiniteLoss { epoch: cfg.epochs });
        }
        Ok(stats)
    }
}

/// One PPO update from fresh optimizer state.
pub fn ppo_update<S: Scalar>(
    params: PolicyParams<S>,
    buffer: &RolloutBuffer<S>,
    cfg: &PpoConfig<S>,
    seed: u64,
) -> Result<PolicyParams<S>, PolicyError> {
    let mut learner = PpoLearner::new(params, cfg.clone(), seed)?;
    learner.update(buffer)?;
    Ok(learner.into_params())
}

/// Zero mean, unit variance (population), in place.
pub fn normalize<S: Scalar>(values: &mut [S]) {
    let n = S::lit(values.len() as f64);
    let mean = values.iter().copied().sum::<S>() / n;
    let var = values.iter().map(|v| (*v - mean) * (*v - mean)).sum::<S>() / n;
    let std = var.sqrt() + S::lit(1e-8);
    for v in values {
        *v = (*v - mean) / std;
    }
}

fn clip_global_norm<S: Scalar>(grads: &mut PpoGrads<S>, max_norm: S) {
    let norm = grads
        .actor
        .iter()
        .chain(&grads.critic)
        .map(|g| *g * *g)
        .sum::<S>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.actor.iter_mut().chain(grads.critic.iter_mut()) {
            *g *= scale;
        }
    }
}
