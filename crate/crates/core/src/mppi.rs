//! Sampling-based reverse-reachability planning.
//!
//! Given a start state (the successor a candidate action would produce) and a
//! target state (where the agent stands now), [`plan_reverse`] searches for an
//! action sequence of at most `horizon` steps whose simulated trajectory comes
//! within `tolerance` of the target at some step. The search is Model
//! Predictive Path Integral control over the black-box dynamics: perturb a
//! nominal sequence with Gaussian noise, score each rollout by its closest
//! approach to the target, and move the nominal toward the exponentially
//! weighted average perturbation.
//!
//! Only feasibility matters, so the planner returns as soon as any rollout gets
//! within tolerance. Every returned [`SafetyPlan`] has been re-simulated from
//! its start before it is handed out; [`PlanOutcome::Infeasible`] only means
//! the sampling budget ran out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::env::{Action, Dynamics, EnvSpec, Interval, State};
use crate::scalar::{weighted_distance, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MppiError {
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
}

/// How the softmax temperature is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature<S> {
    /// Fraction of the best rollout cost seen in the first scored iteration.
    Auto(S),
    /// Fraction of the best rollout cost of the current iteration.
    Adaptive(S),
    Fixed(S),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MppiParams<S> {
    /// Maximum plan length `T`, in steps.
    pub horizon: usize,
    /// Return tolerance `delta`, in (weighted) state-space distance.
    pub tolerance: S,
    /// Rollouts per iteration `K`.
    pub num_rollouts: usize,
    pub num_iterations: usize,
    /// Per-action-dimension noise standard deviation.
    pub noise_std: Vec<S>,
    pub temperature: Temperature<S>,
    /// Optional per-state-dimension distance weights.
    pub weights: Option<Vec<S>>,
    /// Seed each call with the previous call's best sequence shifted by one.
    pub warm_start: bool,
    /// Rollouts scored together between early-exit checks.
    pub chunk_size: usize,
}

impl<S: Scalar> MppiParams<S> {
    pub const DEFAULT_ROLLOUTS: usize = 256;
    pub const DEFAULT_ITERATIONS: usize = 8;
    pub const DEFAULT_NOISE_FRACTION: f64 = 0.3;
    pub const DEFAULT_TEMPERATURE_FRACTION: f64 = 0.1;

    /// Defaults for an environment: noise at 0.3 of each action range and an
    /// automatic temperature of 0.1 times the initial best cost.
    pub fn for_spec(spec: &EnvSpec<S>, horizon: usize, tolerance: S) -> Self {
        Self {
            horizon,
            tolerance,
            num_rollouts: Self::DEFAULT_ROLLOUTS,
            num_iterations: Self::DEFAULT_ITERATIONS,
            noise_std: noise_from_range(spec, S::lit(Self::DEFAULT_NOISE_FRACTION)),
            temperature: Temperature::Auto(S::lit(Self::DEFAULT_TEMPERATURE_FRACTION)),
            weights: None,
            warm_start: true,
            chunk_size: 64,
        }
    }

    pub fn validate(&self, spec: &EnvSpec<S>) -> Result<(), MppiError> {
        let bad = |m: &str| Err(MppiError::InvalidParams(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if !(self.tolerance > S::zero()) {
            return bad("tolerance must be positive");
        }
        if self.num_rollouts == 0 || self.num_iterations == 0 || self.chunk_size == 0 {
            return bad("rollouts, iterations and chunk size must be >= 1");
        }
        if self.noise_std.len() != spec.action_dim || self.noise_std.iter().any(|s| !(*s > S::zero())) {
            return bad("noise_std needs one positive entry per action dimension");
        }
        match self.temperature {
            Temperature::Auto(f) | Temperature::Adaptive(f) | Temperature::Fixed(f) if !(f > S::zero()) => {
                return bad("temperature must be positive");
            }
            _ => {}
        }
        if let Some(w) = &self.weights {
            if w.len() != spec.state_dim || w.iter().any(|v| !(*v >= S::zero())) {
                return bad("weights need one non-negative entry per state dimension");
            }
        }
        Ok(())
    }
}

/// `fraction * (hi - lo)` for every action dimension.
pub fn noise_from_range<S: Scalar>(spec: &EnvSpec<S>, fraction: S) -> Vec<S> {
    spec.action_bounds.iter().map(|b| fraction * b.width()).collect()
}

/// A replay-checked action sequence leading from `start` back to within
/// `tolerance` of `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyPlan<S> {
    start: State<S>,
    actions: Vec<Action<S>>,
    target: State<S>,
    achieved_distance: S,
    tolerance: S,
    weights: Option<Vec<S>>,
}

impl<S: Scalar> SafetyPlan<S> {
    /// Replays `actions` from `start` and builds the plan only if the replay
    /// reaches the target. This is the only constructor.
    pub fn verified<D: Dynamics<S> + ?Sized>(
        start: State<S>,
        actions: Vec<Action<S>>,
        target: State<S>,
        tolerance: S,
        weights: Option<Vec<S>>,
        dynamics: &D,
    ) -> Option<Self> {
        let achieved = replay(&start, &actions, &target, tolerance, weights.as_deref(), dynamics)?;
        Some(Self {
            start,
            actions,
            target,
            achieved_distance: achieved,
            tolerance,
            weights,
        })
    }

    pub fn start(&self) -> &State<S> {
        &self.start
    }

    pub fn actions(&self) -> &[Action<S>] {
        &self.actions
    }

    pub fn target(&self) -> &State<S> {
        &self.target
    }

    pub fn achieved_distance(&self) -> S {
        self.achieved_distance
    }

    pub fn tolerance(&self) -> S {
        self.tolerance
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome<S> {
    Found(SafetyPlan<S>),
    /// No rollout reached the tolerance; `best_distance` is the closest
    /// approach seen (infinite if every rollout froze).
    Infeasible {
        best_distance: S,
    },
}

impl<S> PlanOutcome<S> {
    pub fn plan(&self) -> Option<&SafetyPlan<S>> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            PlanOutcome::Infeasible { .. } => None,
        }
    }

    pub fn into_plan(self) -> Option<SafetyPlan<S>> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            PlanOutcome::Infeasible { .. } => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, PlanOutcome::Found(_))
    }
}

/// Closest approach of a trajectory to `target`. Panics on an empty trajectory.
pub fn rollout_cost<S: Scalar>(trajectory: &[State<S>], target: &State<S>, weights: Option<&[S]>) -> S {
    assert!(!trajectory.is_empty(), "rollout_cost needs a non-empty trajectory");
    trajectory
        .iter()
        .map(|x| weighted_distance(x.as_slice(), target.as_slice(), weights))
        .fold(S::infinity(), S::min)
}

/// Normalized path-integral weights `exp(-(c - min c) / beta)`.
///
/// Infinite costs get zero weight. Returns `None` when no cost is finite.
pub fn softmax_weights<S: Scalar>(costs: &[S], beta: S) -> Option<Vec<S>> {
    let min = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(S::infinity(), S::min);
    if !min.is_finite() {
        return None;
    }
    let mut w: Vec<S> = costs
        .iter()
        .map(|&c| {
            if c.is_finite() {
                (-(c - min) / beta).exp()
            } else {
                S::zero()
            }
        })
        .collect();
    // the argmin contributes exp(0) = 1, so the sum is at least one
    let total: S = w.iter().copied().sum();
    for v in &mut w {
        *v /= total;
    }
    Some(w)
}

/// `nominal + sum_k w_k * noise_k`, clamped to the action bounds.
///
/// `nominal` and every `noises[k]` are flattened `T x m` sequences in
/// step-major order; `bounds` has `m` entries. If no cost is finite the
/// nominal is returned unchanged.
pub fn mppi_update<S: Scalar>(
    nominal: &[S],
    costs: &[S],
    noises: &[Vec<S>],
    beta: S,
    bounds: &[Interval<S>],
) -> Vec<S> {
    assert_eq!(costs.len(), noises.len(), "one cost per noise sequence");
    let m = bounds.len();
    let mut out = nominal.to_vec();
    let Some(weights) = softmax_weights(costs, beta) else {
        return out;
    };
    for (w, eps) in weights.iter().zip(noises) {
        if *w == S::zero() {
            continue;
        }
        for (o, e) in out.iter_mut().zip(eps) {
            *o += *w * *e;
        }
    }
    for (i, v) in out.iter_mut().enumerate() {
        *v = bounds[i % m].clamp(*v);
    }
    out
}

/// Probes whether `state` is an absorbing (frozen) state: two different
/// extreme actions both leave it bit-identical.
fn is_frozen<S: Scalar, D: Dynamics<S> + ?Sized>(dynamics: &D, state: &[S], probe: &mut [S], next: &mut [S]) -> bool {
    let bounds = &dynamics.spec().action_bounds;
    for (p, b) in probe.iter_mut().zip(bounds) {
        *p = b.lo;
    }
    dynamics.step_into(state, probe, next);
    if next != state {
        return false;
    }
    for (p, b) in probe.iter_mut().zip(bounds) {
        *p = b.hi;
    }
    dynamics.step_into(state, probe, next);
    next == state
}

/// Replays `actions` from `start`. Returns the distance at the first state
/// within tolerance of `target`, or `None` if no prefix gets there, an action
/// is out of bounds, or a frozen state is met on the way.
fn replay<S: Scalar, D: Dynamics<S> + ?Sized>(
    start: &State<S>,
    actions: &[Action<S>],
    target: &State<S>,
    tolerance: S,
    weights: Option<&[S]>,
    dynamics: &D,
) -> Option<S> {
    let spec = dynamics.spec();
    if spec.check_state(start).is_err() || spec.check_state(target).is_err() {
        return None;
    }
    let n = spec.state_dim;
    let mut probe = vec![S::zero(); spec.action_dim];
    let mut scratch = vec![S::zero(); n];
    let mut x = start.as_slice().to_vec();
    let mut next = vec![S::zero(); n];
    let check = |x: &[S], probe: &mut [S], scratch: &mut [S]| -> Option<Option<S>> {
        if is_frozen(dynamics, x, probe, scratch) {
            return None;
        }
        let d = weighted_distance(x, target.as_slice(), weights);
        Some((d <= tolerance).then_some(d))
    };
    if let Some(d) = check(&x, &mut probe, &mut scratch)? {
        return Some(d);
    }
    for a in actions {
        if spec.check_action(a).is_err() {
            return None;
        }
        dynamics.step_into(&x, a.as_slice(), &mut next);
        std::mem::swap(&mut x, &mut next);
        if let Some(d) = check(&x, &mut probe, &mut scratch)? {
            return Some(d);
        }
    }
    None
}

/// Independent replay check of a plan from `start`.
///
/// True iff some prefix of the replayed trajectory (the empty prefix
/// included) ends within `tolerance` of `plan.target()` and no state up to and
/// including that point is frozen.
pub fn verify_plan<S: Scalar, D: Dynamics<S> + ?Sized>(
    start: &State<S>,
    plan: &SafetyPlan<S>,
    dynamics: &D,
    tolerance: S,
) -> bool {
    replay(
        start,
        &plan.actions,
        &plan.target,
        tolerance,
        plan.weights.as_deref(),
        dynamics,
    )
    .is_some()
}

/// Result of simulating one perturbed sequence.
#[derive(Debug, Clone, Copy)]
struct RolloutScore<S> {
    cost: S,
    /// Number of actions after which the rollout first came within tolerance.
    hit: Option<usize>,
}

struct Problem<'a, S, D: ?Sized> {
    dynamics: &'a D,
    start: &'a [S],
    target: &'a [S],
    tolerance: S,
    weights: Option<&'a [S]>,
    horizon: usize,
    action_dim: usize,
}

impl<S: Scalar, D: Dynamics<S> + ?Sized> Problem<'_, S, D> {
    fn score(&self, sequence: &[S]) -> RolloutScore<S> {
        let n = self.start.len();
        let m = self.action_dim;
        let mut x = self.start.to_vec();
        let mut next = vec![S::zero(); n];
        let mut probe = vec![S::zero(); m];
        let mut scratch = vec![S::zero(); n];
        let mut best = weighted_distance(self.start, self.target, self.weights);
        for t in 0..self.horizon {
            self.dynamics.step_into(&x, &sequence[t * m..(t + 1) * m], &mut next);
            if next == x && is_frozen(self.dynamics, &x, &mut probe, &mut scratch) {
                return RolloutScore {
                    cost: S::infinity(),
                    hit: None,
                };
            }
            std::mem::swap(&mut x, &mut next);
            let d = weighted_distance(&x, self.target, self.weights);
            if d <= self.tolerance {
                if is_frozen(self.dynamics, &x, &mut probe, &mut scratch) {
                    return RolloutScore {
                        cost: S::infinity(),
                        hit: None,
                    };
                }
                return RolloutScore {
                    cost: d,
                    hit: Some(t + 1),
                };
            }
            best = best.min(d);
        }
        RolloutScore { cost: best, hit: None }
    }
}

/// MPPI reverse planner with trajectory-local warm-start state.
#[derive(Debug, Clone)]
pub struct MppiPlanner<S> {
    params: MppiParams<S>,
    warm: Option<Vec<S>>,
}

impl<S: Scalar> MppiPlanner<S> {
    pub fn new(params: MppiParams<S>) -> Self {
        Self { params, warm: None }
    }

    pub fn params(&self) -> &MppiParams<S> {
        &self.params
    }

    /// Forgets the warm-start sequence; call at every episode start.
    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn plan<D: Dynamics<S> + ?Sized>(
        &mut self,
        start: &State<S>,
        target: &State<S>,
        dynamics: &D,
        seed: u64,
    ) -> PlanOutcome<S> {
        let spec = dynamics.spec();
        let p = &self.params;
        let (m, horizon) = (spec.action_dim, p.horizon);
        let weights = p.weights.as_deref();
        let infeasible = |best_distance| PlanOutcome::Infeasible { best_distance };
        if spec.check_state(start).is_err() || spec.check_state(target).is_err() {
            return infeasible(S::infinity());
        }

        let found = |actions: Vec<Action<S>>| {
            SafetyPlan::verified(
                start.clone(),
                actions,
                target.clone(),
                p.tolerance,
                p.weights.clone(),
                dynamics,
            )
        };

        let start_distance = weighted_distance(start.as_slice(), target.as_slice(), weights);
        if start_distance <= p.tolerance {
            // zero-length return; `verified` rejects a frozen start
            return match found(Vec::new()) {
                Some(plan) => PlanOutcome::Found(plan),
                None => infeasible(start_distance),
            };
        }

        let problem = Problem {
            dynamics,
            start: start.as_slice(),
            target: target.as_slice(),
            tolerance: p.tolerance,
            weights,
            horizon,
            action_dim: m,
        };
        let bounds = &spec.action_bounds;
        let len = horizon * m;
        let mut nominal = match (&self.warm, p.warm_start) {
            (Some(w), true) if w.len() == len => w.clone(),
            _ => (0..len).map(|i| bounds[i % m].clamp(S::zero())).collect(),
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut beta = match p.temperature {
            Temperature::Fixed(b) => Some(b),
            Temperature::Auto(_) | Temperature::Adaptive(_) => None,
        };
        let mut best_distance = start_distance;

        for _ in 0..p.num_iterations {
            let mut costs = Vec::with_capacity(p.num_rollouts);
            let mut noises: Vec<Vec<S>> = Vec::with_capacity(p.num_rollouts);
            let mut next_index = 0;
            while next_index < p.num_rollouts {
                let chunk_end = (next_index + p.chunk_size).min(p.num_rollouts);
                // Noise is drawn sequentially so results do not depend on the
                // worker count. Rollout 0 of each iteration is the nominal.
                let sequences: Vec<Vec<S>> = (next_index..chunk_end)
                    .map(|k| {
                        let mut seq = nominal.clone();
                        if k > 0 {
                            for (i, v) in seq.iter_mut().enumerate() {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                *v = bounds[i % m].clamp(*v + p.noise_std[i % m] * S::lit(z));
                            }
                        }
                        seq
                    })
                    .collect();
                let scores: Vec<RolloutScore<S>> = sequences.par_iter().map(|seq| problem.score(seq)).collect();

                if let Some((seq, score)) = sequences.iter().zip(&scores).find(|(_, s)| s.hit.is_some()) {
                    let steps = score.hit.unwrap_or(0);
                    let actions = seq[..steps * m].chunks(m).map(|c| Action::new(c.to_vec())).collect();
                    if let Some(plan) = found(actions) {
                        self.warm = Some(shift_by_one(seq, m, bounds));
                        return PlanOutcome::Found(plan);
                    }
                }

                for (seq, score) in sequences.into_iter().zip(scores) {
                    best_distance = best_distance.min(score.cost);
                    costs.push(score.cost);
                    noises.push(seq.iter().zip(&nominal).map(|(u, n)| *u - *n).collect());
                }
                next_index = chunk_end;
            }

            if let Temperature::Adaptive(_) = p.temperature {
                beta = None;
            }
            if beta.is_none() {
                let min = costs
                    .iter()
                    .copied()
                    .filter(|c| c.is_finite())
                    .fold(S::infinity(), S::min);
                match p.temperature {
                    Temperature::Auto(fraction) | Temperature::Adaptive(fraction) if min.is_finite() => {
                        beta = Some((fraction * min).max(S::epsilon()));
                    }
                    _ => {}
                }
            }
            if let Some(b) = beta {
                nominal = mppi_update(&nominal, &costs, &noises, b, bounds);
            }
        }

        self.warm = Some(shift_by_one(&nominal, m, bounds));
        infeasible(best_distance)
    }
}

fn shift_by_one<S: Scalar>(seq: &[S], m: usize, bounds: &[Interval<S>]) -> Vec<S> {
    let mut out = seq[m.min(seq.len())..].to_vec();
    out.extend(bounds.iter().map(|b| b.clamp(S::zero())));
    out
}

/// Cold-start reverse planning: from `start`, find actions returning to
/// within `params.tolerance` of `target`. Deterministic in `seed`.
pub fn plan_reverse<S: Scalar, D: Dynamics<S> + ?Sized>(
    start: &State<S>,
    target: &State<S>,
    dynamics: &D,
    params: &MppiParams<S>,
    seed: u64,
) -> PlanOutcome<S> {
    MppiPlanner::new(params.clone()).plan(start, target, dynamics, seed)
}
