//! Reversibility-shielded reinforcement learning.
// `!(x > 0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod envs;
pub mod mppi;
pub mod policy;
pub mod scalar;
pub mod seed;
pub mod shield;
pub mod trainer;

pub use env::{Action, ConstraintOracle, Dynamics, EnvSpec, Environment, Interval, State, Task};
pub use envs::{Cartpole, DoubleIntegrator, EnvKind, Nav2d};
pub use scalar::Scalar;
pub use shield::{SavMpcShield, Shield};
pub use trainer::{train, ShieldMode, TrainConfig};

pub type State64 = State<f64>;
pub type Action64 = Action<f64>;
pub type Cartpole64 = Cartpole<f64>;
pub type Nav2d64 = Nav2d<f64>;
pub type DoubleIntegrator64 = DoubleIntegrator<f64>;
pub type MppiParams64 = mppi::MppiParams<f64>;
pub type PolicyParams64 = policy::PolicyParams<f64>;
pub type TrainConfig64 = TrainConfig<f64>;
pub type Cartpole32 = Cartpole<f32>;
pub type Nav2d32 = Nav2d<f32>;
