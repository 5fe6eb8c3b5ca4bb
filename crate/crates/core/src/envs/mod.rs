//! Benchmark environments.

pub mod cartpole;
pub mod double_integrator;
pub mod nav2d;

use std::fmt;
use std::str::FromStr;

pub use cartpole::{Cartpole, CartpoleParams};
pub use double_integrator::DoubleIntegrator;
pub use nav2d::{nav_reward, Nav2d, NavParams};

/// Names accepted on the command line and in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvKind {
    Cartpole,
    Nav2d,
}

impl EnvKind {
    pub const ALL: [EnvKind; 2] = [EnvKind::Cartpole, EnvKind::Nav2d];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Cartpole => "cartpole",
            EnvKind::Nav2d => "nav2d",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cartpole" => Ok(EnvKind::Cartpole),
            "nav2d" => Ok(EnvKind::Nav2d),
            other => Err(format!("unknown environment `{other}` (expected cartpole or nav2d)")),
        }
    }
}
