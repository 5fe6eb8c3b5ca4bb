//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! train.episodes = 300
//! mppi.K = 512
//! mppi.temperature = adaptive 0.1
//! nav.pull_speed = 3.5
//! ```
//!
//! Keys are `section.key`. Environment sections (`cartpole.*`, `nav.*`) apply
//! only when that environment is trained, but their keys are checked either
//! way. Later lines override earlier ones.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use revshield::envs::{Cartpole, CartpoleParams, EnvKind, Nav2d, NavParams};
use revshield::mppi::Temperature;
use revshield::trainer::{ShieldMode, TrainConfig, UpdateCadence};
use revshield::Interval;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Env(#[from] revshield::env::EnvError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub section: String,
    pub key: String,
    pub value: String,
}

impl Entry {
    fn name(&self) -> String {
        format!("{}.{}", self.section, self.key)
    }

    fn err(&self, msg: impl fmt::Display) -> ConfigError {
        ConfigError::Value {
            line: self.line,
            key: self.name(),
            msg: msg.to_string(),
        }
    }

    fn unknown(&self) -> ConfigError {
        ConfigError::UnknownKey {
            line: self.line,
            key: self.name(),
        }
    }

    fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.value.parse().map_err(|e| self.err(e))
    }

    fn float(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.parse()?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err("must be finite"))
        }
    }

    fn floats(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("bad number {t:?}")))
            })
            .collect()
    }

    fn interval(&self) -> Result<Interval<f64>, ConfigError> {
        match self.floats()?.as_slice() {
            [lo, hi] if lo < hi => Ok(Interval::new(*lo, *hi)),
            _ => Err(self.err("expected `lo, hi` with lo < hi")),
        }
    }
}

/// Parsed configuration file: entries in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub entries: Vec<Entry>,
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (name, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: "expected `section.key = value`".into(),
            })?;
            let (section, key) = name.trim().split_once('.').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("key `{}` has no section", name.trim()),
            })?;
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    msg: "empty value".into(),
                });
            }
            entries.push(Entry {
                line,
                section: section.trim().to_string(),
                key: key.trim().to_string(),
                value: value.to_string(),
            });
        }
        let cfg = RunConfig { entries };
        cfg.check_keys()?;
        Ok(cfg)
    }
}

/// A constructed environment of either kind.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Cartpole(Cartpole<f64>),
    Nav2d(Nav2d<f64>),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?
            .parse()
    }

    fn section<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.section == name)
    }

    /// Rejects unknown sections and keys by applying everything to defaults.
    fn check_keys(&self) -> Result<(), ConfigError> {
        if let Some(e) = self.entries.iter().find(|e| {
            !matches!(
                e.section.as_str(),
                "train" | "shield" | "mppi" | "ppo" | "cartpole" | "nav"
            )
        }) {
            return Err(e.unknown());
        }
        self.env(EnvKind::Cartpole)?;
        self.env(EnvKind::Nav2d)?;
        let env = Nav2d::<f64>::default();
        let mut cfg = TrainConfig::for_env(EnvKind::Nav2d, &env, ShieldMode::None, 0);
        self.apply(&mut cfg)
    }

    pub fn cartpole_params(&self) -> Result<CartpoleParams<f64>, ConfigError> {
        let mut p = CartpoleParams::default();
        for e in self.section("cartpole") {
            match e.key.as_str() {
                "gravity" => p.gravity = e.float()?,
                "cart_mass" => p.cart_mass = e.float()?,
                "pole_mass" => p.pole_mass = e.float()?,
                "pole_half_length" => p.pole_half_length = e.float()?,
                "force_mag" => p.force_mag = e.float()?,
                "dt" => p.dt = e.float()?,
                "lambda" => p.lambda = e.float()?,
                "signed_reward" => p.signed_reward = e.parse()?,
                "theta_limit" => p.theta_limit = e.float()?,
                "reset_half_width" => p.reset_half_width = e.float()?,
                "max_episode_steps" => p.max_episode_steps = e.parse()?,
                _ => return Err(e.unknown()),
            }
        }
        Ok(p)
    }

    pub fn nav_params(&self) -> Result<NavParams<f64>, ConfigError> {
        let mut p = NavParams::default();
        for e in self.section("nav") {
            match e.key.as_str() {
                "region_x" => p.region_x = e.interval()?,
                "region_y" => p.region_y = e.interval()?,
                "sink_center" => {
                    p.sink_center = match e.floats()?.as_slice() {
                        [x, y] => [*x, *y],
                        _ => return Err(e.err("expected `x, y`")),
                    }
                }
                "r_term" => p.r_term = e.float()?,
                "r_attract" => p.r_attract = e.float()?,
                "pull_gain" => p.pull_gain = e.float()?,
                "pull_speed" => p.pull_speed = e.float()?,
                "goal_radius" => p.goal_radius = e.float()?,
                "v_max" => p.v_max = e.float()?,
                "dt" => p.dt = e.float()?,
                "spawn_min_radius" => p.spawn_min_radius = e.float()?,
                "spawn_max_radius" => p.spawn_max_radius = e.float()?,
                "min_separation" => p.min_separation = e.float()?,
                "max_episode_steps" => p.max_episode_steps = e.parse()?,
                _ => return Err(e.unknown()),
            }
        }
        Ok(p)
    }

    pub fn env(&self, kind: EnvKind) -> Result<AnyEnv, ConfigError> {
        Ok(match kind {
            EnvKind::Cartpole => AnyEnv::Cartpole(Cartpole::new(self.cartpole_params()?)?),
            EnvKind::Nav2d => AnyEnv::Nav2d(Nav2d::new(self.nav_params()?)?),
        })
    }

    /// Applies the `train`, `shield`, `mppi` and `ppo` sections.
    pub fn apply(&self, cfg: &mut TrainConfig<f64>) -> Result<(), ConfigError> {
        for e in &self.entries {
            match (e.section.as_str(), e.key.as_str()) {
                ("train", "episodes") => cfg.episodes = e.parse()?,
                ("train", "max_steps") => cfg.max_steps = e.parse()?,
                ("train", "hidden") => cfg.hidden = e.parse()?,
                ("train", "update") => {
                    cfg.cadence = match e.value.as_str() {
                        "episode" => UpdateCadence::PerEpisode,
                        _ => UpdateCadence::Steps(e.parse()?),
                    }
                }
                ("train", _) => return Err(e.unknown()),

                ("shield", "n_samples") => cfg.shield.max_samples = e.parse()?,
                ("shield", _) => return Err(e.unknown()),

                ("mppi", "T" | "horizon") => cfg.shield.mppi.horizon = e.parse()?,
                ("mppi", "delta" | "tolerance") => cfg.shield.mppi.tolerance = e.float()?,
                ("mppi", "K" | "rollouts") => cfg.shield.mppi.num_rollouts = e.parse()?,
                ("mppi", "iterations") => cfg.shield.mppi.num_iterations = e.parse()?,
                ("mppi", "chunk_size") => cfg.shield.mppi.chunk_size = e.parse()?,
                ("mppi", "warm_start") => cfg.shield.mppi.warm_start = e.parse()?,
                ("mppi", "sigma") => {
                    let sigma = e.floats()?;
                    let dim = cfg.shield.mppi.noise_std.len();
                    cfg.shield.mppi.noise_std = match sigma.as_slice() {
                        [s] => vec![*s; dim],
                        s if s.len() == dim => s.to_vec(),
                        _ => return Err(e.err(format!("expected 1 or {dim} values"))),
                    };
                }
                ("mppi", "weights") => cfg.shield.mppi.weights = Some(e.floats()?),
                ("mppi", "temperature" | "beta") => cfg.shield.mppi.temperature = parse_temperature(e)?,
                ("mppi", _) => return Err(e.unknown()),

                ("ppo", "gamma") => cfg.ppo.gamma = e.float()?,
                ("ppo", "gae_lambda") => cfg.ppo.gae_lambda = e.float()?,
                ("ppo", "clip_eps") => cfg.ppo.clip_eps = e.float()?,
                ("ppo", "learning_rate") => cfg.ppo.learning_rate = e.float()?,
                ("ppo", "epochs") => cfg.ppo.epochs = e.parse()?,
                ("ppo", "minibatch_size") => cfg.ppo.minibatch_size = e.parse()?,
                ("ppo", "ent_coef") => cfg.ppo.ent_coef = e.float()?,
                ("ppo", "vf_coef") => cfg.ppo.vf_coef = e.float()?,
                ("ppo", "max_grad_norm") => {
                    cfg.ppo.max_grad_norm = match e.value.as_str() {
                        "none" => None,
                        _ => Some(e.float()?),
                    }
                }
                ("ppo", "normalize_advantages") => cfg.ppo.normalize_advantages = e.parse()?,
                ("ppo", "adam_eps") => cfg.ppo.adam_eps = e.float()?,
                ("ppo", _) => return Err(e.unknown()),
                _ => {}
            }
        }
        Ok(())
    }

    /// Environment and training configuration for one run.
    pub fn build(&self, kind: EnvKind, mode: ShieldMode, seed: u64) -> Result<(AnyEnv, TrainConfig<f64>), ConfigError> {
        let env = self.env(kind)?;
        let mut cfg = match &env {
            AnyEnv::Cartpole(e) => TrainConfig::for_env(kind, e, mode, seed),
            AnyEnv::Nav2d(e) => TrainConfig::for_env(kind, e, mode, seed),
        };
        self.apply(&mut cfg)?;
        Ok((env, cfg))
    }
}

/// `auto 0.1`, `adaptive 0.1`, `fixed 2.5`, or a bare number (fixed).
fn parse_temperature(e: &Entry) -> Result<Temperature<f64>, ConfigError> {
    let mut parts = e.value.split_whitespace();
    let first = parts.next().unwrap_or("");
    let num = |t: Option<&str>| -> Result<f64, ConfigError> {
        t.and_then(|t| t.parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v > 0.0)
            .ok_or_else(|| e.err("expected a positive number"))
    };
    let t = match first {
        "auto" => Temperature::Auto(num(parts.next())?),
        "adaptive" => Temperature::Adaptive(num(parts.next())?),
        "fixed" => Temperature::Fixed(num(parts.next())?),
        _ => Temperature::Fixed(num(Some(first))?),
    };
    if parts.next().is_some() {
        return Err(e.err("trailing tokens"));
    }
    Ok(t)
}
