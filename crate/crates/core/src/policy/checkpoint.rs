//! Plain-text policy checkpoints.
//!
//! ```text
//! revshield-policy 1
//! bounds -10.0 10.0
//! actor 4 64 64 2
//! <actor parameters, whitespace separated>
//! critic 4 64 64 1
//! <critic parameters>
//! ```
//!
//! Values are written with round-trip formatting, so save then load is exact.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{Mlp, PolicyError, PolicyParams};
use crate::env::Interval;
use crate::scalar::Scalar;

const MAGIC: &str = "revshield-policy";
const VERSION: u32 = 1;

fn join<S: Scalar>(values: impl IntoIterator<Item = S>) -> String {
    let mut out = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{:?}", v.as_f64()).expect("writing to a String");
    }
    out
}

pub fn save<S: Scalar, W: Write>(params: &PolicyParams<S>, mut w: W) -> Result<(), PolicyError> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "bounds {}", join(params.bounds.iter().flat_map(|b| [b.lo, b.hi])))?;
    for (name, net) in [("actor", &params.actor), ("critic", &params.critic)] {
        let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
        writeln!(w, "{name} {}", sizes.join(" "))?;
        writeln!(w, "{}", join(net.params().iter().copied()))?;
    }
    Ok(())
}

pub fn save_to_string<S: Scalar>(params: &PolicyParams<S>) -> String {
    let mut buf = Vec::new();
    save(params, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn bad(msg: impl Into<String>) -> PolicyError {
    PolicyError::Checkpoint(msg.into())
}

fn parse_values<S: Scalar>(line: &str) -> Result<Vec<S>, PolicyError> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(S::lit)
                .ok_or_else(|| bad(format!("not a finite number: {t:?}")))
        })
        .collect()
}

fn tagged<'a>(line: Option<&'a str>, tag: &str) -> Result<&'a str, PolicyError> {
    let line = line.ok_or_else(|| bad(format!("missing `{tag}` line")))?;
    line.strip_prefix(tag)
        .filter(|rest| rest.is_empty() || rest.starts_with(' '))
        .ok_or_else(|| bad(format!("expected `{tag}`, found {line:?}")))
}

fn read_net<'a, S: Scalar>(lines: &mut impl Iterator<Item = &'a str>, tag: &str) -> Result<Mlp<S>, PolicyError> {
    let sizes = tagged(lines.next(), tag)?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad layer size {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(bad(format!("bad {tag} shape {sizes:?}")));
    }
    let values = parse_values(lines.next().ok_or_else(|| bad(format!("missing {tag} parameters")))?)?;
    let expected = Mlp::<S>::param_count(&sizes);
    if values.len() != expected {
        return Err(bad(format!(
            "{tag} has {} parameters, shape needs {expected}",
            values.len()
        )));
    }
    Ok(Mlp::from_params(&sizes, values).expect("count checked"))
}

pub fn load<S: Scalar, R: BufRead>(r: R) -> Result<PolicyParams<S>, PolicyError> {
    let text: Vec<String> = r.lines().collect::<Result<_, _>>()?;
    let mut lines = text.iter().map(|l| l.trim_end()).filter(|l| !l.is_empty());

    let version = tagged(lines.next(), MAGIC)?.trim();
    if version != VERSION.to_string() {
        return Err(bad(format!("unsupported version {version:?}")));
    }
    let flat: Vec<S> = parse_values(tagged(lines.next(), "bounds")?)?;
    if flat.is_empty() || !flat.len().is_multiple_of(2) {
        return Err(bad("bounds need lo/hi pairs"));
    }
    let bounds: Vec<Interval<S>> = flat.chunks_exact(2).map(|p| Interval::new(p[0], p[1])).collect();
    if bounds.iter().any(|b| !(b.lo < b.hi)) {
        return Err(bad("each bound needs lo < hi"));
    }
    let actor = read_net::<S>(&mut lines, "actor")?;
    let critic = read_net::<S>(&mut lines, "critic")?;
    if let Some(extra) = lines.next() {
        return Err(bad(format!("trailing content {extra:?}")));
    }
    if actor.input_dim() != critic.input_dim() {
        return Err(bad("actor and critic disagree on state dimension"));
    }
    if actor.output_dim() != 2 * bounds.len() || critic.output_dim() != 1 {
        return Err(bad("network outputs do not match the action dimension"));
    }
    Ok(PolicyParams { actor, critic, bounds })
}

pub fn load_from_str<S: Scalar>(text: &str) -> Result<PolicyParams<S>, PolicyError> {
    load(text.as_bytes())
}
