//! Cross-seed aggregation: trailing moving average per seed, then pointwise
//! mean and population standard deviation.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::records::{self, EpisodeRow};

pub const DEFAULT_WINDOW: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("nothing to aggregate")]
    Empty,
    #[error("smoothing window must be >= 1")]
    ZeroWindow,
    #[error("series lengths differ ({0} vs {1} episodes)")]
    LengthMismatch(usize, usize),
}

/// Mean and spread of one metric, per episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub seeds: usize,
    pub window: usize,
    /// Mean cumulative environment steps at the end of each episode
    /// (unsmoothed), for plotting against steps instead of episodes.
    pub cum_steps: Vec<f64>,
    pub reward: Band,
    pub cum_violations: Band,
    pub cum_aborts: Band,
}

impl AggregateSeries {
    pub fn len(&self) -> usize {
        self.cum_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum_steps.is_empty()
    }
}

/// Mean of the last `min(window, i + 1)` values at each index `i`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

fn check_lengths(series: &[Vec<f64>]) -> Result<usize, AggregateError> {
    let first = series.first().ok_or(AggregateError::Empty)?.len();
    match series.iter().find(|s| s.len() != first) {
        Some(s) => Err(AggregateError::LengthMismatch(first, s.len())),
        None => Ok(first),
    }
}

/// Smooths every series, then takes the pointwise mean and population std.
pub fn mean_std(series: &[Vec<f64>], window: usize) -> Result<Band, AggregateError> {
    if window == 0 {
        return Err(AggregateError::ZeroWindow);
    }
    let len = check_lengths(series)?;
    let smoothed: Vec<Vec<f64>> = series.iter().map(|s| moving_average(s, window)).collect();
    let n = smoothed.len() as f64;
    let mut band = Band::default();
    for i in 0..len {
        let mean = smoothed.iter().map(|s| s[i]).sum::<f64>() / n;
        let var = smoothed.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / n;
        band.mean.push(mean);
        band.std.push(var.sqrt());
    }
    Ok(band)
}

pub fn aggregate(runs: &[Vec<EpisodeRow>], window: usize) -> Result<AggregateSeries, AggregateError> {
    let column =
        |f: fn(&EpisodeRow) -> f64| -> Vec<Vec<f64>> { runs.iter().map(|r| r.iter().map(f).collect()).collect() };
    let steps = column(|r| r.steps as f64);
    let len = check_lengths(&steps)?;
    let mut cum_steps = vec![0.0; len];
    for run in &steps {
        let mut total = 0.0;
        for (acc, s) in cum_steps.iter_mut().zip(run) {
            total += s;
            *acc += total / runs.len() as f64;
        }
    }
    Ok(AggregateSeries {
        seeds: runs.len(),
        window,
        cum_steps,
        reward: mean_std(&column(|r| r.reward), window)?,
        cum_violations: mean_std(&column(|r| r.cum_violations as f64), window)?,
        cum_aborts: mean_std(&column(|r| r.cum_aborts as f64), window)?,
    })
}

#[derive(Serialize)]
struct AggregateRow {
    episode: usize,
    cum_steps: f64,
    reward_mean: f64,
    reward_std: f64,
    cum_violations_mean: f64,
    cum_violations_std: f64,
    cum_aborts_mean: f64,
    cum_aborts_std: f64,
}

pub fn to_csv(series: &AggregateSeries) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for i in 0..series.len() {
        w.serialize(AggregateRow {
            episode: i,
            cum_steps: series.cum_steps[i],
            reward_mean: series.reward.mean[i],
            reward_std: series.reward.std[i],
            cum_violations_mean: series.cum_violations.mean[i],
            cum_violations_std: series.cum_violations.std[i],
            cum_aborts_mean: series.cum_aborts.mean[i],
            cum_aborts_std: series.cum_aborts.std[i],
        })?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

pub fn write(path: &Path, series: &AggregateSeries) -> anyhow::Result<()> {
    records::write_atomic(path, &to_csv(series)?)?;
    Ok(())
}
