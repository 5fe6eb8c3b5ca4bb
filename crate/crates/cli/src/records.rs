//! Per-seed episode CSVs.

use std::fs;
use std::io;
use std::path::Path;

use revshield::trainer::RunMetrics;
use serde::{Deserialize, Serialize};

pub const HEADER: &str = "episode,steps,reward,violated,aborted,cum_violations,cum_aborts";

/// One CSV row. Flags are written as 0/1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub steps: usize,
    pub reward: f64,
    pub violated: u8,
    pub aborted: u8,
    pub cum_violations: usize,
    pub cum_aborts: usize,
}

pub fn rows(metrics: &RunMetrics) -> Vec<EpisodeRow> {
    let (mut violations, mut aborts) = (0, 0);
    metrics
        .records
        .iter()
        .map(|r| {
            violations += r.violated as usize;
            aborts += r.aborted as usize;
            EpisodeRow {
                episode: r.episode,
                steps: r.steps,
                reward: r.reward,
                violated: r.violated as u8,
                aborted: r.aborted as u8,
                cum_violations: violations,
                cum_aborts: aborts,
            }
        })
        .collect()
}

pub fn to_csv(rows: &[EpisodeRow]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

pub fn from_csv(bytes: &[u8]) -> Result<Vec<EpisodeRow>, csv::Error> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != HEADER {
        return Err(csv::Error::from(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unexpected header {:?}", header.join(",")),
        )));
    }
    r.deserialize().collect()
}

/// Writes through a temporary file so an interrupted run never leaves a
/// truncated CSV behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn read(path: &Path) -> Result<Vec<EpisodeRow>, csv::Error> {
    from_csv(&fs::read(path)?)
}
