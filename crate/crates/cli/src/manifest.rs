//! Experiment manifests.
//!
//! ```text
//! out = results          # relative paths resolve against the manifest's directory
//! window = 20
//! config = desk.cfg      # optional run configuration
//! cell = cartpole none 0 1 2
//! cell = nav2d savmpc 0 1 2
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use revshield::envs::EnvKind;
use revshield::trainer::ShieldMode;
use thiserror::Error;

use crate::aggregate::DEFAULT_WINDOW;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("manifest lists no cells")]
    NoCells,
    #[error("manifest has no `out` directory")]
    NoOutput,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub env: EnvKind,
    pub shield: ShieldMode,
    pub seeds: Vec<u64>,
}

impl Cell {
    /// Directory name, e.g. `nav2d_savmpc`.
    pub fn name(&self) -> String {
        format!("{}_{}", self.env, self.shield)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub cells: Vec<Cell>,
    pub out_dir: PathBuf,
    pub window: usize,
    pub config: Option<PathBuf>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses manifest text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ManifestError> {
        let (mut cells, mut out_dir, mut window, mut config) = (Vec::<Cell>::new(), None, DEFAULT_WINDOW, None);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| ManifestError::Line { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            match key {
                "out" => out_dir = Some(base.join(value)),
                "config" => config = Some(base.join(value)),
                "window" => {
                    window = value
                        .parse()
                        .ok()
                        .filter(|w| *w > 0)
                        .ok_or_else(|| err(format!("window must be a positive integer, got {value:?}")))?
                }
                "cell" => {
                    let mut tokens = value.split_whitespace();
                    let env: EnvKind = tokens.next().unwrap_or("").parse().map_err(err)?;
                    let shield: ShieldMode = tokens.next().unwrap_or("").parse().map_err(err)?;
                    let seeds = tokens
                        .map(|t| t.parse::<u64>().map_err(|_| err(format!("bad seed {t:?}"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    if seeds.is_empty() {
                        return Err(err("cell needs at least one seed".into()));
                    }
                    if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
                        return Err(err("seeds within a cell must be distinct".into()));
                    }
                    if cells.iter().any(|c| c.env == env && c.shield == shield) {
                        return Err(err(format!("duplicate cell {env} {shield}")));
                    }
                    cells.push(Cell { env, shield, seeds });
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        if cells.is_empty() {
            return Err(ManifestError::NoCells);
        }
        Ok(Self {
            cells,
            out_dir: out_dir.ok_or(ManifestError::NoOutput)?,
            window,
            config,
        })
    }

    /// Replaces every cell's seeds with `0..n`.
    pub fn with_seed_count(mut self, n: u64) -> Self {
        for c in &mut self.cells {
            c.seeds = (0..n).collect();
        }
        self
    }

    pub fn runs(&self) -> usize {
        self.cells.iter().map(|c| c.seeds.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cells_and_paths() {
        let text = "out = res\nwindow = 5\nconfig = a.cfg\ncell = cartpole none 0 1 2  # base\ncell = nav2d oracle-resample 7\n";
        let m = Manifest::parse(text, Path::new("/x")).unwrap();
        assert_eq!(m.out_dir, PathBuf::from("/x/res"));
        assert_eq!(m.config, Some(PathBuf::from("/x/a.cfg")));
        assert_eq!(m.window, 5);
        assert_eq!(m.cells[0].name(), "cartpole_none");
        assert_eq!(m.cells[1].name(), "nav2d_oracle");
        assert_eq!(m.cells[1].seeds, [7]);
        assert_eq!(m.runs(), 4);
        assert_eq!(m.with_seed_count(10).runs(), 20);
    }

    #[test]
    fn rejects_bad_manifests() {
        for text in [
            "out = r\ncell = cartpole none",
            "out = r\ncell = cartpole none 1 1",
            "out = r\ncell = mujoco none 1",
            "out = r\ncell = cartpole shieldy 1",
            "out = r\ncell = cartpole none x",
            "out = r\ncell = cartpole none 1\ncell = cartpole none 2",
            "out = r\nwindow = 0\ncell = cartpole none 1",
            "out = r",
            "cell = cartpole none 1",
            "out = r\nseeds = 3\ncell = cartpole none 1",
        ] {
            assert!(Manifest::parse(text, Path::new(".")).is_err(), "{text:?} accepted");
        }
    }
}
