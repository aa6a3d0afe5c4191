//! Sweep configuration: flag and JSON-file forms, merged with flags winning.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample_set::DEFAULT_TOL;

/// Where the base sample set comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetSpec {
    File(PathBuf),
    /// `{x0, x0 ± e_i}`, `i < p`.
    Coordinate(usize),
    /// `{x0, x0 ± u_i}` with `p` seeded uniform unit directions.
    Random {
        p: usize,
        seed: Option<u64>,
    },
}

impl FromStr for SetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_p = |t: &str| {
            t.parse::<usize>()
                .ok()
                .filter(|&p| p > 0)
                .ok_or_else(|| Error::InvalidInput(format!("bad direction count {t:?}")))
        };
        if let Some(rest) = s.strip_prefix("structured:") {
            return Ok(SetSpec::Coordinate(parse_p(rest)?));
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let mut it = rest.splitn(2, ':');
            let p = parse_p(it.next().unwrap_or(""))?;
            let seed = match it.next() {
                Some(t) => Some(
                    t.parse::<u64>()
                        .map_err(|_| Error::InvalidInput(format!("bad seed {t:?}")))?,
                ),
                None => None,
            };
            return Ok(SetSpec::Random { p, seed });
        }
        let path = s.strip_prefix("file:").unwrap_or(s);
        if path.is_empty() {
            return Err(Error::InvalidInput("empty sample set path".into()));
        }
        Ok(SetSpec::File(PathBuf::from(path)))
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::File(p) => write!(f, "{}", p.display()),
            SetSpec::Coordinate(p) => write!(f, "structured:{p}"),
            SetSpec::Random { p, seed: Some(s) } => write!(f, "random:{p}:{s}"),
            SetSpec::Random { p, seed: None } => write!(f, "random:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelKind {
    Mn,
    Mfn,
    Qs(String),
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mn" => Ok(ModelKind::Mn),
            "mfn" => Ok(ModelKind::Mfn),
            _ => match s.strip_prefix("qs:") {
                Some(p) if !p.is_empty() => Ok(ModelKind::Qs(p.to_string())),
                _ => Err(Error::InvalidInput(format!(
                    "unknown model {s:?}; expected mn, mfn or qs:<preset>"
                ))),
            },
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Mn => write!(f, "mn"),
            ModelKind::Mfn => write!(f, "mfn"),
            ModelKind::Qs(p) => write!(f, "qs:{p}"),
        }
    }
}

/// `start * factor^k`, `k < count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaGrid {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl DeltaGrid {
    pub fn new(start: f64, factor: f64, count: usize) -> Result<Self> {
        if !(start.is_finite() && start > 0.0) {
            return Err(Error::InvalidInput(format!(
                "delta start must be positive, got {start}"
            )));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::InvalidInput(format!(
                "delta factor must lie in (0, 1) for a decreasing grid, got {factor}"
            )));
        }
        if count < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 deltas, got {count}"
            )));
        }
        Ok(DeltaGrid {
            start,
            factor,
            count,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.start * self.factor.powi(k as i32))
            .collect()
    }
}

impl FromStr for DeltaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad =
            || Error::InvalidInput(format!("bad delta grid {s:?}; expected start:factor:count"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].parse().map_err(|_| bad())?;
        let factor = parts[1].parse().map_err(|_| bad())?;
        let count = parts[2].parse().map_err(|_| bad())?;
        DeltaGrid::new(start, factor, count)
    }
}

impl fmt::Display for DeltaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.factor, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidInput(format!("unknown format {other:?}"))),
        }
    }
}

/// Every setting optional; used both for `--config` files and for flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub function: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub set: Option<String>,
    pub model: Option<String>,
    pub deltas: Option<String>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            function: over.function.or(self.function),
            x0: over.x0.or(self.x0),
            set: over.set.or(self.set),
            model: over.model.or(self.model),
            deltas: over.deltas.or(self.deltas),
            samples: over.samples.or(self.samples),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            jobs: over.jobs.or(self.jobs),
            seed: over.seed.or(self.seed),
            tol: over.tol.or(self.tol),
        }
    }
}

pub const DEFAULT_SAMPLES: usize = 256;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_DELTAS: &str = "1:0.5:13";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub function: String,
    /// Taken from the sample file when absent.
    pub x0: Option<Vec<f64>>,
    pub set: SetSpec,
    pub model: ModelKind,
    /// Sweeps default to [`DEFAULT_DELTAS`]; `model` uses the first value as
    /// the set radius when given.
    pub deltas: Option<DeltaGrid>,
    pub samples: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub jobs: Option<usize>,
    pub seed: u64,
    pub tol: f64,
}

impl SweepConfig {
    pub fn grid(&self) -> DeltaGrid {
        self.deltas
            .unwrap_or_else(|| DEFAULT_DELTAS.parse().expect("valid default grid"))
    }

    pub fn resolve(p: PartialConfig) -> Result<Self> {
        let function = p
            .function
            .ok_or_else(|| Error::InvalidInput("--function is required".into()))?;
        let set: SetSpec = p
            .set
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("--set is required".into()))?
            .parse()?;
        if p.x0.is_none() && !matches!(set, SetSpec::File(_)) {
            return Err(Error::InvalidInput(
                "--x0 is required unless --set names a file".into(),
            ));
        }
        if let Some(x0) = &p.x0 {
            if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "x0 must be a nonempty finite vector".into(),
                ));
            }
        }
        let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
        if samples == 0 {
            return Err(Error::InvalidInput("--samples must be positive".into()));
        }
        if p.jobs == Some(0) {
            return Err(Error::InvalidInput("--jobs must be positive".into()));
        }
        let tol = p.tol.unwrap_or(DEFAULT_TOL);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        Ok(SweepConfig {
            function,
            x0: p.x0,
            set,
            model: p.model.as_deref().unwrap_or("mn").parse()?,
            deltas: p.deltas.as_deref().map(str::parse).transpose()?,
            samples,
            out: p.out,
            format: p
                .format
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or_default(),
            jobs: p.jobs,
            seed: p.seed.unwrap_or(DEFAULT_SEED),
            tol,
        })
    }
}

/// Parses `"1,2.5,-3"` (brackets optional).
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    let t = s.trim().trim_start_matches('[').trim_end_matches(']');
    t.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad number {x:?} in {s:?}")))
        })
        .collect()
}
