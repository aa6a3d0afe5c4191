//! Experiment plumbing behind the `dfoq` binary.

pub mod config;
pub mod random;
pub mod sweep;
pub mod verify;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::models::{
    build_qs, interpolation_check, solve_mfn_tol, solve_mn_tol, QSSpec, QuadraticModel,
    SolveDiagnostics,
};
use crate::sample_set::{poisedness, SampleSet, SampleSetFile};
use crate::testbed::{by_name, TestFunction};
use config::{ModelKind, SetSpec, SweepConfig};

/// A resolved experiment: test function, center and base directions.
#[derive(Debug, Clone)]
pub struct Instance {
    pub function: TestFunction,
    pub x0: Vector,
    /// Directions of the base set (`[D, -D]` for structured sources).
    pub directions: Mat,
    /// `D` for structured sources, else the file's directions; the `S` of QS
    /// presets.
    pub half: Mat,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub function: String,
    pub n: usize,
    pub x0: Vec<f64>,
    pub set: String,
    pub model: String,
    /// Seed of the random direction generator, when one was used.
    pub direction_seed: Option<u64>,
    pub samples: usize,
    pub tol: f64,
}

impl Instance {
    pub fn build(cfg: &SweepConfig) -> Result<Self> {
        let (x0, half, directions, seed) = match &cfg.set {
            SetSpec::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidInput(format!("cannot read {}: {e}", path.display()))
                })?;
                let file: SampleSetFile = serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidInput(format!("bad sample file {}: {e}", path.display()))
                })?;
                let mut y = file.to_sample_set()?;
                if let Some(x0) = &cfg.x0 {
                    if x0.len() != y.dim() {
                        return Err(Error::InvalidInput(format!(
                            "--x0 has {} entries, sample file has dimension {}",
                            x0.len(),
                            y.dim()
                        )));
                    }
                    y = y.recentre(Vector::from_column_slice(x0))?;
                }
                let d = y.directions().clone();
                (y.x0().clone(), d.clone(), d, None)
            }
            SetSpec::Coordinate(p) => {
                let x0 = Vector::from_column_slice(cfg.x0.as_deref().unwrap_or_default());
                let n = x0.len();
                if *p > n {
                    return Err(Error::InvalidInput(format!("need p <= n = {n}, got {p}")));
                }
                let half = Mat::identity(n, *p);
                (x0, half.clone(), expand(&half), None)
            }
            SetSpec::Random { p, seed } => {
                let x0 = Vector::from_column_slice(cfg.x0.as_deref().unwrap_or_default());
                let seed = seed.unwrap_or(cfg.seed);
                let half = random::unit_directions(&mut random::rng(seed), x0.len(), *p);
                (x0, half.clone(), expand(&half), Some(seed))
            }
        };
        if x0.is_empty() {
            return Err(Error::InvalidInput("x0 must be nonempty".into()));
        }
        let function = by_name(&cfg.function, x0.len())?;
        let metadata = Metadata {
            function: cfg.function.clone(),
            n: x0.len(),
            x0: x0.iter().copied().collect(),
            set: cfg.set.to_string(),
            model: cfg.model.to_string(),
            direction_seed: seed,
            samples: cfg.samples,
            tol: cfg.tol,
        };
        Ok(Instance {
            function,
            x0,
            directions,
            half,
            metadata,
        })
    }

    /// Base set scaled to radius `delta`.
    pub fn sample_set(&self, delta: f64) -> Result<SampleSet> {
        let y = SampleSet::new(self.x0.clone(), self.directions.clone())?;
        y.scale(delta / y.radius())
    }

    /// QS spec whose full point set has radius `delta`, and that point set.
    pub fn qs_spec(&self, preset: &str, delta: f64) -> Result<(QSSpec, SampleSet)> {
        let base = QSSpec::preset(preset, &self.half)?
            .sample_set(&self.x0)?
            .radius();
        let spec = QSSpec::preset(preset, &(&self.half * (delta / base)))?;
        let y = spec.sample_set(&self.x0)?;
        Ok((spec, y))
    }
}

fn expand(half: &Mat) -> Mat {
    let (n, p) = half.shape();
    let mut d = Mat::zeros(n, 2 * p);
    d.columns_mut(0, p).copy_from(half);
    d.columns_mut(p, p).copy_from(&(-half));
    d
}

/// A model built for an instance at one radius, with what the bounds need.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: QuadraticModel,
    pub y: SampleSet,
    pub qs_spec: Option<QSSpec>,
    pub diagnostics: Option<SolveDiagnostics>,
    /// Largest interpolation violation over `y`, and whether it is within
    /// tolerance.
    pub interpolation: (f64, bool),
}

pub fn build_model(inst: &Instance, kind: &ModelKind, delta: f64, tol: f64) -> Result<BuiltModel> {
    let f = inst.function.oracle();
    let (model, y, qs_spec, diagnostics) = match kind {
        ModelKind::Mn | ModelKind::Mfn => {
            let y = inst.sample_set(delta)?;
            let (m, d) = if *kind == ModelKind::Mn {
                solve_mn_tol(&f, &y, tol)?
            } else {
                solve_mfn_tol(&f, &y, tol)?
            };
            (m, y, None, Some(d))
        }
        ModelKind::Qs(preset) => {
            let (spec, y) = inst.qs_spec(preset, delta)?;
            (build_qs(&f, &inst.x0, &spec)?, y, Some(spec), None)
        }
    };
    let scale_tol = tol.max(1e-9);
    let interpolation = interpolation_check(&model, &f, &y, scale_tol)?;
    Ok(BuiltModel {
        model,
        y,
        qs_spec,
        diagnostics,
        interpolation,
    })
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vec_of(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Serialized model plus diagnostics, as printed by `dfoq model`.
pub fn model_json(built: &BuiltModel, inst: &Instance, tol: f64) -> Result<Value> {
    let m = &built.model;
    let f = inst.function.oracle();
    let (_, df) = built.y.delta_f(&f)?;
    let report = poisedness(&built.y, &df, tol)?;
    let mut diagnostics = json!({
        "interpolation_error": built.interpolation.0,
        "interpolates": built.interpolation.1,
        "poisedness": report,
        "points": built.y.len() + 1,
    });
    if let Some(d) = &built.diagnostics {
        let extra = json!({
            "kkt_residual": d.kkt_residual,
            "feasibility_residual": d.feasibility_residual,
            "alpha_unique": d.alpha_unique,
            "hessian_unique": d.hessian_unique,
            "multipliers": vec_of(&d.multipliers),
        });
        if let (Value::Object(a), Value::Object(b)) = (&mut diagnostics, extra) {
            a.extend(b);
        }
    }
    Ok(json!({
        "x0": vec_of(&m.x0),
        "c": m.c,
        "g": vec_of(&m.g),
        "H": rows(&m.h),
        "symmetric": m.symmetric,
        "diagnostics": diagnostics,
        "metadata": inst.metadata,
    }))
}

/// `dfoq model`: the set at radius `deltas.start`, or as given when no grid
/// is configured.
pub fn cmd_model(cfg: &SweepConfig) -> Result<Value> {
    let inst = Instance::build(cfg)?;
    let delta = match cfg.deltas {
        Some(g) => g.start,
        None => SampleSet::new(inst.x0.clone(), inst.directions.clone())?.radius(),
    };
    let delta = match (&cfg.model, cfg.deltas) {
        // Without a grid the QS presets use `half` unscaled.
        (ModelKind::Qs(p), None) => QSSpec::preset(p, &inst.half)?
            .sample_set(&inst.x0)?
            .radius(),
        _ => delta,
    };
    let built = build_model(&inst, &cfg.model, delta, cfg.tol)?;
    model_json(&built, &inst, cfg.tol)
}
