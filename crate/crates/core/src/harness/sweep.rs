//! Δ-sweeps: model errors against their bounds at each radius.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ModelKind, OutputFormat, SweepConfig};
use super::{build_model, Instance, Metadata};
use crate::bounds::{
    directional_bound_aligned, directional_bound_cross, directional_bound_gsh_cross,
    directional_error, loglog_slope, measure_errors, mfn_constants, mn_constants, qs_constants,
    BoundConstants,
};
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

pub const CSV_HEADER: &str = "delta,err_f,bound_f,err_g,bound_g,err_dir_aligned_max,\
bound_dir_aligned,err_dir_cross_max,bound_dir_cross,poised";

/// Roundoff allowance, in units of machine epsilon, when comparing an error
/// with a bound that is exact only in real arithmetic.
const ROUNDOFF_UNITS: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub err_f: f64,
    pub bound_f: Option<f64>,
    pub err_g: f64,
    pub bound_g: Option<f64>,
    pub err_dir_aligned_max: Option<f64>,
    pub bound_dir_aligned: Option<f64>,
    pub err_dir_cross_max: Option<f64>,
    /// Smallest cross bound over the direction pairs.
    pub bound_dir_cross: Option<f64>,
    pub poised: bool,
    /// Every bound in this row holds, pair by pair, up to roundoff.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub slope_err_f: Option<f64>,
    pub slope_err_g: Option<f64>,
    pub slope_err_dir_aligned: Option<f64>,
    pub slope_err_dir_cross: Option<f64>,
    pub rows: usize,
    pub poised_rows: usize,
    pub violations: usize,
    pub all_bounds_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub metadata: Metadata,
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// `Ok(None)` when the theorem's hypotheses fail at this set.
fn constants_or_none(r: Result<BoundConstants>) -> Result<Option<BoundConstants>> {
    match r {
        Ok(c) => Ok(Some(c)),
        Err(Error::NotPoised { .. } | Error::Precondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn within(err: f64, bound: f64, slack: f64) -> bool {
    err <= bound + slack
}

pub fn sweep_row(inst: &Instance, cfg: &SweepConfig, delta: f64) -> Result<SweepRow> {
    let tf = &inst.function;
    let built = build_model(inst, &cfg.model, delta, cfg.tol)?;
    let y = &built.y;
    let radius = y.radius();
    let lip = tf.lipschitz_on(&inst.x0, radius);
    let interpolates = built.interpolation.1;
    let consts = match (&cfg.model, &built.qs_spec) {
        (ModelKind::Mn, _) => constants_or_none(mn_constants(&lip, y, None))?,
        (ModelKind::Mfn, _) => constants_or_none(mfn_constants(&lip, y))?,
        (ModelKind::Qs(_), Some(spec)) if interpolates => {
            constants_or_none(qs_constants(&lip, spec, y))?
        }
        _ => None,
    };
    let meas = measure_errors(tf, &built.model, y, cfg.samples)?;

    let fscale = 1.0
        + y.points()
            .iter()
            .map(|p| tf.eval(p).abs())
            .fold(0.0, f64::max);
    let unit = ROUNDOFF_UNITS * f64::EPSILON * fscale;
    let mut holds = true;

    let bound_f = consts.map(|c| c.kappa_ef * radius * radius);
    let bound_g = consts.map(|c| c.kappa_eg * radius);
    if let Some(b) = bound_f {
        holds &= within(meas.err_f, b, unit);
    }
    if let Some(b) = bound_g {
        holds &= within(meas.err_g, b, unit / radius);
    }

    let e = built.model.hess() - tf.hess(&inst.x0);
    let hess_slack = unit / (radius * radius);
    let pairs = y.antipodal_pairs();
    let halves: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();

    let (mut aligned_err, mut aligned_bound) = (None, None);
    if !halves.is_empty() && interpolates {
        let b = directional_bound_aligned(lip.l_hess, radius);
        let mut worst = 0.0f64;
        for &i in &halves {
            let d = y.direction(i);
            let err = directional_error(&e, &d, &d);
            holds &= within(err, b, hess_slack);
            worst = worst.max(err);
        }
        aligned_err = Some(worst);
        aligned_bound = Some(b);
    }

    let structured_gsh =
        matches!(&cfg.model, ModelKind::Qs(p) if p == "centred" || p == "centered");
    let (mut cross_err, mut cross_bound) = (None, None);
    if halves.len() >= 2 {
        let hess_norm = spectral_norm(&tf.hess(&inst.x0));
        let mut worst = 0.0f64;
        let mut least: Option<f64> = None;
        for &i in &halves {
            for &j in &halves {
                if i == j {
                    continue;
                }
                let (di, dj) = (y.direction(i), y.direction(j));
                let err = directional_error(&e, &di, &dj);
                worst = worst.max(err);
                let b = match (&cfg.model, consts) {
                    (ModelKind::Mn | ModelKind::Mfn, Some(c)) => Some(directional_bound_cross(
                        c.family,
                        c.kappa_ef,
                        lip.l_hess,
                        radius,
                        di.norm(),
                        dj.norm(),
                    )?),
                    (ModelKind::Qs(_), _) if structured_gsh => {
                        Some(directional_bound_gsh_cross(hess_norm, lip.l_hess, radius))
                    }
                    _ => None,
                };
                if let Some(b) = b {
                    holds &= within(err, b, hess_slack);
                    least = Some(least.map_or(b, |l: f64| l.min(b)));
                }
            }
        }
        cross_err = Some(worst);
        cross_bound = least;
    }

    Ok(SweepRow {
        delta: radius,
        err_f: meas.err_f,
        bound_f,
        err_g: meas.err_g,
        bound_g,
        err_dir_aligned_max: aligned_err,
        bound_dir_aligned: aligned_bound,
        err_dir_cross_max: cross_err,
        bound_dir_cross: cross_bound,
        poised: consts.is_some(),
        holds,
    })
}

fn slope_of(
    rows: &[SweepRow],
    fscale: f64,
    pick: impl Fn(&SweepRow) -> Option<f64>,
) -> Option<f64> {
    let (d, e): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| pick(r).map(|e| (r.delta, e)))
        .unzip();
    loglog_slope(&d, &e, fscale)
}

pub fn summarize(rows: &[SweepRow], fscale: f64) -> SweepSummary {
    let violations = rows.iter().filter(|r| !r.holds).count();
    SweepSummary {
        slope_err_f: slope_of(rows, fscale, |r| Some(r.err_f)),
        slope_err_g: slope_of(rows, fscale, |r| Some(r.err_g)),
        slope_err_dir_aligned: slope_of(rows, fscale, |r| r.err_dir_aligned_max),
        slope_err_dir_cross: slope_of(rows, fscale, |r| r.err_dir_cross_max),
        rows: rows.len(),
        poised_rows: rows.iter().filter(|r| r.poised).count(),
        violations,
        all_bounds_hold: violations == 0,
    }
}

/// Runs every Δ of the grid; with `jobs` set, Δ values are spread over that
/// many threads and merged back in grid order.
pub fn cmd_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let inst = Instance::build(cfg)?;
    let deltas = cfg.grid().values();
    let results: Vec<Result<SweepRow>> = match cfg.jobs {
        Some(j) if j > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
            pool.install(|| {
                deltas
                    .par_iter()
                    .map(|&d| sweep_row(&inst, cfg, d))
                    .collect()
            })
        }
        _ => deltas.iter().map(|&d| sweep_row(&inst, cfg, d)).collect(),
    };
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let fscale = 1.0 + inst.function.eval(&inst.x0).abs();
    let summary = summarize(&rows, fscale);
    Ok(SweepResult {
        metadata: inst.metadata,
        rows,
        summary,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cells = [
            cell(Some(r.delta)),
            cell(Some(r.err_f)),
            cell(r.bound_f),
            cell(Some(r.err_g)),
            cell(r.bound_g),
            cell(r.err_dir_aligned_max),
            cell(r.bound_dir_aligned),
            cell(r.err_dir_cross_max),
            cell(r.bound_dir_cross),
            r.poised.to_string(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn render(result: &SweepResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(to_csv(&result.rows)),
        OutputFormat::Json => serde_json::to_string_pretty(result)
            .map(|s| s + "\n")
            .map_err(|e| Error::Numerical(format!("serialization failed: {e}"))),
    }
}
