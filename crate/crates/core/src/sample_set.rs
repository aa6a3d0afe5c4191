//! Sample sets, structured `{x0, x0 ± d_i}` sets and poisedness diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cond_inf, default_rtol, ensure_finite_mat, ensure_finite_vec, rank, singular_values,
    solve_min_norm, Mat, Vector,
};
use crate::oracle::Oracle;
use crate::simplex::DirectionPack;

/// Relative tolerance for treating two directions as the same point.
pub const DUPLICATE_RTOL: f64 = 1e-12;

/// Center `x0` plus direction matrix `D` (one column per sample offset).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    x0: Vector,
    d: Mat,
}

fn same_direction(a: &Vector, b: &Vector) -> bool {
    if a == b {
        return true;
    }
    let scale = a.norm().max(b.norm());
    (a - b).norm() <= DUPLICATE_RTOL * scale
}

impl SampleSet {
    pub fn new(x0: Vector, d: Mat) -> Result<Self> {
        ensure_finite_vec(&x0, "x0")?;
        ensure_finite_mat(&d, "direction matrix")?;
        if d.nrows() != x0.len() {
            return Err(Error::invalid(format!(
                "directions have {} rows but x0 has dimension {}",
                d.nrows(),
                x0.len()
            )));
        }
        let cols: Vec<Vector> = d.column_iter().map(|c| c.into_owned()).collect();
        for (i, c) in cols.iter().enumerate() {
            if c.norm() == 0.0 {
                return Err(Error::invalid(format!("direction {i} is zero")));
            }
            for (j, e) in cols.iter().enumerate().take(i) {
                if same_direction(c, e) {
                    return Err(Error::invalid(format!("directions {j} and {i} coincide")));
                }
            }
        }
        Ok(SampleSet { x0, d })
    }

    /// Builds a set from offsets, silently dropping zero and repeated offsets.
    pub fn from_offsets(x0: Vector, offsets: &[Vector]) -> Result<Self> {
        let scale = offsets.iter().map(|o| o.norm()).fold(0.0, f64::max);
        let mut kept: Vec<Vector> = Vec::new();
        for o in offsets {
            if o.norm() <= DUPLICATE_RTOL * scale {
                continue;
            }
            if kept.iter().any(|k| same_direction(k, o)) {
                continue;
            }
            kept.push(o.clone());
        }
        if kept.is_empty() {
            return Err(Error::invalid("no nonzero offsets"));
        }
        Self::new(x0, Mat::from_columns(&kept))
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn directions(&self) -> &Mat {
        &self.d
    }

    pub fn direction(&self, i: usize) -> Vector {
        self.d.column(i).into_owned()
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    /// Number of nonzero directions `m`.
    pub fn len(&self) -> usize {
        self.d.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.d.ncols() == 0
    }

    /// `max_i |d_i|`.
    pub fn radius(&self) -> f64 {
        self.d.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `D / radius`.
    pub fn normalize(&self) -> Mat {
        &self.d / self.radius()
    }

    pub fn scale(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {t}"
            )));
        }
        Ok(SampleSet {
            x0: self.x0.clone(),
            d: &self.d * t,
        })
    }

    /// Same directions around a new center.
    pub fn recentre(&self, x0: Vector) -> Result<Self> {
        Self::new(x0, self.d.clone())
    }

    /// All points of the set, center first.
    pub fn points(&self) -> Vec<Vector> {
        let mut out = vec![self.x0.clone()];
        out.extend(self.d.column_iter().map(|c| &self.x0 + c));
        out
    }

    /// `f(x0 + d_i) - f(x0)` per column, plus `f(x0)`.
    pub fn delta_f(&self, f: &Oracle) -> Result<(f64, Vector)> {
        let f0 = f.eval(&self.x0)?;
        let mut out = Vector::zeros(self.len());
        for (i, c) in self.d.column_iter().enumerate() {
            out[i] = f.eval_offset(&self.x0, &c.into_owned())? - f0;
        }
        Ok((f0, out))
    }

    /// Index of the first column equal to `-d_i`, if any.
    fn negation_of(&self, i: usize) -> Option<usize> {
        let neg = -self.direction(i);
        (0..i).find(|&j| same_direction(&self.direction(j), &neg))
    }

    /// Column indices with `±` pairs collapsed to their first member.
    pub fn canonical_directions(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.negation_of(i).is_none())
            .collect()
    }

    /// `(i, j)` with `d_j = -d_i` and `j > i`.
    pub fn antipodal_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .filter_map(|j| self.negation_of(j).map(|i| (i, j)))
            .collect()
    }
}

/// Structured set `{x0, x0 + d_i, x0 - d_i}` given by its half `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSet {
    x0: Vector,
    dhalf: Mat,
}

impl StructuredSet {
    pub fn new(x0: Vector, dhalf: Mat) -> Result<Self> {
        let s = StructuredSet { x0, dhalf };
        // Validates dimensions and the distinctness of the 2p directions.
        s.expand()?;
        Ok(s)
    }

    /// `d_i = h e_i` for `i < p`.
    pub fn coordinate(x0: Vector, p: usize, h: f64) -> Result<Self> {
        let n = x0.len();
        if p == 0 || p > n {
            return Err(Error::invalid(format!(
                "need 1 <= p <= n = {n}, got p = {p}"
            )));
        }
        Self::new(x0, Mat::identity(n, p) * h)
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn dhalf(&self) -> &Mat {
        &self.dhalf
    }

    pub fn p(&self) -> usize {
        self.dhalf.ncols()
    }

    pub fn radius(&self) -> f64 {
        self.dhalf
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {t}"
            )));
        }
        Ok(StructuredSet {
            x0: self.x0.clone(),
            dhalf: &self.dhalf * t,
        })
    }

    /// `D = [d_1 .. d_p, -d_1 .. -d_p]`.
    pub fn expand(&self) -> Result<SampleSet> {
        let p = self.dhalf.ncols();
        let mut d = Mat::zeros(self.dhalf.nrows(), 2 * p);
        d.columns_mut(0, p).copy_from(&self.dhalf);
        d.columns_mut(p, p).copy_from(&(-&self.dhalf));
        SampleSet::new(self.x0.clone(), d)
    }

    /// `S = D`, `T_i = [-d_i]`.
    pub fn as_gsh_pack(&self) -> DirectionPack {
        let ts = self
            .dhalf
            .column_iter()
            .map(|c| Mat::from_column_slice(c.len(), 1, (-c).as_slice()))
            .collect();
        DirectionPack::per_direction(self.dhalf.clone(), ts).expect("valid structured pack")
    }
}

/// Matrices of the MFN analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct PfMatrices {
    /// `P_ij = (dbar_i . dbar_j)^2 / 4`.
    pub p: Mat,
    /// `[[radius^4 P, D^T], [D, 0]]`.
    pub f_tilde: Mat,
    /// `[[P, Dbar^T], [Dbar, 0]]`.
    pub f: Mat,
}

fn kkt_block(top_left: &Mat, d: &Mat) -> Mat {
    let m = top_left.nrows();
    let n = d.nrows();
    let mut out = Mat::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(top_left);
    out.view_mut((0, m), (m, n)).copy_from(&d.transpose());
    out.view_mut((m, 0), (n, m)).copy_from(d);
    out
}

pub fn build_p_f(y: &SampleSet) -> PfMatrices {
    let dbar = y.normalize();
    let k = dbar.transpose() * &dbar;
    let p = k.map(|v| 0.25 * v * v);
    let r4 = y.radius().powi(4);
    PfMatrices {
        f_tilde: kkt_block(&(&p * r4), y.directions()),
        f: kkt_block(&p, &dbar),
        p,
    }
}

/// Default relative residual tolerance for feasibility decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

pub(crate) fn relative_residual(a: &Mat, x: &Vector, b: &Vector) -> f64 {
    let r = (a * x - b).norm();
    let scale = a.norm() * x.norm() + b.norm();
    if scale > 0.0 {
        r / scale
    } else {
        0.0
    }
}

/// Min-norm solution of the MN multiplier system `G lambda = delta`, with
/// `G = K + K∘K / 4` and `K = D^T D`, solved in normalized form. Returns
/// `(lambda, relative residual)`.
pub(crate) fn mn_multipliers(y: &SampleSet, delta: &Vector) -> Result<(Vector, f64)> {
    let r = y.radius();
    let dbar = y.normalize();
    let k = dbar.transpose() * &dbar;
    let g = &k + k.map(|v| 0.25 * r * r * v * v);
    let rhs = delta / (r * r);
    let sol = solve_min_norm(&g, &rhs, None)?;
    let rel = relative_residual(&g, &sol.x, &rhs);
    Ok((sol.x, rel))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoisednessReport {
    pub mn_feasible: bool,
    /// Relative residual of the MN multiplier system.
    pub mn_residual: f64,
    /// Numerical invertibility of the normalized KKT matrix `F`.
    pub mfn_poised: bool,
    /// `sigma_min(F) / sigma_max(F)`; the poisedness surrogate.
    pub sigma_ratio: f64,
    /// Infinity-norm condition number of `F`.
    pub f_cond: f64,
    pub rank_d: usize,
    /// Feasible with `rank D = n`, so the MFN gradient is unique too.
    pub mfn_unique: bool,
}

/// `fvals[i] = f(x0 + d_i) - f(x0)`.
pub fn poisedness(y: &SampleSet, fvals: &Vector, tol: f64) -> Result<PoisednessReport> {
    if fvals.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} values for {} directions",
            fvals.len(),
            y.len()
        )));
    }
    let (_, mn_residual) = mn_multipliers(y, fvals)?;
    let mn_feasible = mn_residual <= tol;
    let pf = build_p_f(y);
    let s = singular_values(&pf.f)?;
    let sigma_ratio = s[s.len() - 1] / s[0];
    let mfn_poised = sigma_ratio > default_rtol(pf.f.nrows(), pf.f.ncols());
    let rank_d = rank(y.directions(), None)?;
    Ok(PoisednessReport {
        mn_feasible,
        mn_residual,
        mfn_poised,
        sigma_ratio,
        f_cond: cond_inf(&pf.f),
        rank_d,
        mfn_unique: mn_feasible && rank_d == y.dim(),
    })
}

/// On-disk sample set: `{"x0": [...], "directions": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSetFile {
    pub x0: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

impl SampleSetFile {
    pub fn to_sample_set(&self) -> Result<SampleSet> {
        let n = self.x0.len();
        if self.directions.is_empty() {
            return Err(Error::invalid("sample file lists no directions"));
        }
        if let Some(bad) = self.directions.iter().find(|d| d.len() != n) {
            return Err(Error::invalid(format!(
                "direction of length {} in a set of dimension {n}",
                bad.len()
            )));
        }
        let cols: Vec<Vector> = self
            .directions
            .iter()
            .map(|d| Vector::from_column_slice(d))
            .collect();
        SampleSet::new(
            Vector::from_column_slice(&self.x0),
            Mat::from_columns(&cols),
        )
    }

    pub fn from_sample_set(y: &SampleSet) -> Self {
        SampleSetFile {
            x0: y.x0().iter().copied().collect(),
            directions: y
                .directions()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }
}
