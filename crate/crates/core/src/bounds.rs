//! Fully linear constants, directional Hessian bounds, and the empirical
//! errors they are checked against.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::halton::ball_points;
use crate::linalg::{
    default_rtol, matrix_norm, pinv, rank, singular_values, spectral_norm, svd, sym_part, Mat,
    NormKind, Vector,
};
use crate::models::{QSSpec, QuadraticModel};
use crate::sample_set::{build_p_f, SampleSet};
use crate::testbed::TestFunction;

/// Smoothness constants valid on a ball of radius `region_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzData {
    pub l_grad: f64,
    pub l_hess: f64,
    /// Bound on `|grad f|` over the region.
    pub kappa_g: f64,
    pub region_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    Mn,
    Mfn,
    Qs,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub kappa_mh: f64,
    pub kappa_ef: f64,
    pub kappa_eg: f64,
    pub family: Family,
}

/// Constants of a quadratic interpolation model with `|H| <= kappa_mh`:
/// `kef = (L + kmh)/2 * sqrt(n) |Dbar^+|_1 + (L + kmh)/2`,
/// `keg = 2 kef + 2 kmh`. Requires `D` of full row rank.
pub fn kappa_generic(l_grad: f64, kappa_mh: f64, y: &SampleSet) -> Result<BoundConstants> {
    if !(l_grad >= 0.0 && kappa_mh >= 0.0) {
        return Err(Error::invalid(
            "Lipschitz and Hessian constants must be non-negative",
        ));
    }
    if rank(y.directions(), None)? < y.dim() {
        return Err(Error::Precondition(
            "directions do not span the space".into(),
        ));
    }
    let dbar_pinv = pinv(&y.normalize(), None)?;
    let n1 = matrix_norm(&dbar_pinv, NormKind::Op1)?;
    let half = 0.5 * (l_grad + kappa_mh);
    let kappa_ef = half * (y.dim() as f64).sqrt() * n1 + half;
    Ok(BoundConstants {
        kappa_mh,
        kappa_ef,
        kappa_eg: 2.0 * kappa_ef + 2.0 * kappa_mh,
        family: Family::Generic,
    })
}

/// `(L/4) m |F^-1|_inf` with `F` the normalized KKT matrix.
pub fn kappa_mh_mfn(l_grad: f64, y: &SampleSet) -> Result<f64> {
    let f = build_p_f(y).f;
    let s = singular_values(&f)?;
    let ratio = s[s.len() - 1] / s[0];
    if ratio <= default_rtol(f.nrows(), f.ncols()) {
        return Err(Error::NotPoised { ratio });
    }
    let inv = f.try_inverse().ok_or(Error::NotPoised { ratio })?;
    Ok(0.25 * l_grad * y.len() as f64 * matrix_norm(&inv, NormKind::OpInf)?)
}

/// `sqrt((kappa_g + kappa_eg_mfn * delta_bar)^2 + kappa_mh_mfn^2)`.
pub fn kappa_mh_mn(kappa_g: f64, kappa_eg_mfn: f64, delta_bar: f64, kappa_mh_mfn: f64) -> f64 {
    (kappa_g + kappa_eg_mfn * delta_bar).hypot(kappa_mh_mfn)
}

fn normalized_pinv_norm(m: &Mat) -> Result<f64> {
    let r = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if r == 0.0 {
        return Err(Error::invalid("zero direction matrix"));
    }
    Ok(spectral_norm(&pinv(&(m / r), None)?))
}

/// `L sum_k |beta_k| |Sbar_k^+| sqrt(sum_i q_i |Tbar_i^+|^2)`.
pub fn kappa_mh_qs(l_grad: f64, spec: &QSSpec) -> Result<f64> {
    let mut total = 0.0;
    for term in &spec.hess_terms {
        if term.beta == 0.0 {
            continue;
        }
        let pack = &term.pack;
        let mut sum = 0.0;
        for i in 0..pack.p() {
            let t = pack.frame(i);
            sum += t.ncols() as f64 * normalized_pinv_norm(t)?.powi(2);
        }
        total += term.beta.abs() * normalized_pinv_norm(pack.s())? * sum.sqrt();
    }
    Ok(l_grad * total)
}

pub fn mfn_constants(lip: &LipschitzData, y: &SampleSet) -> Result<BoundConstants> {
    let kmh = kappa_mh_mfn(lip.l_grad, y)?;
    let c = kappa_generic(lip.l_grad, kmh, y)?;
    Ok(BoundConstants {
        family: Family::Mfn,
        ..c
    })
}

/// `delta_bar` defaults to the set radius.
pub fn mn_constants(
    lip: &LipschitzData,
    y: &SampleSet,
    delta_bar: Option<f64>,
) -> Result<BoundConstants> {
    let r = y.radius();
    let delta_bar = delta_bar.unwrap_or(r);
    if delta_bar < r {
        return Err(Error::invalid(format!(
            "delta_bar {delta_bar} is below the set radius {r}"
        )));
    }
    let mfn = mfn_constants(lip, y)?;
    let kmh = kappa_mh_mn(lip.kappa_g, mfn.kappa_eg, delta_bar, mfn.kappa_mh);
    let c = kappa_generic(lip.l_grad, kmh, y)?;
    Ok(BoundConstants {
        family: Family::Mn,
        ..c
    })
}

/// Constants for an interpolating QS model whose points form `y`.
pub fn qs_constants(lip: &LipschitzData, spec: &QSSpec, y: &SampleSet) -> Result<BoundConstants> {
    let kmh = kappa_mh_qs(lip.l_grad, spec)?;
    let c = kappa_generic(lip.l_grad, kmh, y)?;
    Ok(BoundConstants {
        family: Family::Qs,
        ..c
    })
}

/// `L_hess * delta / 3`.
pub fn directional_bound_aligned(l_hess: f64, delta: f64) -> f64 {
    l_hess * delta / 3.0
}

fn require_mn_or_mfn(family: Family) -> Result<()> {
    match family {
        Family::Mn | Family::Mfn => Ok(()),
        other => Err(Error::invalid(format!(
            "bound stated for MN and MFN only, got {other:?}"
        ))),
    }
}

/// `4 kef delta^2 / (|d_i||d_j|) + (2L/3) delta^3 / (|d_i||d_j|)`.
pub fn directional_bound_cross(
    family: Family,
    kappa_ef: f64,
    l_hess: f64,
    delta: f64,
    norm_di: f64,
    norm_dj: f64,
) -> Result<f64> {
    require_mn_or_mfn(family)?;
    if !(norm_di > 0.0 && norm_dj > 0.0) {
        return Err(Error::invalid("direction norms must be positive"));
    }
    let nn = norm_di * norm_dj;
    Ok(4.0 * kappa_ef * delta * delta / nn + 2.0 * l_hess / 3.0 * delta.powi(3) / nn)
}

/// `(|v|_1^2 - |v|_inf^2) / |v|^2`.
fn spread_ratio(v: &Vector) -> f64 {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    let linf = v.amax();
    (l1 * l1 - linf * linf) / v.norm_squared()
}

fn max_col_norm(m: &Mat) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Bound on `|dhat^T (H - hess f(x0)) dhat|` for an arbitrary `d`, with
/// `v = D^+ d` and `D = dhalf` of full row rank.
pub fn directional_bound_general(
    family: Family,
    kappa_ef: f64,
    l_hess: f64,
    dhalf: &Mat,
    d: &Vector,
) -> Result<f64> {
    require_mn_or_mfn(family)?;
    if d.norm() == 0.0 {
        return Err(Error::invalid("direction must be nonzero"));
    }
    if rank(dhalf, None)? < dhalf.nrows() {
        return Err(Error::Precondition("D must have full row rank".into()));
    }
    let delta = max_col_norm(dhalf);
    let dp = pinv(&(dhalf / delta), None)?;
    let np2 = spectral_norm(&dp).powi(2);
    let v = pinv(dhalf, None)? * d;
    let r = spread_ratio(&v);
    Ok(4.0 * r * kappa_ef * np2 + l_hess / 3.0 * np2 * (2.0 * r + 1.0) * delta)
}

/// Bound on `|H - hess f(x0)|`, the maximum of the general bound over `d`.
pub fn hess_error_bound_global(
    family: Family,
    kappa_ef: f64,
    l_hess: f64,
    dhalf: &Mat,
) -> Result<f64> {
    require_mn_or_mfn(family)?;
    if rank(dhalf, None)? < dhalf.nrows() {
        return Err(Error::Precondition("D must have full row rank".into()));
    }
    let delta = max_col_norm(dhalf);
    let np2 = spectral_norm(&pinv(&(dhalf / delta), None)?).powi(2);
    let p = dhalf.ncols() as f64;
    let spread = p - 1.0 / p;
    Ok(4.0 * spread * kappa_ef * np2 + l_hess / 3.0 * np2 * (2.0 * spread + 1.0) * delta)
}

/// `|hess f(x0)| + L_hess delta / 3`.
pub fn directional_bound_gsh_cross(hess_norm: f64, l_hess: f64, delta: f64) -> f64 {
    hess_norm + l_hess * delta / 3.0
}

/// General-direction bound for the structured simplex Hessian; `d` must lie
/// in `col(S)`.
pub fn directional_bound_gsh_general(
    hess_norm: f64,
    l_hess: f64,
    s: &Mat,
    d: &Vector,
) -> Result<f64> {
    let dn = d.norm();
    if dn == 0.0 {
        return Err(Error::invalid("direction must be nonzero"));
    }
    let sp = pinv(s, None)?;
    let v = &sp * d;
    let resid = (s * &v - d).norm();
    if resid > 1e-8 * dn {
        return Err(Error::Domain(format!(
            "direction is outside col(S) (residual {resid:.3e})"
        )));
    }
    let delta = max_col_norm(s);
    let np2 = spectral_norm(&pinv(&(s / delta), None)?).powi(2);
    let r = spread_ratio(&v);
    Ok(r * hess_norm * np2 + l_hess / 3.0 * np2 * (r + 1.0) * delta)
}

/// Maximum of the structured simplex Hessian bound over unit `d` in `col(S)`.
pub fn gsh_error_bound_global(hess_norm: f64, l_hess: f64, s: &Mat) -> Result<f64> {
    let delta = max_col_norm(s);
    let np2 = spectral_norm(&pinv(&(s / delta), None)?).powi(2);
    let p = s.ncols() as f64;
    let spread = p - 1.0 / p;
    Ok(spread * hess_norm * np2 + l_hess / 3.0 * np2 * (spread + 1.0) * delta)
}

/// `|a^T E b| / (|a| |b|)`.
pub fn directional_error(e: &Mat, a: &Vector, b: &Vector) -> f64 {
    (a.dot(&(e * b)) / (a.norm() * b.norm())).abs()
}

/// `max |d^T sym(E) d|` over unit `d` in `col(S)`.
pub fn max_error_on_span(e: &Mat, s: &Mat) -> Result<f64> {
    let u = svd(s, false)?.u;
    let r = rank(s, None)?;
    let q = u.columns(0, r).into_owned();
    let reduced = q.transpose() * sym_part(e) * &q;
    Ok(reduced.symmetric_eigenvalues().amax())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMeasurement {
    pub err_f: f64,
    pub err_g: f64,
    /// `(i, |dhat_i^T E dhat_i|)` over the canonical directions.
    pub aligned: Vec<(usize, f64)>,
    /// `(i, j, |dhat_i^T E dhat_j|)` for ordered canonical pairs `i != j`.
    pub cross: Vec<(usize, usize, f64)>,
}

/// Sup-errors over `B(x0, radius(Y))` sampled at the center, the sample
/// points, `x0 ± radius e_i` and `n_samples` scrambled Halton points, plus
/// directional Hessian errors `E = H - hess f(x0)` along the directions of
/// `Y` with `±` pairs collapsed.
pub fn measure_errors(
    tf: &TestFunction,
    m: &QuadraticModel,
    y: &SampleSet,
    n_samples: usize,
) -> Result<ErrorMeasurement> {
    if n_samples == 0 {
        return Err(Error::invalid("at least one ball sample is required"));
    }
    let x0 = y.x0();
    let n = y.dim();
    let delta = y.radius();
    let mut pts = y.points();
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = delta;
        pts.push(x0 + &e);
        pts.push(x0 - e);
    }
    pts.extend(ball_points(x0, delta, n_samples));
    let mut err_f = 0.0f64;
    let mut err_g = 0.0f64;
    for p in &pts {
        err_f = err_f.max((tf.eval(p) - m.eval(p)).abs());
        err_g = err_g.max((tf.grad(p) - m.grad(p)).norm());
    }
    let e = m.hess() - tf.hess(x0);
    let dirs = y.canonical_directions();
    let mut aligned = Vec::new();
    let mut cross = Vec::new();
    for &i in &dirs {
        let di = y.direction(i);
        aligned.push((i, directional_error(&e, &di, &di)));
        for &j in &dirs {
            if j != i {
                cross.push((i, j, directional_error(&e, &di, &y.direction(j))));
            }
        }
    }
    Ok(ErrorMeasurement {
        err_f,
        err_g,
        aligned,
        cross,
    })
}

/// Least-squares slope of `log err` against `log delta`, skipping errors
/// below `1e3 eps fscale`. `None` with fewer than two usable points.
pub fn loglog_slope(deltas: &[f64], errs: &[f64], fscale: f64) -> Option<f64> {
    let floor = 1e3 * f64::EPSILON * fscale.abs();
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(errs)
        .filter(|(d, e)| **d > 0.0 && e.is_finite() && **e > floor && **e > 0.0)
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
