//! Closed-form MN and MFN models built from simplex gradients and Hessians,
//! the bilinear minimum-Frobenius problems, and the orthogonal/permutation
//! transformation of an instance.

use crate::error::{Error, Result};
use crate::linalg::{
    col_projector, constrained_least_norm, is_orthogonal, is_permutation, pinv, Mat, Vector,
};
use crate::models::QuadraticModel;
use crate::oracle::Oracle;
use crate::sample_set::{poisedness, SampleSet, DEFAULT_TOL};
use crate::simplex::{
    adapted_centred_gsg, build_u_s_ell, centred_gsg, delta_delta_f, gsg, gsh, DirectionPack,
};

/// `min |H|_F` subject to `S^T H T = rhs`, optionally over symmetric `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearProblem {
    pub s: Mat,
    pub t: Mat,
    pub rhs: Mat,
    pub symmetric_constraint: bool,
}

impl BilinearProblem {
    pub fn new(s: Mat, t: Mat, rhs: Mat, symmetric_constraint: bool) -> Result<Self> {
        if s.nrows() != t.nrows() || rhs.nrows() != s.ncols() || rhs.ncols() != t.ncols() {
            return Err(Error::invalid("S, T and rhs dimensions disagree"));
        }
        Ok(BilinearProblem {
            s,
            t,
            rhs,
            symmetric_constraint,
        })
    }

    /// Relative residual `|S^T H T - rhs| / (|S||H||T| + |rhs|)`.
    pub fn residual(&self, h: &Mat) -> f64 {
        let r = (self.s.transpose() * h * &self.t - &self.rhs).norm();
        let scale = self.s.norm() * h.norm() * self.t.norm() + self.rhs.norm();
        if scale > 0.0 {
            r / scale
        } else {
            0.0
        }
    }
}

/// Index pairs `(k, l)`, `k <= l`, in row-major upper-triangle order.
fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|k| (k..n).map(move |l| (k, l))).collect()
}

/// Returns `(H, unique)`.
pub fn solve_bilinear_min_frobenius(prob: &BilinearProblem, tol: f64) -> Result<(Mat, bool)> {
    let (s, t) = (&prob.s, &prob.t);
    let n = s.nrows();
    if !prob.symmetric_constraint {
        let h = pinv(&s.transpose(), None)? * &prob.rhs * pinv(t, None)?;
        let res = prob.residual(&h);
        if res > tol {
            return Err(Error::Infeasible { residual: res, tol });
        }
        return Ok((h, true));
    }
    // Unknowns are the upper triangle of H; off-diagonal entries count
    // twice in the Frobenius norm.
    let pairs = upper_pairs(n);
    let (p, q) = (s.ncols(), t.ncols());
    let mut a = Mat::zeros(p * q, pairs.len());
    let mut b = Vector::zeros(p * q);
    for i in 0..p {
        for j in 0..q {
            let row = i * q + j;
            b[row] = prob.rhs[(i, j)];
            for (c, &(k, l)) in pairs.iter().enumerate() {
                a[(row, c)] = if k == l {
                    s[(k, i)] * t[(k, j)]
                } else {
                    s[(k, i)] * t[(l, j)] + s[(l, i)] * t[(k, j)]
                };
            }
        }
    }
    let w = Vector::from_iterator(
        pairs.len(),
        pairs.iter().map(|&(k, l)| if k == l { 1.0 } else { 2.0 }),
    );
    let sol = constrained_least_norm(&a, &b, &w, tol)?;
    let mut h = Mat::zeros(n, n);
    for (c, &(k, l)) in pairs.iter().enumerate() {
        h[(k, l)] = sol.z[c];
        h[(l, k)] = sol.z[c];
    }
    Ok((h, sol.unique))
}

/// Distance of `H` from the family `G + (S^T)^+ Z (I - T T^+)`:
/// `|(I - P_S)(H - G)|_F + |(H - G) T T^+|_F`.
pub fn lemma_family_residual(h: &Mat, g: &Mat, s: &Mat, t: &Mat) -> Result<f64> {
    let n = s.nrows();
    let diff = h - g;
    let ps = col_projector(s)?;
    let pt = col_projector(t)?;
    Ok(((Mat::identity(n, n) - ps) * &diff).norm() + (&diff * pt).norm())
}

/// `|P_S - P_T|_F <= 1e-10`.
pub fn same_column_space(s: &Mat, t: &Mat) -> Result<bool> {
    if s.nrows() != t.nrows() {
        return Err(Error::invalid("S and T must have the same number of rows"));
    }
    Ok((col_projector(s)? - col_projector(t)?).norm() <= 1e-10)
}

/// The sample set `{x0, x0 + s_i, x0 + t_ij, x0 + s_i + t_ij}`, deduplicated.
pub fn gsh_point_set(x0: &Vector, pack: &DirectionPack) -> Result<SampleSet> {
    SampleSet::from_offsets(x0.clone(), &pack.offsets())
}

/// `alpha = gsg(S) - (S^T)^+ diag(dd(S,T) T^+ S) / 2`, `H = gsh(S; T)`.
fn equal_colspace_model(f: &Oracle, x0: &Vector, s: &Mat, t: &Mat) -> Result<QuadraticModel> {
    if !same_column_space(s, t)? {
        return Err(Error::Precondition("col(S) and col(T) differ".into()));
    }
    let dd = delta_delta_f(f, x0, s, t)?;
    let inner = &dd * pinv(t, None)? * s;
    let diag = inner.diagonal();
    let g = gsg(f, x0, s)? - pinv(&s.transpose(), None)? * diag * 0.5;
    let h = gsh(f, x0, &DirectionPack::shared(s.clone(), t.clone())?)?;
    QuadraticModel::new(x0.clone(), f.eval(x0)?, g, h)
}

/// Closed-form MN model when `col(S) = col(T)`.
pub fn mn_from_gsh_equal_colspace(
    f: &Oracle,
    x0: &Vector,
    s: &Mat,
    t: &Mat,
) -> Result<QuadraticModel> {
    equal_colspace_model(f, x0, s, t)
}

/// Closed-form MFN model when `col(S) = col(T)`; the flag tells whether the
/// gradient is the unique MFN gradient (the point set is poised).
pub fn mfn_from_gsh_equal_colspace(
    f: &Oracle,
    x0: &Vector,
    s: &Mat,
    t: &Mat,
) -> Result<(QuadraticModel, bool)> {
    let m = equal_colspace_model(f, x0, s, t)?;
    let y = gsh_point_set(x0, &DirectionPack::shared(s.clone(), t.clone())?)?;
    let (_, df) = y.delta_f(f)?;
    let report = poisedness(&y, &df, DEFAULT_TOL)?;
    Ok((m, report.mfn_poised))
}

/// `alpha` the adapted-centred simplex gradient, `H = gsh(S; U_S^l)`.
/// `ell` is 1-based, `0` for no shift.
pub fn mn_special_t(f: &Oracle, x0: &Vector, s: &Mat, ell: usize) -> Result<QuadraticModel> {
    let u = build_u_s_ell(s, ell).map_err(|e| Error::Precondition(e.to_string()))?;
    let g = adapted_centred_gsg(f, x0, s, ell)?;
    let h = gsh(f, x0, &DirectionPack::shared(s.clone(), u)?)?;
    QuadraticModel::new(x0.clone(), f.eval(x0)?, g, h)
}

/// Coordinate structured model with unit steps; see
/// [`mn_coordinate_centered_step`].
pub fn mn_coordinate_centered(f: &Oracle, x0: &Vector, p: usize) -> Result<QuadraticModel> {
    mn_coordinate_centered_step(f, x0, p, 1.0)
}

/// `S = h [e_1 .. e_p]`, `T_i = [-h e_i]`: centred gradient and the
/// diagonal of centred second differences, zero-padded to `n x n`.
pub fn mn_coordinate_centered_step(
    f: &Oracle,
    x0: &Vector,
    p: usize,
    h: f64,
) -> Result<QuadraticModel> {
    let n = x0.len();
    if p == 0 || p > n {
        return Err(Error::invalid(format!(
            "need 1 <= p <= n = {n}, got p = {p}"
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("step must be positive"));
    }
    let s = Mat::identity(n, p) * h;
    let g = centred_gsg(f, x0, &s)?;
    let f0 = f.eval(x0)?;
    let mut hess = Mat::zeros(n, n);
    for i in 0..p {
        let si = s.column(i).into_owned();
        let fp = f.eval_offset(x0, &si)?;
        let fm = f.eval_offset(x0, &(-&si))?;
        hess[(i, i)] = (fp + fm - 2.0 * f0) / (h * h);
    }
    QuadraticModel::new(x0.clone(), f0, g, hess)
}

/// Instance after `S -> N S P1`, `T -> N T P2`, `f -> f(x0 + N^T (x - x0))`.
#[derive(Debug, Clone)]
pub struct TransformedInstance {
    pub s: Mat,
    pub t: Mat,
    pub f: Oracle,
}

pub fn transform_instance(
    s: &Mat,
    t: &Mat,
    n: &Mat,
    p1: &Mat,
    p2: &Mat,
    f: &Oracle,
    x0: &Vector,
) -> Result<TransformedInstance> {
    if !is_orthogonal(n, 1e-10) {
        return Err(Error::Precondition("N is not orthogonal".into()));
    }
    if !is_permutation(p1) || !is_permutation(p2) {
        return Err(Error::Precondition(
            "P1 and P2 must be permutation matrices".into(),
        ));
    }
    if n.nrows() != s.nrows() || p1.nrows() != s.ncols() || p2.nrows() != t.ncols() {
        return Err(Error::invalid("transformation dimensions disagree"));
    }
    let inner = f.clone();
    let nt = n.transpose();
    let x0c = x0.clone();
    let ft =
        Oracle::new(move |x: &Vector| inner.eval(&(&x0c + &nt * (x - &x0c))).unwrap_or(f64::NAN));
    Ok(TransformedInstance {
        s: n * s * p1,
        t: n * t * p2,
        f: ft,
    })
}
