//! Small dense linear-algebra kernel.
//!
//! Everything here works on `nalgebra` dynamic matrices; SVDs are computed
//! by `faer`. The rank decisions
//! all go through one rule: a singular value is treated as zero when it is
//! at most `rtol * sigma_max`, with `rtol` defaulting to
//! `f64::EPSILON * max(rows, cols)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Matrix norms used by the error-bound constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Maximum absolute column sum.
    Op1,
    /// Maximum absolute row sum.
    OpInf,
    /// Largest singular value.
    Spectral,
    Frobenius,
}

/// Default relative rank tolerance for a `rows x cols` matrix.
pub fn default_rtol(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64
}

pub(crate) fn ensure_finite_mat(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid(format!("{what} has an empty dimension")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

pub(crate) fn ensure_finite_vec(v: &Vector, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// `m = U diag(s) V^T` with `s` non-increasing.
pub(crate) struct Svd {
    pub u: Mat,
    pub s: Vector,
    pub v: Mat,
}

fn to_faer(m: &Mat) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD, or with `full` the complete square `U` and `V`.
///
/// Backed by faer: nalgebra's implicit-QR SVD loses most digits on
/// symmetric matrices with clustered singular values, which the MN
/// multiplier system produces at small radii.
pub(crate) fn svd(m: &Mat, full: bool) -> Result<Svd> {
    ensure_finite_mat(m, "matrix")?;
    let fm = to_faer(m);
    let failed = |_| Error::Numerical("SVD did not converge".into());
    let (u, s, v) = if full {
        let d = fm.svd().map_err(failed)?;
        (
            from_faer(d.U()),
            d.S().column_vector().iter().copied().collect::<Vec<_>>(),
            from_faer(d.V()),
        )
    } else {
        let d = fm.thin_svd().map_err(failed)?;
        (
            from_faer(d.U()),
            d.S().column_vector().iter().copied().collect::<Vec<_>>(),
            from_faer(d.V()),
        )
    };
    Ok(Svd {
        u,
        s: Vector::from_vec(s),
        v,
    })
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Result<Vector> {
    ensure_finite_mat(m, "matrix")?;
    let s = to_faer(m)
        .singular_values()
        .map_err(|_| Error::Numerical("SVD did not converge".into()))?;
    let mut s: Vec<f64> = s;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(s))
}

/// Moore-Penrose pseudoinverse via SVD.
///
/// `rtol` is relative to the largest singular value; `None` selects
/// [`default_rtol`].
pub fn pinv(m: &Mat, rtol: Option<f64>) -> Result<Mat> {
    ensure_finite_mat(m, "matrix")?;
    let rtol = rtol.unwrap_or_else(|| default_rtol(m.nrows(), m.ncols()));
    if rtol < 0.0 {
        return Err(Error::invalid("rank tolerance must be non-negative"));
    }
    let Svd { u, s: sigma, v } = svd(m, false)?;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let thr = rtol * smax;

    let mut out = Mat::zeros(m.ncols(), m.nrows());
    for (k, &s) in sigma.iter().enumerate() {
        if s > thr && s > 0.0 {
            // out += v_k * u_k^T / s
            let vk = v.column(k);
            let uk = u.column(k);
            out.ger(1.0 / s, &vk, &uk, 1.0);
        }
    }
    Ok(out)
}

/// Numerical rank under the relative tolerance rule.
pub fn rank(m: &Mat, rtol: Option<f64>) -> Result<usize> {
    let s = singular_values(m)?;
    let rtol = rtol.unwrap_or_else(|| default_rtol(m.nrows(), m.ncols()));
    let thr = rtol * s[0];
    Ok(s.iter().filter(|&&x| x > thr && x > 0.0).count())
}

pub fn matrix_norm(m: &Mat, kind: NormKind) -> Result<f64> {
    ensure_finite_mat(m, "matrix")?;
    Ok(match kind {
        NormKind::Op1 => m
            .column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::OpInf => m
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Spectral => singular_values(m)?[0],
        NormKind::Frobenius => m.iter().map(|x| x * x).sum::<f64>().sqrt(),
    })
}

/// Spectral norm; zero for an all-zero matrix.
pub fn spectral_norm(m: &Mat) -> f64 {
    matrix_norm(m, NormKind::Spectral).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution {
    pub x: Vector,
    /// Euclidean norm of `A x - b`.
    pub residual: f64,
}

/// `x = pinv(A) b`. The caller decides from `residual` whether the system
/// was consistent.
pub fn solve_min_norm(a: &Mat, b: &Vector, rtol: Option<f64>) -> Result<MinNormSolution> {
    if a.nrows() != b.len() {
        return Err(Error::invalid(format!(
            "A has {} rows but b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    ensure_finite_vec(b, "right-hand side")?;
    let x = pinv(a, rtol)? * b;
    let residual = (a * &x - b).norm();
    Ok(MinNormSolution { x, residual })
}

/// Orthonormal basis of the null space of `a` (possibly with zero columns).
pub fn null_space(a: &Mat, rtol: Option<f64>) -> Result<Mat> {
    ensure_finite_mat(a, "matrix")?;
    let n = a.ncols();
    let Svd { s: sigma, v, .. } = svd(a, true)?;
    let rtol = rtol.unwrap_or_else(|| default_rtol(a.nrows(), a.ncols()));
    let thr = rtol * sigma.iter().copied().fold(0.0, f64::max);
    let cols: Vec<Vector> = (0..n)
        .filter(|&k| k >= sigma.len() || sigma[k] <= thr)
        .map(|k| v.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        return Ok(Mat::zeros(n, 0));
    }
    Ok(Mat::from_columns(&cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSolution {
    pub z: Vector,
    /// False when zero weights leave a direction of the feasible set free;
    /// `z` is then the minimum Euclidean-norm minimizer.
    pub unique: bool,
    /// Relative residual of the particular solution.
    pub residual: f64,
}

/// Minimizes `sum_i w_i z_i^2` subject to `A z = b` by the null-space method.
///
/// `tol` is used twice: as the relative consistency tolerance for
/// `A z = b`, and as the relative rank tolerance of the reduced normal
/// matrix `N^T W N`.
pub fn constrained_least_norm(
    a: &Mat,
    b: &Vector,
    weights: &Vector,
    tol: f64,
) -> Result<WeightedSolution> {
    if weights.len() != a.ncols() {
        return Err(Error::invalid("one weight per unknown is required"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let part = solve_min_norm(a, b, None)?;
    let scale = a.norm() * part.x.norm() + b.norm();
    let rel = if scale > 0.0 {
        part.residual / scale
    } else {
        0.0
    };
    if rel > tol {
        return Err(Error::Infeasible { residual: rel, tol });
    }
    let z0 = part.x;
    let basis = null_space(a, None)?;
    if basis.ncols() == 0 {
        return Ok(WeightedSolution {
            z: z0,
            unique: true,
            residual: rel,
        });
    }
    let w = Mat::from_diagonal(weights);
    let reduced = basis.transpose() * &w * &basis;
    let rhs = -(basis.transpose() * &w * &z0);
    let k = reduced.ncols();
    let y = pinv(&reduced, Some(tol))? * rhs;
    let unique = rank(&reduced, Some(tol))? == k;
    Ok(WeightedSolution {
        z: z0 + basis * y,
        unique,
        residual: rel,
    })
}

/// Orthogonal projector onto `col(m)`.
pub fn col_projector(m: &Mat) -> Result<Mat> {
    Ok(m * pinv(m, None)?)
}

/// Infinity-norm condition number of a square matrix, `inf` when singular.
pub fn cond_inf(m: &Mat) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => {
            let a = matrix_norm(m, NormKind::OpInf).unwrap_or(f64::NAN);
            let b = matrix_norm(&inv, NormKind::OpInf).unwrap_or(f64::NAN);
            a * b
        }
        None => f64::INFINITY,
    }
}

pub fn is_orthogonal(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m.transpose() * m - Mat::identity(m.nrows(), m.ncols())).norm() <= tol
}

pub fn is_permutation(m: &Mat) -> bool {
    if !m.is_square() {
        return false;
    }
    let entries_ok = m.iter().all(|&x| x == 0.0 || x == 1.0);
    let rows_ok = m.row_iter().all(|r| r.iter().sum::<f64>() == 1.0);
    let cols_ok = m.column_iter().all(|c| c.iter().sum::<f64>() == 1.0);
    entries_ok && rows_ok && cols_ok
}

/// `(m + m^T) / 2`.
pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn pinv_identity_and_projector() {
        let i3 = Mat::identity(3, 3);
        assert_relative_eq!(pinv(&i3, None).unwrap(), i3, epsilon = 1e-15);
        let p = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(pinv(&p, None).unwrap(), p, epsilon = 1e-15);
    }

    #[test]
    fn pinv_full_column_rank_left_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_mat(&mut rng, 3, 2);
        let a = pinv(&m, None).unwrap();
        assert!((a * &m - Mat::identity(2, 2)).norm() <= 1e-10);
    }

    #[test]
    fn pinv_zero_matrix_is_zero() {
        let z = Mat::zeros(2, 3);
        assert_eq!(pinv(&z, None).unwrap(), Mat::zeros(3, 2));
    }

    #[test]
    fn pinv_rejects_nan() {
        let m = Mat::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(pinv(&m, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn norms_by_hand() {
        let i2 = Mat::identity(2, 2);
        for k in [NormKind::Op1, NormKind::OpInf, NormKind::Spectral] {
            assert_relative_eq!(matrix_norm(&i2, k).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(
            matrix_norm(&i2, NormKind::Frobenius).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        let m = Mat::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 4.0]);
        // columns: |1|+|3| = 4, |-2|+|4| = 6
        assert_eq!(matrix_norm(&m, NormKind::Op1).unwrap(), 6.0);
        // rows: 3, 7
        assert_eq!(matrix_norm(&m, NormKind::OpInf).unwrap(), 7.0);
        let d = Mat::from_diagonal(&Vector::from_vec(vec![3.0, -4.0]));
        assert_relative_eq!(
            matrix_norm(&d, NormKind::Spectral).unwrap(),
            4.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn min_norm_examples() {
        let a = Mat::from_row_slice(1, 2, &[1.0, 1.0]);
        let s = solve_min_norm(&a, &Vector::from_vec(vec![2.0]), None).unwrap();
        assert_relative_eq!(s.x, Vector::from_vec(vec![1.0, 1.0]), epsilon = 1e-14);
        assert!(s.residual < 1e-14);

        let s = solve_min_norm(
            &Mat::identity(2, 2),
            &Vector::from_vec(vec![3.0, 4.0]),
            None,
        )
        .unwrap();
        assert_relative_eq!(s.x, Vector::from_vec(vec![3.0, 4.0]), epsilon = 1e-14);

        // Normal-equations oracle: x = argmin |Ax-b| gives x1 = 1.5, residual
        // vector (-0.5, 0.5).
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let s = solve_min_norm(&a, &Vector::from_vec(vec![1.0, 2.0]), None).unwrap();
        assert_relative_eq!(s.x, Vector::from_vec(vec![1.5, 0.0]), epsilon = 1e-14);
        assert_relative_eq!(s.residual, 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn weighted_examples() {
        let s = constrained_least_norm(
            &Mat::identity(2, 2),
            &Vector::from_vec(vec![1.0, 2.0]),
            &Vector::from_vec(vec![1.0, 1.0]),
            1e-10,
        )
        .unwrap();
        assert_relative_eq!(s.z, Vector::from_vec(vec![1.0, 2.0]), epsilon = 1e-14);

        // z1 + z2 = 2, min z1^2 + 4 z2^2: z1 = 4 z2 -> z2 = 2/5, z1 = 8/5.
        let s = constrained_least_norm(
            &Mat::from_row_slice(1, 2, &[1.0, 1.0]),
            &Vector::from_vec(vec![2.0]),
            &Vector::from_vec(vec![1.0, 4.0]),
            1e-10,
        )
        .unwrap();
        assert_relative_eq!(s.z, Vector::from_vec(vec![1.6, 0.4]), epsilon = 1e-13);
        assert!(s.unique);

        let s = constrained_least_norm(
            &Mat::from_row_slice(1, 2, &[1.0, -1.0]),
            &Vector::from_vec(vec![0.0]),
            &Vector::from_vec(vec![1.0, 1.0]),
            1e-10,
        )
        .unwrap();
        assert!(s.z.norm() < 1e-15);
    }

    #[test]
    fn weighted_infeasible_and_nonunique() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let r = constrained_least_norm(
            &a,
            &Vector::from_vec(vec![1.0, 2.0]),
            &Vector::from_vec(vec![1.0, 1.0]),
            1e-10,
        );
        assert!(matches!(r, Err(Error::Infeasible { .. })));

        // Second coordinate free of both constraint and objective.
        let s = constrained_least_norm(
            &Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            &Vector::from_vec(vec![3.0]),
            &Vector::from_vec(vec![1.0, 0.0]),
            1e-10,
        )
        .unwrap();
        assert!(!s.unique);
        assert_relative_eq!(s.z, Vector::from_vec(vec![3.0, 0.0]), epsilon = 1e-14);
    }

    #[test]
    fn null_space_is_orthonormal_and_annihilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_mat(&mut rng, 2, 5);
        let n = null_space(&a, None).unwrap();
        assert_eq!(n.ncols(), 3);
        assert!((&a * &n).norm() < 1e-13);
        assert!((n.transpose() * &n - Mat::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn permutation_and_orthogonality_checks() {
        let p = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(is_permutation(&p));
        assert!(!is_permutation(&(p.clone() * 2.0)));
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = Mat::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!(is_orthogonal(&r, 1e-12));
        assert!(!is_orthogonal(&(r * 1.1), 1e-12));
    }
}
