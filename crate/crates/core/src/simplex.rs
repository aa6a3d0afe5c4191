//! Generalized simplex gradients and Hessians.
//!
//! Every sample point is formed as `x0 + offset` with the offset summed
//! first, so that points shared by different difference tables hit the
//! oracle cache exactly.

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_mat, ensure_finite_vec, pinv, rank, Mat, Vector};
use crate::oracle::Oracle;

/// The `T` side of a simplex Hessian.
#[derive(Debug, Clone, PartialEq)]
pub enum Frames {
    /// One `T` for every column of `S`.
    Shared(Mat),
    /// `T_i` for column `i` of `S`.
    PerDirection(Vec<Mat>),
}

/// `(S, T_1, ..., T_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionPack {
    s: Mat,
    frames: Frames,
}

impl DirectionPack {
    pub fn shared(s: Mat, t: Mat) -> Result<Self> {
        ensure_finite_mat(&s, "S")?;
        ensure_finite_mat(&t, "T")?;
        if t.nrows() != s.nrows() {
            return Err(Error::invalid("S and T must have the same number of rows"));
        }
        Ok(DirectionPack {
            s,
            frames: Frames::Shared(t),
        })
    }

    pub fn per_direction(s: Mat, ts: Vec<Mat>) -> Result<Self> {
        ensure_finite_mat(&s, "S")?;
        if ts.len() != s.ncols() {
            return Err(Error::invalid(format!(
                "{} frames for {} columns of S",
                ts.len(),
                s.ncols()
            )));
        }
        for t in &ts {
            ensure_finite_mat(t, "T_i")?;
            if t.nrows() != s.nrows() {
                return Err(Error::invalid("every T_i must have as many rows as S"));
            }
        }
        Ok(DirectionPack {
            s,
            frames: Frames::PerDirection(ts),
        })
    }

    pub fn s(&self) -> &Mat {
        &self.s
    }

    pub fn frames(&self) -> &Frames {
        &self.frames
    }

    /// `T_i`.
    pub fn frame(&self, i: usize) -> &Mat {
        match &self.frames {
            Frames::Shared(t) => t,
            Frames::PerDirection(ts) => &ts[i],
        }
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn p(&self) -> usize {
        self.s.ncols()
    }

    /// Offsets from `x0` of every point the Hessian uses, `0` excluded:
    /// `s_i`, `t_ij` and `s_i + t_ij`.
    pub fn offsets(&self) -> Vec<Vector> {
        let mut out = Vec::new();
        for (i, si) in self.s.column_iter().enumerate() {
            let si = si.into_owned();
            out.push(si.clone());
            for tj in self.frame(i).column_iter() {
                let tj = tj.into_owned();
                out.push(&si + &tj);
                out.push(tj);
            }
        }
        out
    }

    /// The pack with `S` and every `T_i` transposed roles, shared case only.
    pub fn swapped(&self) -> Option<Self> {
        match &self.frames {
            Frames::Shared(t) => Some(DirectionPack {
                s: t.clone(),
                frames: Frames::Shared(self.s.clone()),
            }),
            Frames::PerDirection(_) => None,
        }
    }
}

fn check_dims(x0: &Vector, s: &Mat) -> Result<()> {
    ensure_finite_vec(x0, "x0")?;
    ensure_finite_mat(s, "S")?;
    if s.nrows() != x0.len() {
        return Err(Error::invalid(format!(
            "S has {} rows but x0 has dimension {}",
            s.nrows(),
            x0.len()
        )));
    }
    Ok(())
}

/// `f(x0 + s_i) - f(x0)`.
pub fn delta_f(f: &Oracle, x0: &Vector, s: &Mat) -> Result<Vector> {
    delta_f_shifted(f, x0, &Vector::zeros(x0.len()), s)
}

/// `f(x0 + (shift + s_i)) - f(x0 + shift)`.
pub fn delta_f_shifted(f: &Oracle, x0: &Vector, shift: &Vector, s: &Mat) -> Result<Vector> {
    check_dims(x0, s)?;
    if shift.len() != x0.len() {
        return Err(Error::invalid("shift dimension mismatch"));
    }
    let base = f.eval_offset(x0, shift)?;
    let mut out = Vector::zeros(s.ncols());
    for (i, si) in s.column_iter().enumerate() {
        out[i] = f.eval_offset(x0, &(shift + si))? - base;
    }
    Ok(out)
}

/// `(S^T)^+ delta_f(x0; S)`.
pub fn gsg(f: &Oracle, x0: &Vector, s: &Mat) -> Result<Vector> {
    Ok(pinv(&s.transpose(), None)? * delta_f(f, x0, s)?)
}

/// Simplex gradient at the base point `x0 + shift`.
pub fn gsg_shifted(f: &Oracle, x0: &Vector, shift: &Vector, s: &Mat) -> Result<Vector> {
    Ok(pinv(&s.transpose(), None)? * delta_f_shifted(f, x0, shift, s)?)
}

fn mixed_row(f: &Oracle, x0: &Vector, f0: f64, si: &Vector, t: &Mat) -> Result<Vector> {
    let fs = f.eval_offset(x0, si)?;
    let mut row = Vector::zeros(t.ncols());
    for (j, tj) in t.column_iter().enumerate() {
        let tj = tj.into_owned();
        let fst = f.eval_offset(x0, &(si + &tj))?;
        let ft = f.eval_offset(x0, &tj)?;
        row[j] = ((fst - fs) - ft) + f0;
    }
    Ok(row)
}

/// `p x q` table of `f(x0+s_i+t_j) - f(x0+s_i) - f(x0+t_j) + f(x0)`.
pub fn delta_delta_f(f: &Oracle, x0: &Vector, s: &Mat, t: &Mat) -> Result<Mat> {
    check_dims(x0, s)?;
    check_dims(x0, t)?;
    let f0 = f.eval(x0)?;
    let mut out = Mat::zeros(s.ncols(), t.ncols());
    for (i, si) in s.column_iter().enumerate() {
        let row = mixed_row(f, x0, f0, &si.into_owned(), t)?;
        out.row_mut(i).copy_from(&row.transpose());
    }
    Ok(out)
}

/// Generalized simplex Hessian. Not symmetric in general.
pub fn gsh(f: &Oracle, x0: &Vector, pack: &DirectionPack) -> Result<Mat> {
    check_dims(x0, pack.s())?;
    let s_t_pinv = pinv(&pack.s().transpose(), None)?;
    match pack.frames() {
        Frames::Shared(t) => {
            let dd = delta_delta_f(f, x0, pack.s(), t)?;
            Ok(s_t_pinv * dd * pinv(t, None)?)
        }
        Frames::PerDirection(ts) => {
            let f0 = f.eval(x0)?;
            let n = x0.len();
            let mut rows = Mat::zeros(pack.p(), n);
            for (i, (si, ti)) in pack.s().column_iter().zip(ts).enumerate() {
                let dd = mixed_row(f, x0, f0, &si.into_owned(), ti)?;
                // gsg(x0 + s_i; T_i) - gsg(x0; T_i)
                let g = pinv(&ti.transpose(), None)? * dd;
                rows.row_mut(i).copy_from(&g.transpose());
            }
            Ok(s_t_pinv * rows)
        }
    }
}

/// `(gsg(S) + gsg(-S)) / 2`.
pub fn centred_gsg(f: &Oracle, x0: &Vector, s: &Mat) -> Result<Vector> {
    let a = gsg(f, x0, s)?;
    let b = gsg(f, x0, &(-s))?;
    Ok((a + b) * 0.5)
}

/// `gsg(x0; S) + gsg(x0 - s_l; S) - gsg(x0 - s_l; 2S)`, with `s_0 = 0`.
/// `ell` is 1-based; `0` means no shift.
pub fn adapted_centred_gsg(f: &Oracle, x0: &Vector, s: &Mat, ell: usize) -> Result<Vector> {
    check_dims(x0, s)?;
    if ell > s.ncols() {
        return Err(Error::invalid(format!(
            "ell = {ell} exceeds p = {}",
            s.ncols()
        )));
    }
    let shift = if ell == 0 {
        Vector::zeros(x0.len())
    } else {
        -s.column(ell - 1).into_owned()
    };
    let a = gsg(f, x0, s)?;
    let b = gsg_shifted(f, x0, &shift, s)?;
    let c = gsg_shifted(f, x0, &shift, &(s * 2.0))?;
    Ok(a + b - c)
}

/// `U_S^0 = S`; otherwise column `j` is `s_j - s_l` and column `l` is `-s_l`.
pub fn build_u_s_ell(s: &Mat, ell: usize) -> Result<Mat> {
    ensure_finite_mat(s, "S")?;
    let p = s.ncols();
    if ell > p {
        return Err(Error::invalid(format!("ell = {ell} exceeds p = {p}")));
    }
    if rank(s, None)? < p {
        return Err(Error::invalid("S must have full column rank"));
    }
    if ell == 0 {
        return Ok(s.clone());
    }
    let sl = s.column(ell - 1).into_owned();
    let mut u = Mat::zeros(s.nrows(), p);
    for j in 0..p {
        let col = if j == ell - 1 {
            -&sl
        } else {
            s.column(j) - &sl
        };
        u.set_column(j, &col);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::col_projector;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn sphere() -> Oracle {
        Oracle::new(|x: &Vector| x.norm_squared())
    }

    fn rank_one() -> Oracle {
        Oracle::new(|x: &Vector| x.sum().powi(2))
    }

    fn e(n: usize, i: usize) -> Vector {
        let mut out = Vector::zeros(n);
        out[i] = 1.0;
        out
    }

    #[test]
    fn delta_f_examples() {
        let c = Oracle::new(|_: &Vector| 3.0);
        assert_eq!(
            delta_f(&c, &v(&[1.0, 2.0]), &Mat::identity(2, 2)).unwrap(),
            v(&[0.0, 0.0])
        );
        assert_eq!(
            delta_f(&sphere(), &v(&[0.0, 0.0]), &Mat::identity(2, 2)).unwrap(),
            v(&[1.0, 1.0])
        );
        let a = v(&[2.0, -1.0]);
        let lin = {
            let a = a.clone();
            Oracle::new(move |x: &Vector| a.dot(x))
        };
        let s = Mat::from_row_slice(2, 3, &[1.0, 0.5, -1.0, 2.0, 0.0, 1.0]);
        let got = delta_f(&lin, &v(&[0.0, 0.0]), &s).unwrap();
        assert_relative_eq!(got, s.transpose() * a, epsilon = 1e-14);
    }

    #[test]
    fn gsg_examples() {
        let a = v(&[1.0, -2.0, 0.5]);
        let lin = {
            let a = a.clone();
            Oracle::new(move |x: &Vector| a.dot(x))
        };
        assert_relative_eq!(
            gsg(&lin, &v(&[0.3, 0.1, -1.0]), &Mat::identity(3, 3)).unwrap(),
            a,
            epsilon = 1e-13
        );
        let x0 = v(&[0.0, 0.0]);
        assert_relative_eq!(
            gsg(&sphere(), &x0, &Mat::identity(2, 2)).unwrap(),
            v(&[1.0, 1.0]),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            gsg(&sphere(), &x0, &(-Mat::identity(2, 2))).unwrap(),
            v(&[-1.0, -1.0]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn delta_delta_examples() {
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let quad = {
            let a = a.clone();
            Oracle::new(move |x: &Vector| 0.5 * x.dot(&(&a * x)))
        };
        let s = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let t = Mat::from_row_slice(2, 1, &[-1.0, 2.0]);
        let dd = delta_delta_f(&quad, &v(&[0.2, -0.4]), &s, &t).unwrap();
        assert_relative_eq!(dd, s.transpose() * &a * &t, epsilon = 1e-13);

        let dd = delta_delta_f(
            &rank_one(),
            &v(&[0.0, 0.0]),
            &Mat::identity(2, 2),
            &Mat::from_column_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(dd, Mat::from_row_slice(2, 1, &[2.0, 2.0]));

        let c = Oracle::new(|_: &Vector| -1.5);
        let dd = delta_delta_f(&c, &v(&[0.0, 0.0]), &Mat::identity(2, 2), &s).unwrap();
        assert_eq!(dd, Mat::zeros(2, 2));
    }

    #[test]
    fn gsh_examples() {
        let pack = DirectionPack::shared(
            Mat::identity(2, 2),
            Mat::from_column_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap();
        let h = gsh(&rank_one(), &v(&[0.0, 0.0]), &pack).unwrap();
        assert_relative_eq!(
            h,
            Mat::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 0.0]),
            epsilon = 1e-12
        );

        let a = Mat::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 2.0]);
        let quad = {
            let a = a.clone();
            Oracle::new(move |x: &Vector| 0.5 * x.dot(&(&a * x)))
        };
        let pack = DirectionPack::shared(Mat::identity(3, 3), Mat::identity(3, 3)).unwrap();
        assert_relative_eq!(
            gsh(&quad, &v(&[0.1, 0.2, 0.3]), &pack).unwrap(),
            a,
            epsilon = 1e-12
        );

        let pack = DirectionPack::per_direction(
            Mat::identity(3, 2),
            vec![
                Mat::from_columns(&[-e(3, 0)]),
                Mat::from_columns(&[-e(3, 1)]),
            ],
        )
        .unwrap();
        let h = gsh(&sphere(), &Vector::zeros(3), &pack).unwrap();
        let expect = Mat::from_diagonal(&v(&[2.0, 2.0, 0.0]));
        assert_relative_eq!(h, expect, epsilon = 1e-14);
    }

    #[test]
    fn per_direction_equals_shared_when_frames_agree() {
        let f = Oracle::new(|x: &Vector| (x[0] * x[1]).sin() + x[0].powi(3));
        let s = Mat::from_row_slice(2, 2, &[0.1, 0.02, -0.03, 0.09]);
        let t = Mat::from_row_slice(2, 2, &[0.05, 0.0, 0.01, -0.07]);
        let x0 = v(&[0.4, -0.3]);
        let a = gsh(
            &f,
            &x0,
            &DirectionPack::shared(s.clone(), t.clone()).unwrap(),
        )
        .unwrap();
        let b = gsh(
            &f,
            &x0,
            &DirectionPack::per_direction(s, vec![t.clone(), t]).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn shared_gsh_cost_is_p_plus_one_times_q_plus_one() {
        let f = Oracle::new(|x: &Vector| x.map(|t| t.exp()).sum());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = Mat::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let t = Mat::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        gsh(
            &f,
            &v(&[0.1, 0.2, 0.3]),
            &DirectionPack::shared(s, t).unwrap(),
        )
        .unwrap();
        assert_eq!(f.calls(), 3 * 4);
    }

    #[test]
    fn centred_examples() {
        let g = centred_gsg(&sphere(), &v(&[0.0, 0.0]), &Mat::from_columns(&[e(2, 0)])).unwrap();
        assert_relative_eq!(g, v(&[0.0, 0.0]), epsilon = 1e-15);

        let cubic = Oracle::new(|x: &Vector| x[0].powi(3));
        let g = centred_gsg(&cubic, &v(&[0.0]), &Mat::from_element(1, 1, 1.0)).unwrap();
        // (f(1) - f(-1)) / 2
        assert_eq!(g, v(&[1.0]));

        let lin = Oracle::new(|x: &Vector| 3.0 * x[0] - x[1] + 2.0);
        let g = centred_gsg(&lin, &v(&[1.0, 1.0]), &Mat::identity(2, 2)).unwrap();
        assert_relative_eq!(g, v(&[3.0, -1.0]), epsilon = 1e-14);
    }

    #[test]
    fn adapted_examples() {
        let x0 = v(&[0.0, 0.0]);
        let g = adapted_centred_gsg(&sphere(), &x0, &Mat::identity(2, 2), 0).unwrap();
        assert_relative_eq!(g, v(&[0.0, 0.0]), epsilon = 1e-15);

        let lin = Oracle::new(|x: &Vector| 3.0 * x[0] - x[1] + 2.0);
        let s = Mat::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.7]);
        for ell in 0..=2 {
            let g = adapted_centred_gsg(&lin, &v(&[0.3, 0.4]), &s, ell).unwrap();
            assert_relative_eq!(g, v(&[3.0, -1.0]), epsilon = 1e-13);
        }

        // f = x^T A x / 2 + b^T x: grad at x0 is A x0 + b.
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 4.0]);
        let b = v(&[1.0, -1.0]);
        let quad = {
            let (a, b) = (a.clone(), b.clone());
            Oracle::new(move |x: &Vector| 0.5 * x.dot(&(&a * x)) + b.dot(x))
        };
        let x0 = v(&[0.5, -0.25]);
        let g = adapted_centred_gsg(&quad, &x0, &Mat::identity(2, 2), 0).unwrap();
        assert_relative_eq!(g, &a * &x0 + b, epsilon = 1e-13);
    }

    #[test]
    fn u_s_ell_examples() {
        let s = Mat::identity(2, 2);
        assert_eq!(build_u_s_ell(&s, 0).unwrap(), s);
        let u = build_u_s_ell(&s, 1).unwrap();
        assert_eq!(u, Mat::from_row_slice(2, 2, &[-1.0, -1.0, 0.0, 1.0]));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = Mat::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        for ell in 0..=3 {
            let u = build_u_s_ell(&s, ell).unwrap();
            let d = col_projector(&u).unwrap() - col_projector(&s).unwrap();
            assert!(d.norm() < 1e-10);
        }
        let deficient = Mat::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert!(build_u_s_ell(&deficient, 1).is_err());
    }

    #[test]
    fn pack_offsets_cover_all_points() {
        let pack = DirectionPack::shared(Mat::identity(2, 2), Mat::identity(2, 1)).unwrap();
        let offs = pack.offsets();
        assert_eq!(offs.len(), 2 * 3);
        assert!(offs.contains(&v(&[2.0, 0.0])));
        assert!(offs.contains(&v(&[1.0, 1.0])));
    }
}
