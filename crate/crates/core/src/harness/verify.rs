//! Fixture and property suites behind `dfoq verify`.

use std::fmt;

use serde::Serialize;

use super::config::{PartialConfig, SweepConfig};
use super::random::{
    orthogonal, permutation, rng, smooth_function, well_conditioned, RandomQuadratic,
};
use super::sweep::cmd_sweep;
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::models::{solve_mfn, solve_mn, QuadraticModel};
use crate::oracle::Oracle;
use crate::relationships::{
    gsh_point_set, mfn_from_gsh_equal_colspace, mn_coordinate_centered_step,
    mn_from_gsh_equal_colspace, mn_special_t, solve_bilinear_min_frobenius, transform_instance,
    BilinearProblem,
};
use crate::sample_set::{poisedness, SampleSet, StructuredSet, DEFAULT_TOL};
use crate::simplex::{build_u_s_ell, delta_delta_f, gsh, DirectionPack};
use crate::testbed::NAMES;

use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst measured deviation or residual.
    pub measured: f64,
    pub tol: f64,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            passed: measured <= tol,
            measured,
            tol,
        }
    }

    fn flag(name: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            passed,
            measured: f64::NAN,
            tol: f64::NAN,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        if self.measured.is_nan() {
            write!(f, "{tag} {}", self.name)
        } else {
            write!(
                f,
                "{tag} {} measured={:.3e} tol={:.1e}",
                self.name, self.measured, self.tol
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Examples,
    Relationships,
    Bounds,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "examples" => Ok(Suite::Examples),
            "relationships" => Ok(Suite::Relationships),
            "bounds" => Ok(Suite::Bounds),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidInput(format!("unknown suite {other:?}"))),
        }
    }
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn max_abs(m: &Mat) -> f64 {
    m.amax()
}

/// `max(|g1 - g2| / (1 + |g2|), |H1 - H2|_F / (1 + |H2|_F))`.
pub fn model_gap(a: &QuadraticModel, b: &QuadraticModel) -> f64 {
    let dg = (&a.g - &b.g).norm() / (1.0 + b.g.norm());
    let dh = (&a.h - &b.h).norm() / (1.0 + b.h.norm());
    dg.max(dh)
}

fn sphere() -> Oracle {
    Oracle::new(|x: &Vector| x.norm_squared())
}

pub fn examples() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let cols = [
        v(&[1.0, 0.0]),
        v(&[0.0, 1.0]),
        v(&[2.0, 0.0]),
        v(&[1.0, 1.0]),
    ];
    let y = SampleSet::new(Vector::zeros(2), Mat::from_columns(&cols))?;

    let (mn, _) = solve_mn(&sphere(), &y)?;
    let dev = (&mn.g - v(&[0.0, 0.8]))
        .amax()
        .max(max_abs(&(&mn.h - Mat::from_diagonal(&v(&[2.0, 0.4])))));
    out.push(Check::new("mn on {0, e1, e2, 2e1, e1+e2}", dev, 1e-10));

    let (mfn, _) = solve_mfn(&sphere(), &y)?;
    let dev = (&mfn.g - v(&[0.0, 1.0]))
        .amax()
        .max(max_abs(&(&mfn.h - Mat::from_diagonal(&v(&[2.0, 0.0])))));
    out.push(Check::new("mfn on {0, e1, e2, 2e1, e1+e2}", dev, 1e-10));

    let y3 = StructuredSet::coordinate(Vector::zeros(3), 2, 1.0)?.expand()?;
    let target = Mat::from_diagonal(&v(&[2.0, 2.0, 0.0]));
    let (mn, _) = solve_mn(&sphere(), &y3)?;
    let (mfn, d) = solve_mfn(&sphere(), &y3)?;
    let (_, df) = y3.delta_f(&sphere())?;
    let report = poisedness(&y3, &df, DEFAULT_TOL)?;
    let dev =
        mn.g.amax()
            .max(max_abs(&(&mn.h - &target)))
            .max(max_abs(&(&mfn.h - &target)));
    let flags = !d.alpha_unique && report.mn_feasible && !report.mfn_poised;
    out.push(Check {
        passed: dev <= 1e-10 && flags,
        ..Check::new("{0, ±e1, ±e2} in R3: MN-poised, not MFN-poised", dev, 1e-10)
    });

    let f = Oracle::new(|x: &Vector| x.sum().powi(2));
    let pack = DirectionPack::shared(
        Mat::identity(2, 2),
        Mat::from_column_slice(2, 1, &[1.0, 0.0]),
    )?;
    let h = gsh(&f, &Vector::zeros(2), &pack)?;
    let dev = max_abs(&(h - Mat::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 0.0])));
    out.push(Check::new(
        "asymmetric simplex Hessian [[2,0],[2,0]]",
        dev,
        1e-12,
    ));
    Ok(out)
}

/// Closed form with `col(T) = col(S)` against MN (and MFN when poised).
pub fn equal_colspace(count: usize, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let (mut mn_gap, mut mfn_gap, mut bil_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut trusted_ok = true;
    let mut poised_seen = 0;
    for _ in 0..count {
        let n = r.random_range(1..=4);
        let p = r.random_range(1..=n);
        let q = r.random_range(1..=p);
        let s = well_conditioned(&mut r, n, p, 10.0) * 0.5;
        // T spans col(S): q columns drawn from it, topped up to rank p.
        let mix = if q == p {
            well_conditioned(&mut r, p, p, 10.0)
        } else {
            let extra = well_conditioned(&mut r, p, q, 10.0);
            let mut m = Mat::zeros(p, p + q);
            m.columns_mut(0, p).copy_from(&Mat::identity(p, p));
            m.columns_mut(p, q).copy_from(&extra);
            m
        };
        let t = &s * mix;
        let quad = RandomQuadratic::draw(&mut r, n);
        let f = quad.oracle();
        let x0 = super::random::gaussian_vec(&mut r, n);
        let closed = mn_from_gsh_equal_colspace(&f, &x0, &s, &t)?;
        let pack = DirectionPack::shared(s.clone(), t.clone())?;
        let y = gsh_point_set(&x0, &pack)?;
        let (mn, _) = solve_mn(&f, &y)?;
        mn_gap = mn_gap.max(model_gap(&closed, &mn));

        let (m2, trusted) = mfn_from_gsh_equal_colspace(&f, &x0, &s, &t)?;
        let (_, df) = y.delta_f(&f)?;
        let report = poisedness(&y, &df, DEFAULT_TOL)?;
        trusted_ok &= trusted == report.mfn_poised;
        if trusted {
            poised_seen += 1;
            let (mfn, _) = solve_mfn(&f, &y)?;
            mfn_gap = mfn_gap.max(model_gap(&m2, &mfn));
        }

        let prob =
            BilinearProblem::new(s.clone(), t.clone(), delta_delta_f(&f, &x0, &s, &t)?, true)?;
        let (hb, _) = solve_bilinear_min_frobenius(&prob, 1e-9)?;
        let hg = gsh(&f, &x0, &pack)?;
        bil_gap = bil_gap.max((hb - &hg).norm() / (1.0 + hg.norm()));
    }
    Ok(vec![
        Check::new(
            format!("equal column space: closed form = MN ({count} instances)"),
            mn_gap,
            1e-9,
        ),
        Check::new(
            format!("equal column space: closed form = MFN ({poised_seen} poised instances)"),
            mfn_gap,
            1e-9,
        ),
        Check::flag(
            "equal column space: alpha trusted iff MFN-poised",
            trusted_ok,
        ),
        Check::new(
            "symmetric bilinear solution = simplex Hessian",
            bil_gap,
            1e-9,
        ),
    ])
}

/// `gsh(S; U_S^l)` with the adapted-centred gradient against MN/MFN on
/// smooth non-quadratic functions.
pub fn special_t(count: usize, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let (mut mn_gap, mut mfn_gap) = (0.0f64, 0.0f64);
    let mut ell_zero = 0;
    let mut poised_seen = 0;
    for k in 0..count {
        let n = r.random_range(1..=4);
        let p = r.random_range(1..=n);
        // Every fifth instance exercises the unshifted frame.
        let ell = if k % 5 == 0 { 0 } else { r.random_range(0..=p) };
        ell_zero += usize::from(ell == 0);
        let s = well_conditioned(&mut r, n, p, 8.0) * 0.4;
        let f = smooth_function(&mut r, n);
        let x0 = super::random::gaussian_vec(&mut r, n) * 0.5;
        let closed = mn_special_t(&f, &x0, &s, ell)?;
        let u = build_u_s_ell(&s, ell)?;
        let y = gsh_point_set(&x0, &DirectionPack::shared(s.clone(), u)?)?;
        let (mn, _) = solve_mn(&f, &y)?;
        mn_gap = mn_gap.max(model_gap(&closed, &mn));
        let (_, df) = y.delta_f(&f)?;
        if poisedness(&y, &df, DEFAULT_TOL)?.mfn_poised {
            poised_seen += 1;
            let (mfn, _) = solve_mfn(&f, &y)?;
            mfn_gap = mfn_gap.max(model_gap(&closed, &mfn));
        }
    }
    Ok(vec![
        Check::new(
            format!(
                "shifted frame U_S^l: closed form = MN ({count} instances, {ell_zero} with l = 0)"
            ),
            mn_gap,
            1e-9,
        ),
        Check::new(
            format!("shifted frame U_S^l: closed form = MFN ({poised_seen} poised instances)"),
            mfn_gap,
            1e-9,
        ),
    ])
}

/// Coordinate structured closed form against MN/MFN.
pub fn coordinate(count: usize, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let (mut mn_gap, mut mfn_gap) = (0.0f64, 0.0f64);
    let mut poised_seen = 0;
    for _ in 0..count {
        let n = r.random_range(1..=5);
        let p = r.random_range(1..=n);
        let h = r.random_range(0.05..1.0);
        let f = smooth_function(&mut r, n);
        let x0 = super::random::gaussian_vec(&mut r, n) * 0.5;
        let closed = mn_coordinate_centered_step(&f, &x0, p, h)?;
        let y = StructuredSet::coordinate(x0.clone(), p, h)?.expand()?;
        let (mn, _) = solve_mn(&f, &y)?;
        mn_gap = mn_gap.max(model_gap(&closed, &mn));
        let (_, df) = y.delta_f(&f)?;
        if poisedness(&y, &df, DEFAULT_TOL)?.mfn_poised {
            poised_seen += 1;
            let (mfn, _) = solve_mfn(&f, &y)?;
            mfn_gap = mfn_gap.max(model_gap(&closed, &mfn));
        }
    }
    Ok(vec![
        Check::new(
            format!("coordinate structured: closed form = MN ({count} instances)"),
            mn_gap,
            1e-9,
        ),
        Check::new(
            format!("coordinate structured: closed form = MFN ({poised_seen} poised instances)"),
            mfn_gap,
            1e-9,
        ),
    ])
}

/// Orthogonal/permutation transformations preserve symmetry and
/// feasibility of the simplex Hessian.
pub fn transforms(count: usize, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let (mut ident, mut sym, mut feas) = (0.0f64, 0.0f64, 0.0f64);
    let mut feasible_ok = true;
    for _ in 0..count {
        let n = r.random_range(2..=4);
        let p = r.random_range(1..=n);
        let s = well_conditioned(&mut r, n, p, 8.0) * 0.4;
        let x0 = super::random::gaussian_vec(&mut r, n) * 0.5;
        let nmat = orthogonal(&mut r, n);
        let p1 = permutation(&mut r, p);

        // Shifted frame: the simplex Hessian is symmetric for any f.
        let ell = r.random_range(0..=p);
        let u = build_u_s_ell(&s, ell)?;
        let p2 = permutation(&mut r, p);
        let f = smooth_function(&mut r, n);
        let h = gsh(&f, &x0, &DirectionPack::shared(s.clone(), u.clone())?)?;
        let tr = transform_instance(&s, &u, &nmat, &p1, &p2, &f, &x0)?;
        let ht = gsh(
            &tr.f,
            &x0,
            &DirectionPack::shared(tr.s.clone(), tr.t.clone())?,
        )?;
        let scale = 1.0 + h.norm();
        ident = ident.max((&ht - &nmat * &h * nmat.transpose()).norm() / scale);
        sym = sym.max((&ht - ht.transpose()).norm() / scale);

        // Equal column spaces with quadratic data: the symmetric bilinear
        // problem is feasible before and after.
        let t = &s * well_conditioned(&mut r, p, p, 8.0);
        let quad = RandomQuadratic::draw(&mut r, n).oracle();
        let p2 = permutation(&mut r, p);
        let tr = transform_instance(&s, &t, &nmat, &p1, &p2, &quad, &x0)?;
        let before = BilinearProblem::new(
            s.clone(),
            t.clone(),
            delta_delta_f(&quad, &x0, &s, &t)?,
            true,
        )?;
        let after = BilinearProblem::new(
            tr.s.clone(),
            tr.t.clone(),
            delta_delta_f(&tr.f, &x0, &tr.s, &tr.t)?,
            true,
        )?;
        match (
            solve_bilinear_min_frobenius(&before, 1e-9),
            solve_bilinear_min_frobenius(&after, 1e-9),
        ) {
            (Ok((hb, _)), Ok((ha, _))) => {
                feas = feas.max((ha - &nmat * &hb * nmat.transpose()).norm() / (1.0 + hb.norm()));
            }
            _ => feasible_ok = false,
        }
    }
    Ok(vec![
        Check::new("transform: simplex Hessian maps to N H N^T", ident, 1e-9),
        Check::new("transform: symmetry preserved", sym, 1e-9),
        Check {
            passed: feasible_ok && feas <= 1e-9,
            ..Check::new("transform: symmetric feasibility preserved", feas, 1e-9)
        },
    ])
}

/// `gsh(S; T)^T = gsh(T; S)` for shared frames.
pub fn transpose_identity(count: usize, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = r.random_range(1..=5);
        let p = r.random_range(1..=n + 1);
        let q = r.random_range(1..=n + 1);
        let s = super::random::gaussian_mat(&mut r, n, p) * 0.3;
        let t = super::random::gaussian_mat(&mut r, n, q) * 0.3;
        let f = smooth_function(&mut r, n);
        let x0 = super::random::gaussian_vec(&mut r, n) * 0.5;
        let pack = DirectionPack::shared(s, t)?;
        let a = gsh(&f, &x0, &pack)?;
        let b = gsh(&f, &x0, &pack.swapped().expect("shared pack"))?;
        worst = worst.max((a.transpose() - b).amax() / (1.0 + a.amax()));
    }
    Ok(vec![Check::new(
        format!("transpose identity ({count} instances)"),
        worst,
        1e-10,
    )])
}

pub fn relationships(count: usize, seed: u64) -> Result<Vec<Check>> {
    let mut out = equal_colspace(count, seed)?;
    out.extend(special_t(count, seed.wrapping_add(1))?);
    out.extend(coordinate(count, seed.wrapping_add(2))?);
    out.extend(transforms(count, seed.wrapping_add(3))?);
    out.extend(transpose_identity(count, seed.wrapping_add(4))?);
    Ok(out)
}

/// Models checked by the bound suite, with the set each uses.
pub const BOUND_MODELS: [(&str, &str); 5] = [
    ("mn", "structured:2"),
    ("mfn", "structured:2"),
    ("qs:centred", "structured:2"),
    ("qs:adapted", "structured:2"),
    ("qs:adapted-1", "structured:2"),
];

/// Sweeps every test function in `R^2` with every model of
/// [`BOUND_MODELS`].
pub fn bounds(deltas: &str, samples: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in NAMES {
        for (model, set) in BOUND_MODELS {
            let cfg = SweepConfig::resolve(PartialConfig {
                function: Some(name.into()),
                x0: Some(vec![0.3, -0.2]),
                set: Some(set.into()),
                model: Some(model.into()),
                deltas: Some(deltas.into()),
                samples: Some(samples),
                ..Default::default()
            })?;
            let res = cmd_sweep(&cfg)?;
            let poised = res.summary.poised_rows == res.summary.rows;
            out.push(Check {
                passed: res.summary.all_bounds_hold && poised,
                ..Check::new(
                    format!("bounds {name} {model}: violations"),
                    res.summary.violations as f64,
                    0.0,
                )
            });
        }
    }
    Ok(out)
}

pub fn run(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Examples | Suite::All) {
        out.extend(examples()?);
    }
    if matches!(suite, Suite::Relationships | Suite::All) {
        out.extend(relationships(20, seed)?);
    }
    if matches!(suite, Suite::Bounds | Suite::All) {
        out.extend(bounds("1:0.5:8", 64)?);
    }
    Ok(out)
}
