//! MN, MFN and simplex-derivative (QS) quadratic models.

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_vec, rank, solve_min_norm, sym_part, Mat, Vector};
use crate::oracle::Oracle;
use crate::sample_set::{build_p_f, mn_multipliers, relative_residual, SampleSet, DEFAULT_TOL};
use crate::simplex::{build_u_s_ell, gsg_shifted, gsh, DirectionPack};

/// `m(x) = c + g.(x - x0) + (x - x0).H(x - x0) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub x0: Vector,
    pub c: f64,
    pub g: Vector,
    pub h: Mat,
    pub symmetric: bool,
}

/// `|H - H^T|_F <= 1e-10 (1 + |H|_F)`.
pub fn is_symmetric(h: &Mat) -> bool {
    (h - h.transpose()).norm() <= 1e-10 * (1.0 + h.norm())
}

impl QuadraticModel {
    pub fn new(x0: Vector, c: f64, g: Vector, h: Mat) -> Result<Self> {
        let n = x0.len();
        if g.len() != n || h.nrows() != n || h.ncols() != n {
            return Err(Error::invalid("model dimensions disagree"));
        }
        let symmetric = is_symmetric(&h);
        Ok(QuadraticModel {
            x0,
            c,
            g,
            h,
            symmetric,
        })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        let d = x - &self.x0;
        self.c + self.g.dot(&d) + 0.5 * d.dot(&(&self.h * &d))
    }

    /// `g + (H + H^T) d / 2`.
    pub fn grad(&self, x: &Vector) -> Vector {
        let d = x - &self.x0;
        &self.g + sym_part(&self.h) * d
    }

    pub fn hess(&self) -> &Mat {
        &self.h
    }
}

pub fn model_eval(m: &QuadraticModel, x: &Vector) -> f64 {
    m.eval(x)
}

pub fn model_grad(m: &QuadraticModel, x: &Vector) -> Vector {
    m.grad(x)
}

pub fn model_hess(m: &QuadraticModel) -> Mat {
    m.h.clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    /// Lagrange multipliers of the interpolation constraints.
    pub multipliers: Vector,
    /// Relative residual of the solved KKT-derived linear system.
    pub kkt_residual: f64,
    /// `max_i |constraint_i| / (1 + max_i |delta_i|)`.
    pub feasibility_residual: f64,
    pub alpha_unique: bool,
    pub hessian_unique: bool,
}

/// `H = sum_i lambda_i d_i d_i^T / 2`.
fn hessian_from_multipliers(d: &Mat, lambda: &Vector) -> Mat {
    let scaled = Mat::from_fn(d.nrows(), d.ncols(), |r, c| d[(r, c)] * lambda[c]);
    sym_part(&(scaled * d.transpose() * 0.5))
}

fn constraint_violation(d: &Mat, alpha: &Vector, h: &Mat, delta: &Vector) -> f64 {
    let mut worst = 0.0f64;
    for (i, di) in d.column_iter().enumerate() {
        let r = di.dot(alpha) + 0.5 * di.dot(&(h * di)) - delta[i];
        worst = worst.max(r.abs());
    }
    worst / (1.0 + delta.amax())
}

fn check_values(y: &SampleSet, delta: &Vector) -> Result<()> {
    ensure_finite_vec(delta, "function differences")?;
    if delta.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} differences for {} directions",
            delta.len(),
            y.len()
        )));
    }
    Ok(())
}

/// MN model from `f0 = f(x0)` and `delta_i = f(x0 + d_i) - f0`.
pub fn solve_mn_from_values(
    y: &SampleSet,
    f0: f64,
    delta: &Vector,
    tol: f64,
) -> Result<(QuadraticModel, SolveDiagnostics)> {
    check_values(y, delta)?;
    let (lambda, rel) = mn_multipliers(y, delta)?;
    if rel > tol {
        return Err(Error::MnInfeasible { residual: rel });
    }
    let d = y.directions();
    let alpha = d * &lambda;
    let h = hessian_from_multipliers(d, &lambda);
    let feas = constraint_violation(d, &alpha, &h, delta);
    let model = QuadraticModel::new(y.x0().clone(), f0, alpha, h)?;
    Ok((
        model,
        SolveDiagnostics {
            multipliers: lambda,
            kkt_residual: rel,
            feasibility_residual: feas,
            alpha_unique: true,
            hessian_unique: true,
        },
    ))
}

/// MFN model from precomputed values; see [`solve_mn_from_values`].
pub fn solve_mfn_from_values(
    y: &SampleSet,
    f0: f64,
    delta: &Vector,
    tol: f64,
) -> Result<(QuadraticModel, SolveDiagnostics)> {
    check_values(y, delta)?;
    let (m, n) = (y.len(), y.dim());
    let pf = build_p_f(y);
    let mut rhs = Vector::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(delta);
    let sol = solve_min_norm(&pf.f, &rhs, None)?;
    let rel = relative_residual(&pf.f, &sol.x, &rhs);
    if rel > tol {
        return Err(Error::MfnInfeasible { residual: rel });
    }
    let lambda = sol.x.rows(0, m) / y.radius().powi(4);
    let d = y.directions();
    let h = hessian_from_multipliers(d, &lambda);
    // The gradient is recovered as the minimum-norm solution of the
    // remaining linear constraints, which also covers rank-deficient D.
    let curv = Vector::from_iterator(m, d.column_iter().map(|di| 0.5 * di.dot(&(&h * di))));
    let alpha = solve_min_norm(&d.transpose(), &(delta - curv), None)?.x;
    let feas = constraint_violation(d, &alpha, &h, delta);
    let alpha_unique = rank(d, None)? == n;
    let model = QuadraticModel::new(y.x0().clone(), f0, alpha, h)?;
    Ok((
        model,
        SolveDiagnostics {
            multipliers: lambda,
            kkt_residual: rel,
            feasibility_residual: feas,
            alpha_unique,
            hessian_unique: true,
        },
    ))
}

pub fn solve_mn_tol(
    f: &Oracle,
    y: &SampleSet,
    tol: f64,
) -> Result<(QuadraticModel, SolveDiagnostics)> {
    let (f0, delta) = y.delta_f(f)?;
    solve_mn_from_values(y, f0, &delta, tol)
}

pub fn solve_mfn_tol(
    f: &Oracle,
    y: &SampleSet,
    tol: f64,
) -> Result<(QuadraticModel, SolveDiagnostics)> {
    let (f0, delta) = y.delta_f(f)?;
    solve_mfn_from_values(y, f0, &delta, tol)
}

/// Minimizes `|alpha|^2 + |H|_F^2` over interpolating quadratics.
pub fn solve_mn(f: &Oracle, y: &SampleSet) -> Result<(QuadraticModel, SolveDiagnostics)> {
    solve_mn_tol(f, y, DEFAULT_TOL)
}

/// Minimizes `|H|_F^2` over interpolating quadratics.
pub fn solve_mfn(f: &Oracle, y: &SampleSet) -> Result<(QuadraticModel, SolveDiagnostics)> {
    solve_mfn_tol(f, y, DEFAULT_TOL)
}

/// `coef * gsg(x0 + shift; scale * S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradTerm {
    pub coef: f64,
    pub shift: Vector,
    pub s: Mat,
    pub scale: f64,
}

/// `beta * gsh(x0; S; T_1..T_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessTerm {
    pub beta: f64,
    pub pack: DirectionPack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QSSpec {
    pub grad_terms: Vec<GradTerm>,
    pub hess_terms: Vec<HessTerm>,
}

impl QSSpec {
    pub fn new(grad_terms: Vec<GradTerm>, hess_terms: Vec<HessTerm>) -> Result<Self> {
        if grad_terms.is_empty() || hess_terms.is_empty() {
            return Err(Error::invalid(
                "a QS spec needs a gradient term and a Hessian term",
            ));
        }
        let n = hess_terms[0].pack.dim();
        let dims_ok = grad_terms
            .iter()
            .all(|t| t.s.nrows() == n && t.shift.len() == n)
            && hess_terms.iter().all(|t| t.pack.dim() == n);
        if !dims_ok {
            return Err(Error::invalid("QS terms disagree on the dimension"));
        }
        Ok(QSSpec {
            grad_terms,
            hess_terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.hess_terms[0].pack.dim()
    }

    /// `g = (gsg(S) + gsg(-S)) / 2`, `H = gsh(S; T_i = [-s_i])`.
    pub fn centred(s: &Mat) -> Result<Self> {
        let n = s.nrows();
        let zero = Vector::zeros(n);
        let ts = s
            .column_iter()
            .map(|c| Mat::from_column_slice(n, 1, (-c).as_slice()))
            .collect();
        Self::new(
            vec![
                GradTerm {
                    coef: 0.5,
                    shift: zero.clone(),
                    s: s.clone(),
                    scale: 1.0,
                },
                GradTerm {
                    coef: 0.5,
                    shift: zero,
                    s: s.clone(),
                    scale: -1.0,
                },
            ],
            vec![HessTerm {
                beta: 1.0,
                pack: DirectionPack::per_direction(s.clone(), ts)?,
            }],
        )
    }

    /// Adapted-centred gradient with `H = gsh(S; U_S^l)`. `ell` is 1-based,
    /// `0` for no shift.
    pub fn adapted(s: &Mat, ell: usize) -> Result<Self> {
        let u = build_u_s_ell(s, ell)?;
        let shift = if ell == 0 {
            Vector::zeros(s.nrows())
        } else {
            -s.column(ell - 1).into_owned()
        };
        Self::new(
            vec![
                GradTerm {
                    coef: 1.0,
                    shift: Vector::zeros(s.nrows()),
                    s: s.clone(),
                    scale: 1.0,
                },
                GradTerm {
                    coef: 1.0,
                    shift: shift.clone(),
                    s: s.clone(),
                    scale: 1.0,
                },
                GradTerm {
                    coef: -1.0,
                    shift,
                    s: s.clone(),
                    scale: 2.0,
                },
            ],
            vec![HessTerm {
                beta: 1.0,
                pack: DirectionPack::shared(s.clone(), u)?,
            }],
        )
    }

    /// `g = gsg(S)`, `H = gsh(S; S)`. Does not interpolate in general.
    pub fn forward(s: &Mat) -> Result<Self> {
        Self::new(
            vec![GradTerm {
                coef: 1.0,
                shift: Vector::zeros(s.nrows()),
                s: s.clone(),
                scale: 1.0,
            }],
            vec![HessTerm {
                beta: 1.0,
                pack: DirectionPack::shared(s.clone(), s.clone())?,
            }],
        )
    }

    /// `centred`, `forward`, `adapted` (same as `adapted-0`) or `adapted-<l>`.
    pub fn preset(name: &str, s: &Mat) -> Result<Self> {
        match name {
            "centred" | "centered" => Self::centred(s),
            "forward" => Self::forward(s),
            "adapted" => Self::adapted(s, 0),
            other => match other.strip_prefix("adapted-").map(str::parse::<usize>) {
                Some(Ok(ell)) => Self::adapted(s, ell),
                _ => Err(Error::invalid(format!("unknown QS preset {other:?}"))),
            },
        }
    }

    /// Offsets from `x0` of every point the spec evaluates, zero excluded
    /// only by [`SampleSet::from_offsets`].
    pub fn offsets(&self) -> Vec<Vector> {
        let mut out = Vec::new();
        for t in &self.grad_terms {
            out.push(t.shift.clone());
            for c in t.s.column_iter() {
                out.push(&t.shift + c * t.scale);
            }
        }
        for t in &self.hess_terms {
            out.extend(t.pack.offsets());
        }
        out
    }

    /// The sample set formed by the union of all points used.
    pub fn sample_set(&self, x0: &Vector) -> Result<SampleSet> {
        SampleSet::from_offsets(x0.clone(), &self.offsets())
    }
}

pub fn build_qs(f: &Oracle, x0: &Vector, spec: &QSSpec) -> Result<QuadraticModel> {
    if x0.len() != spec.dim() {
        return Err(Error::invalid("x0 dimension differs from the QS spec"));
    }
    let n = x0.len();
    let mut g = Vector::zeros(n);
    for t in &spec.grad_terms {
        g += gsg_shifted(f, x0, &t.shift, &(&t.s * t.scale))? * t.coef;
    }
    let mut h = Mat::zeros(n, n);
    for t in &spec.hess_terms {
        h += gsh(f, x0, &t.pack)? * t.beta;
    }
    QuadraticModel::new(x0.clone(), f.eval(x0)?, g, h)
}

/// Largest `|m(y) - f(y)|` over the points of `Y`, and whether it is at most
/// `tol (1 + max |f(y)|)`.
pub fn interpolation_check(
    m: &QuadraticModel,
    f: &Oracle,
    y: &SampleSet,
    tol: f64,
) -> Result<(f64, bool)> {
    let mut worst = 0.0f64;
    let mut fmax = 0.0f64;
    for p in y.points() {
        let fv = f.eval(&p)?;
        worst = worst.max((m.eval(&p) - fv).abs());
        fmax = fmax.max(fv.abs());
    }
    Ok((worst, worst <= tol * (1.0 + fmax)))
}
