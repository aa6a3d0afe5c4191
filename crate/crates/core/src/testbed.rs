//! Analytic test functions with closed-form Lipschitz data on balls.

use crate::bounds::LipschitzData;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Mat, Vector};
use crate::oracle::Oracle;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Sphere,
    RankOne,
    Quadratic { a: Mat, b: Vector },
    Quartic,
    Rosenbrock,
    Trig,
    Exponential,
}

/// Function names accepted by [`by_name`].
pub const NAMES: [&str; 7] = [
    "sphere",
    "rank-one",
    "quadratic",
    "quartic",
    "rosenbrock",
    "trig",
    "exp",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    name: &'static str,
    dim: usize,
    kind: Kind,
}

fn fixed_quadratic(n: usize) -> (Mat, Vector) {
    // Diagonally dominant tridiagonal, hence positive definite.
    let a = Mat::from_fn(n, n, |i, j| {
        if i == j {
            2.0 + i as f64
        } else if i.abs_diff(j) == 1 {
            0.5
        } else {
            0.0
        }
    });
    let b = Vector::from_fn(
        n,
        |i, _| if i % 2 == 0 { 0.5 } else { -1.0 } * (i + 1) as f64,
    );
    (a, b)
}

impl TestFunction {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the Hessian is constant, so every model error has a
    /// vanishing leading term along sample directions.
    pub fn is_quadratic(&self) -> bool {
        matches!(
            self.kind,
            Kind::Sphere | Kind::RankOne | Kind::Quadratic { .. }
        )
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        match &self.kind {
            Kind::Sphere => x.norm_squared(),
            Kind::RankOne => x.sum().powi(2),
            Kind::Quadratic { a, b } => 0.5 * x.dot(&(a * x)) + b.dot(x),
            Kind::Quartic => x.iter().map(|t| t.powi(4)).sum(),
            Kind::Rosenbrock => (0..self.dim - 1)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2))
                .sum(),
            Kind::Trig => x.iter().map(|t| t.sin()).sum(),
            Kind::Exponential => x.sum().exp(),
        }
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        let n = self.dim;
        match &self.kind {
            Kind::Sphere => x * 2.0,
            Kind::RankOne => Vector::from_element(n, 2.0 * x.sum()),
            Kind::Quadratic { a, b } => a * x + b,
            Kind::Quartic => x.map(|t| 4.0 * t.powi(3)),
            Kind::Rosenbrock => {
                let mut g = Vector::zeros(n);
                for i in 0..n - 1 {
                    let r = x[i + 1] - x[i] * x[i];
                    g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
                    g[i + 1] += 200.0 * r;
                }
                g
            }
            Kind::Trig => x.map(f64::cos),
            Kind::Exponential => Vector::from_element(n, x.sum().exp()),
        }
    }

    pub fn hess(&self, x: &Vector) -> Mat {
        let n = self.dim;
        match &self.kind {
            Kind::Sphere => Mat::identity(n, n) * 2.0,
            Kind::RankOne => Mat::from_element(n, n, 2.0),
            Kind::Quadratic { a, .. } => a.clone(),
            Kind::Quartic => Mat::from_diagonal(&x.map(|t| 12.0 * t * t)),
            Kind::Rosenbrock => {
                let mut h = Mat::zeros(n, n);
                for i in 0..n - 1 {
                    h[(i, i)] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
                    h[(i, i + 1)] -= 400.0 * x[i];
                    h[(i + 1, i)] -= 400.0 * x[i];
                    h[(i + 1, i + 1)] += 200.0;
                }
                h
            }
            Kind::Trig => Mat::from_diagonal(&x.map(|t| -t.sin())),
            Kind::Exponential => Mat::from_element(n, n, x.sum().exp()),
        }
    }

    /// Caching oracle for this function.
    pub fn oracle(&self) -> Oracle {
        let me = self.clone();
        Oracle::new(move |x: &Vector| me.eval(x))
    }

    /// Conservative closed-form constants on `B(center, radius)`.
    ///
    /// With `M = |c|_inf + r` bounding every coordinate on the ball:
    /// quartic `12 M^2`, `24 M`; Rosenbrock row sums of the Hessian and of
    /// its directional derivative give `1200 M^2 + 1200 M + 202` and
    /// `2400 M + 1200`; exponential uses `s_max = 1.c + sqrt(n) r`.
    pub fn lipschitz_on(&self, center: &Vector, radius: f64) -> LipschitzData {
        let n = self.dim as f64;
        let rn = n.sqrt();
        let big_m = center.amax() + radius;
        let (l_grad, l_hess, kappa_g) = match &self.kind {
            Kind::Sphere => (2.0, 0.0, 2.0 * (center.norm() + radius)),
            Kind::RankOne => (2.0 * n, 0.0, 2.0 * rn * (center.sum().abs() + rn * radius)),
            Kind::Quadratic { a, b } => {
                let na = spectral_norm(a);
                (na, 0.0, na * (center.norm() + radius) + b.norm())
            }
            Kind::Quartic => {
                let kg = 4.0 * center.map(|c| (c.abs() + radius).powi(3)).norm();
                (12.0 * big_m * big_m, 24.0 * big_m, kg)
            }
            Kind::Rosenbrock => {
                let m = big_m;
                let part = 400.0 * m * (m + m * m) + 2.0 * (1.0 + m) + 200.0 * (m + m * m);
                (
                    1200.0 * m * m + 1200.0 * m + 202.0,
                    2400.0 * m + 1200.0,
                    rn * part,
                )
            }
            Kind::Trig => (1.0, 1.0, rn),
            Kind::Exponential => {
                let e = (center.sum() + rn * radius).exp();
                (n * e, n * rn * e, rn * e)
            }
        };
        LipschitzData {
            l_grad,
            l_hess,
            kappa_g,
            region_radius: radius,
        }
    }
}

/// Looks a function up by name in dimension `n`.
pub fn by_name(name: &str, n: usize) -> Result<TestFunction> {
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let (name, kind) = match name {
        "sphere" => ("sphere", Kind::Sphere),
        "rank-one" => ("rank-one", Kind::RankOne),
        "quadratic" => {
            let (a, b) = fixed_quadratic(n);
            ("quadratic", Kind::Quadratic { a, b })
        }
        "quartic" => ("quartic", Kind::Quartic),
        "rosenbrock" if n >= 2 => ("rosenbrock", Kind::Rosenbrock),
        "rosenbrock" => return Err(Error::invalid("rosenbrock needs n >= 2")),
        "trig" => ("trig", Kind::Trig),
        "exp" => ("exp", Kind::Exponential),
        other => return Err(Error::invalid(format!("unknown test function {other:?}"))),
    };
    Ok(TestFunction { name, dim: n, kind })
}

/// Every function available in dimension `n`.
pub fn registry(n: usize) -> Vec<TestFunction> {
    NAMES
        .iter()
        .filter_map(|name| by_name(name, n).ok())
        .collect()
}

/// Max deviation of the analytic gradient from central differences of `f`,
/// and of the analytic Hessian from central differences of the gradient.
pub fn fd_check(tf: &TestFunction, x: &Vector, h: f64) -> (f64, f64) {
    let n = tf.dim();
    let g = tf.grad(x);
    let hs = tf.hess(x);
    let mut grad_err = 0.0f64;
    let mut hess_err = 0.0f64;
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = h;
        let fd = (tf.eval(&(x + &e)) - tf.eval(&(x - &e))) / (2.0 * h);
        grad_err = grad_err.max((fd - g[i]).abs());
        let col = (tf.grad(&(x + &e)) - tf.grad(&(x - &e))) / (2.0 * h);
        for j in 0..n {
            hess_err = hess_err.max((col[j] - hs[(j, i)]).abs());
        }
    }
    (grad_err, hess_err)
}
