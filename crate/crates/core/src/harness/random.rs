//! Seeded random instances shared by the CLI, the verify suites and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Mat, Vector};
use crate::oracle::Oracle;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `p` directions uniform on the unit sphere, as columns.
pub fn unit_directions(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Mat {
    let mut m = gaussian_mat(rng, n, p);
    for mut c in m.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    m
}

/// Gaussian matrix whose singular values lie in `[1/kappa, 1]` after
/// rescaling; rejects draws with worse conditioning.
pub fn well_conditioned(rng: &mut ChaCha8Rng, rows: usize, cols: usize, kappa: f64) -> Mat {
    loop {
        let m = gaussian_mat(rng, rows, cols);
        let s = m.singular_values();
        let (hi, lo) = (s.max(), s.min());
        if lo > 0.0 && hi / lo <= kappa {
            return m / hi;
        }
    }
}

/// Orthogonal factor of a Gaussian matrix, signs fixed by `R`'s diagonal.
pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let qr = gaussian_mat(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut p = Mat::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        p[(i, j)] = 1.0;
    }
    p
}

/// `c + b.x + x.A x / 2` with symmetric Gaussian `A`.
#[derive(Debug, Clone)]
pub struct RandomQuadratic {
    pub a: Mat,
    pub b: Vector,
    pub c: f64,
}

impl RandomQuadratic {
    pub fn draw(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let g = gaussian_mat(rng, n, n);
        RandomQuadratic {
            a: (&g + g.transpose()) * 0.5,
            b: gaussian_vec(rng, n),
            c: rng.sample(StandardNormal),
        }
    }

    pub fn oracle(&self) -> Oracle {
        let q = self.clone();
        Oracle::new(move |x: &Vector| q.c + q.b.dot(x) + 0.5 * x.dot(&(&q.a * x)))
    }
}

/// `sum_k a_k sin(w_k.x + phi_k) + exp(v.x) / 2`, smooth and far from
/// quadratic.
pub fn smooth_function(rng: &mut ChaCha8Rng, n: usize) -> Oracle {
    let terms: Vec<(f64, Vector, f64)> = (0..3)
        .map(|_| {
            (
                rng.sample(StandardNormal),
                gaussian_vec(rng, n),
                rng.random_range(0.0..6.0),
            )
        })
        .collect();
    let v = gaussian_vec(rng, n) * 0.5;
    Oracle::new(move |x: &Vector| {
        terms
            .iter()
            .map(|(a, w, phi)| a * (w.dot(x) + phi).sin())
            .sum::<f64>()
            + 0.5 * v.dot(x).exp()
    })
}
