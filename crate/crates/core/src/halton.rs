//! Scrambled Halton points and their image in a Euclidean ball.

use std::f64::consts::PI;

use crate::linalg::Vector;

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

// Digit multipliers for the generalized Halton sequence (Faure-Lemieux).
const MULTIPLIERS: [u64; 32] = [
    1, 1, 3, 3, 4, 9, 7, 5, 9, 18, 18, 8, 13, 31, 9, 19, 36, 33, 21, 44, 43, 15, 59, 34, 71, 45,
    24, 80, 18, 19, 29, 86,
];

/// Maximum supported dimension of the unit-cube sequence.
pub const MAX_DIM: usize = PRIMES.len();

fn radical_inverse(mut i: u64, k: usize) -> f64 {
    let b = PRIMES[k];
    let m = MULTIPLIERS[k];
    let inv = 1.0 / b as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while i > 0 {
        let digit = (m * (i % b)) % b;
        out += digit as f64 * scale;
        scale *= inv;
        i /= b;
    }
    out
}

/// Point `i >= 1` of the `dim`-dimensional sequence; every coordinate lies in
/// the open interval `(0, 1)`.
pub fn point(i: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= MAX_DIM, "Halton dimension {dim} exceeds {MAX_DIM}");
    assert!(i >= 1);
    (0..dim).map(|k| radical_inverse(i, k)).collect()
}

/// `count` deterministic points of `B(center, radius)`: Box-Muller normals
/// for the direction, `u^(1/n)` for the radial part.
pub fn ball_points(center: &Vector, radius: f64, count: usize) -> Vec<Vector> {
    let n = center.len();
    let pairs = n.div_ceil(2);
    let dim = 2 * pairs + 1;
    (1..=count as u64)
        .map(|i| {
            let u = point(i, dim);
            let mut z = Vec::with_capacity(2 * pairs);
            for k in 0..pairs {
                let r = (-2.0 * u[2 * k].ln()).sqrt();
                let t = 2.0 * PI * u[2 * k + 1];
                z.push(r * t.cos());
                z.push(r * t.sin());
            }
            z.truncate(n);
            let dir = Vector::from_vec(z);
            let norm = dir.norm();
            let rad = radius * u[dim - 1].powf(1.0 / n as f64);
            if norm > 0.0 {
                center + dir * (rad / norm)
            } else {
                center.clone()
            }
        })
        .collect()
}
