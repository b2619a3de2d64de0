//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled = a / 2f64.powi(s);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_point(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| rng.gen_range(*a..*b)).collect()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

/// Sine of the angle between two real vectors.
pub fn sine(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let vh = v / v.norm();
    (u - &vh * vh.dot(u)).norm() / u.norm()
}

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[test]
fn expm_matches_rotation() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]);
    let e = expm(&a);
    let (s, c) = 3f64.sin_cos();
    let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    assert!((e - r).amax() < 1e-14);
}
