//! Dense and sparse matrices, reverse-mode differentiation, and Adam.

mod adam;
mod autodiff;
mod dense;
mod gradcheck;
mod pairs;
mod sparse;

pub use adam::{AdamState, Parameter};
pub use autodiff::{stable_sigmoid, OpTag, Tape, Var, LOG_FLOOR, SIGMOID_EPS};
pub use dense::DenseMatrix;
pub use gradcheck::{finite_difference_check, GradCheckOptions};
pub use pairs::PairTarget;
pub use sparse::SparseMatrix;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Glorot-uniform initialization: entries drawn from `U(-a, a)` with
/// `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("shape")
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("shape")
}

/// Cosine of the angle between two vectors; 0 when either is all zeros.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
