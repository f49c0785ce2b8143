//! Compressed-row sparse matrices, small dense matrices, and a dense LU
//! used for coarse solves.

mod csr;
mod dense;

pub use csr::{CsrMatrix, DROP_TOLERANCE};
pub use dense::{DenseMatrix, LuFactorization};

/// Serial dot product in index order.
#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `y += a * x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Euclidean norm of a local (non-distributed) vector.
#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
