//! Thin wrappers over nalgebra for the dense symmetric algebra we need.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub fn cholesky_lower(matrix: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Cholesky::new(matrix.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// Solves `L y = b` for lower-triangular `L`, in index order.
pub fn forward_substitute(lower: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = rhs[i];
        for j in 0..i {
            acc -= lower[(i, j)] * y[j];
        }
        y[i] = acc / lower[(i, i)];
    }
    y
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(matrix.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn leading_block(matrix: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    matrix.view((0, 0), (k, k)).into_owned()
}

pub fn mat_vec(matrix: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let v = matrix * DVector::from_column_slice(x);
    v.iter().copied().collect()
}
