//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub(crate) fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let m = to_dmatrix(a);
    let eig = m.symmetric_eigen();
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

/// Eigenpair with the smallest eigenvalue.
pub fn min_eigenpair(a: &Array2<f64>) -> (f64, Array1<f64>) {
    let m = to_dmatrix(a);
    let eig = m.symmetric_eigen();
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    let vec = eig.eigenvectors.column(idx);
    (val, Array1::from_iter(vec.iter().copied()))
}

/// Solve a symmetric positive (semi)definite system, falling back to an
/// LU solve when the Cholesky factorization fails.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let m = to_dmatrix(a);
    let rhs = DVector::from_iterator(b.len(), b.iter().copied());
    if let Some(ch) = m.clone().cholesky() {
        let x = ch.solve(&rhs);
        return Ok(Array1::from_iter(x.iter().copied()));
    }
    m.lu()
        .solve(&rhs)
        .map(|x| Array1::from_iter(x.iter().copied()))
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

pub fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}
