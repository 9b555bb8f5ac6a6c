//! Dense linear algebra boundary.
//!
//! Data lives in `ndarray` arrays throughout the crate; decompositions are
//! delegated to nalgebra behind this module so the rest of the code never
//! touches a second matrix type. Matrices here are small (d up to the low
//! thousands), so conversion cost is negligible next to the factorizations.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `a = u * diag(s) * vt` with singular values in nonincreasing order.
pub fn svd(a: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let svd = to_na(a).svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::NumericalFailure("svd did not return u".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::NumericalFailure("svd did not return v^t".into()))?;
    let s = Array1::from_iter(svd.singular_values.iter().copied());
    Ok((from_na(&u), s, from_na(&vt)))
}

/// Largest singular value of `a`.
pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    to_na(a).singular_values().max()
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
/// Column `j` of the returned matrix is the eigenvector for eigenvalue `j`.
pub fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let eig = to_na(a).symmetric_eigen();
    let d = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .ok_or(())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = Array2::from_shape_fn((d, d), |(i, j)| eig.eigenvectors[(i, order[j])]);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("eigendecomposition diverged".into()));
    }
    Ok((vals, vecs))
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let chol = to_na(a).cholesky().ok_or(Error::SingularCovariance)?;
    let rhs = nalgebra::DVector::from_iterator(b.len(), b.iter().copied());
    let x = chol.solve(&rhs);
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Cholesky factorization reused across many right-hand sides.
pub struct SpdFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SpdFactor {
    pub fn new(a: &Array2<f64>) -> Result<Self> {
        let chol = to_na(a).cholesky().ok_or(Error::SingularCovariance)?;
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let rhs = nalgebra::DVector::from_iterator(b.len(), b.iter().copied());
        let x = self.chol.solve(&rhs);
        Array1::from_iter(x.iter().copied())
    }

    /// Solves against every column of `b` at once.
    pub fn solve_matrix(&self, b: &Array2<f64>) -> Array2<f64> {
        let x = self.chol.solve(&to_na(b));
        from_na(&x)
    }
}

/// Solves `a x = b` for general square `a` via LU with partial pivoting.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let lu = to_na(a).lu();
    let rhs = nalgebra::DVector::from_iterator(b.len(), b.iter().copied());
    match lu.solve(&rhs) {
        Some(x) => {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularCovariance);
            }
            Ok(Array1::from_iter(x.iter().copied()))
        }
        None => Err(Error::SingularCovariance),
    }
}
