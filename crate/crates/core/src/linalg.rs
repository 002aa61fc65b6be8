//! Shared numerical kernels: Hermitian solves, pseudo-inverse fallbacks,
//! log-determinants and the stabilized softmax.
//!
//! Filters are always obtained by solving linear systems, never by forming an
//! explicit inverse. The solve order is Cholesky (the Hermitian systems here
//! are positive definite whenever the noise variance is positive), then LU,
//! then - only for noise-free systems, which can be singular but consistent -
//! a minimum-norm SVD solve.

use nalgebra::{Cholesky, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::{CMatrix, RMatrix, RVector};

/// Solves A X = B for Hermitian A. Errors if A is singular.
pub fn solve_hermitian(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::SingularMatrix("Hermitian solve failed".into()))
}

/// Solves A X = B for Hermitian A, falling back to the minimum-norm SVD
/// solution when A is singular. Noise-free covariance systems are singular
/// yet consistent (e.g. a rank-one constant channel), and the pseudo-inverse
/// returns the correct filter there.
pub fn solve_hermitian_or_pinv(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol.solve(b));
    }
    let svd = SVD::new(a.clone(), true, true);
    let eps = a.nrows() as f64 * f64::EPSILON * svd.singular_values.max().max(1e-300);
    svd.solve(b, eps)
        .map_err(|e| Error::SingularMatrix(e.to_string()))
}

/// log |det(A)| via LU. Errors when the determinant is exactly zero.
pub fn log_abs_det(a: &CMatrix) -> Result<f64> {
    let det = a.clone().lu().determinant();
    let mag = det.norm();
    if mag == 0.0 {
        return Err(Error::DegenerateFilter);
    }
    Ok(mag.ln())
}

/// Minimum-norm solution of the symmetric PSD system G w = d via
/// eigendecomposition, dropping eigenvalues below a relative threshold.
/// The Gram systems this serves are consistent by construction but may be
/// structurally rank-deficient.
pub fn solve_gram_min_norm(g: &RMatrix, d: &RVector) -> Result<RVector> {
    if !d.iter().all(|v| v.is_finite()) || !g.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularMatrix("non-finite Gram system".into()));
    }
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::SingularMatrix("zero Gram matrix".into()));
    }
    let tol = max * g.nrows() as f64 * f64::EPSILON;
    let mut w = RVector::zeros(d.len());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let u = eig.eigenvectors.column(i);
            w += u * (u.dot(d) / lambda);
        }
    }
    Ok(w)
}

/// Numerically stable softmax: exponents are shifted by their maximum before
/// exponentiation, so inputs up to magnitude ~1e4 (noise-variance-scaled
/// likelihood exponents) cannot overflow.
pub fn softmax(z: &RVector) -> RVector {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = z.map(|v| (v - max).exp());
    let sum: f64 = exp.iter().sum();
    exp / sum
}
