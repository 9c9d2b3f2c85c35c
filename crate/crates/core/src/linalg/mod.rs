//! Sparse storage, banded factorizations and a few dense helpers.

mod banded;
mod sparse;

pub use banded::{BandedCholesky, BandedLu, Field};
pub use sparse::CsrMatrix;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// All eigenvalues (ascending) and M-orthonormal eigenvectors of the dense
/// symmetric pencil `A x = lambda M x`, via Cholesky reduction of `M`.
pub fn dense_generalized_eigen(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(a.nrows(), order.len());
    let back = l_inv.transpose();
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &(&back * eig.eigenvectors.column(i)));
    }
    Ok((values, vectors))
}

/// `max |Phi^T B Phi - I|`
pub fn orthonormality_defect(phi: &DMatrix<f64>, b: &CsrMatrix) -> f64 {
    let gram = phi.transpose() * b.mul_dense(phi);
    let r = phi.ncols();
    (gram - DMatrix::<f64>::identity(r, r)).amax()
}
