//! Banded LU factorization without pivoting.
//!
//! Every system factored here has a positive-definite Hermitian part
//! (`M + dt A`, `B_h`, and `s M + A` with `Re s > 0`), so all leading principal
//! minors are nonsingular and elimination needs no row exchanges.

use std::ops::{AddAssign, SubAssign};

use num_complex::Complex64;
use num_traits::Num;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Scalar field the banded solver runs over (`f64` or `Complex64`).
pub trait Field: Copy + Num + AddAssign + SubAssign + From<f64> + Send + Sync + 'static {
    fn modulus(self) -> f64;
}

impl Field for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Field for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// LU factors of a square matrix with half-bandwidth `p`, stored row-wise in
/// `2p + 1` diagonals.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    p: usize,
    data: Vec<T>,
}

impl<T: Field> BandedLu<T> {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.p + 1) + (j + self.p - i)
    }

    /// Factors the matrix `sum_k coeff_k * mats_k` without materializing it.
    pub fn factor_combination(mats: &[(&CsrMatrix, T)]) -> Result<Self> {
        let n = mats.first().map(|(m, _)| m.nrows()).unwrap_or(0);
        if mats.iter().any(|(m, _)| m.nrows() != n || m.ncols() != n) {
            return Err(Error::mismatch("banded factorization of non-conforming matrices"));
        }
        let p = mats.iter().map(|(m, _)| m.half_bandwidth()).max().unwrap_or(0);
        let mut lu = Self {
            n,
            p,
            data: vec![T::zero(); n * (2 * p + 1)],
        };
        for (m, c) in mats {
            for i in 0..n {
                for (j, v) in m.row(i) {
                    let k = lu.idx(i, j);
                    lu.data[k] += *c * T::from(v);
                }
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_combination(&[(a, T::one())])
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, p) = (self.n, self.p);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.modulus()));
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot.modulus() <= f64::EPSILON * scale || scale == 0.0 {
                return Err(Error::Factorization(format!(
                    "zero pivot at row {k} of {n} (|pivot| = {:.3e})",
                    pivot.modulus()
                )));
            }
            let last = (k + p).min(n - 1);
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        self.forward_unit_lower(b);
        self.backward_upper(b);
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    fn forward_unit_lower(&self, b: &mut [T]) {
        for i in 0..self.n {
            let first = i.saturating_sub(self.p);
            let mut acc = b[i];
            for j in first..i {
                acc -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = acc;
        }
    }

    fn backward_upper(&self, b: &mut [T]) {
        for i in (0..self.n).rev() {
            let last = (i + self.p).min(self.n - 1);
            let mut acc = b[i];
            for j in i + 1..=last {
                acc -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.idx(i, i)];
        }
    }

    fn pivot(&self, i: usize) -> T {
        self.data[self.idx(i, i)]
    }
}

/// Cholesky factor `B = R^T R` of a symmetric positive-definite banded matrix,
/// derived from the unpivoted LU factors (`U = D L^T`, `R = D^{-1/2} U`).
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    lu: BandedLu<f64>,
    sqrt_pivots: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(b: &CsrMatrix) -> Result<Self> {
        let lu = BandedLu::<f64>::factor(b)?;
        let mut sqrt_pivots = Vec::with_capacity(lu.dim());
        for i in 0..lu.dim() {
            let d = lu.pivot(i);
            if d <= 0.0 {
                return Err(Error::Factorization(format!(
                    "matrix is not positive definite (pivot {i} = {d:.3e})"
                )));
            }
            sqrt_pivots.push(d.sqrt());
        }
        Ok(Self { lu, sqrt_pivots })
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    /// `y = R x`
    pub fn mul_upper(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let p = self.lu.p;
        (0..n)
            .map(|i| {
                let last = (i + p).min(n - 1);
                let ux: f64 = (i..=last).map(|j| self.lu.data[self.lu.idx(i, j)] * x[j]).sum();
                ux / self.sqrt_pivots[i]
            })
            .collect()
    }

    /// `x = R^{-1} y`
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = y
            .iter()
            .zip(&self.sqrt_pivots)
            .map(|(v, d)| v * d)
            .collect();
        self.lu.backward_upper(&mut x);
        x
    }

    /// Solves `B x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve(b)
    }
}
