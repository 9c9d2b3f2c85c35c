//! Extreme eigenvalues of the pencil `(A_h, M_h)` and the contour geometry
//! derived from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::linalg::{dense_generalized_eigen, BandedLu, CsrMatrix};

/// Below this many DOFs the pencil is solved densely.
pub const DENSE_LIMIT: usize = 200;
const MAX_ITERATIONS: usize = 10_000;
const EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub iterations_min: usize,
    pub iterations_max: usize,
    /// `||A z - lambda M z|| / (lambda ||M z||)` at the returned eigenpairs.
    pub residual_min: f64,
    pub residual_max: f64,
    pub dense: bool,
}

fn relative_residual(a: &CsrMatrix, m: &CsrMatrix, lambda: f64, z: &DVector<f64>) -> f64 {
    let mz = m.mul_vec(z);
    (a.mul_vec(z) - &mz * lambda).norm() / (lambda.abs() * mz.norm())
}

fn m_normalize(m: &CsrMatrix, v: &mut DVector<f64>) {
    let nrm = m.quad_form(v).sqrt();
    *v /= nrm;
}

/// Smallest eigenpair by inverse iteration: `A x_{k+1} = M x_k`.
fn inverse_iteration(a: &CsrMatrix, m: &CsrMatrix) -> Result<(f64, usize, f64)> {
    let n = a.nrows();
    let lu = BandedLu::<f64>::factor(a)?;
    // Smooth positive start vector has a component along the ground state.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 13) as f64);
    m_normalize(m, &mut x);
    let mut lambda = a.quad_form(&x);
    for it in 1..=MAX_ITERATIONS {
        let rhs = m.mul_vec(&x);
        let mut y = DVector::from_vec(lu.solve(rhs.as_slice()));
        m_normalize(m, &mut y);
        x = y;
        lambda = a.quad_form(&x);
        let res = relative_residual(a, m, lambda, &x);
        if res <= EIG_TOL {
            return Ok((lambda, it, res));
        }
    }
    Err(Error::numerical(
        "inverse iteration for the smallest eigenvalue did not converge",
        relative_residual(a, m, lambda, &x),
    ))
}

/// Largest eigenpair via Lanczos on `M^{-1} A` in the `M` inner product,
/// restarted from the current Ritz vector.
fn largest_eigenvalue(a: &CsrMatrix, m: &CsrMatrix) -> Result<(f64, usize, f64)> {
    let n = a.nrows();
    let m_lu = BandedLu::<f64>::factor(m)?;
    let krylov = n.min(120);
    let mut start = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 } + 0.01 * ((i * 31) % 17) as f64);
    let mut total = 0;
    let mut best = (0.0, f64::INFINITY);
    while total < MAX_ITERATIONS {
        m_normalize(m, &mut start);
        let mut basis: Vec<DVector<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..krylov {
            total += 1;
            let av = a.mul_vec(&basis[j]);
            let mut w = DVector::from_vec(m_lu.solve(av.as_slice()));
            // full reorthogonalisation in the M inner product
            for _ in 0..2 {
                for q in &basis {
                    let c = m.bilinear(q, &w);
                    w.axpy(-c, q, 1.0);
                }
            }
            alpha.push(basis[j].dot(&av));
            let b = m.quad_form(&w).sqrt();
            if j + 1 == krylov || b <= 1e-14 * alpha[j].abs() {
                break;
            }
            beta.push(b);
            basis.push(w / b);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let lambda = eig.eigenvalues[top];
        let y = eig.eigenvectors.column(top);
        let mut ritz = DVector::zeros(n);
        for (q, c) in basis.iter().zip(y.iter()) {
            ritz.axpy(*c, q, 1.0);
        }
        let res = relative_residual(a, m, lambda, &ritz);
        best = (lambda, res);
        if res <= EIG_TOL || k == n {
            return Ok((lambda, total, res));
        }
        start = ritz;
    }
    Err(Error::numerical("Lanczos for the largest eigenvalue did not converge", best.1))
}

/// `lambda_min` and `lambda_max` of `A_h z = lambda M_h z`.
pub fn extreme_eigenvalues(fem: &FemOperators) -> Result<SpectralBounds> {
    let (a, m) = (&fem.stiffness, &fem.mass);
    if fem.n_free <= DENSE_LIMIT {
        let (vals, vecs) = dense_generalized_eigen(&a.to_dense(), &m.to_dense())?;
        let last = vals.len() - 1;
        return Ok(SpectralBounds {
            lambda_min: vals[0],
            lambda_max: vals[last],
            iterations_min: 0,
            iterations_max: 0,
            residual_min: relative_residual(a, m, vals[0], &vecs.column(0).into_owned()),
            residual_max: relative_residual(a, m, vals[last], &vecs.column(last).into_owned()),
            dense: true,
        });
    }
    let (lambda_min, iterations_min, residual_min) = inverse_iteration(a, m)?;
    let (lambda_max, iterations_max, residual_max) = largest_eigenvalue(a, m)?;
    Ok(SpectralBounds {
        lambda_min,
        lambda_max,
        iterations_min,
        iterations_max,
        residual_min,
        residual_max,
        dense: false,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContourParams {
    pub alpha: f64,
    pub beta_opt: f64,
    /// Convergence radius; `None` when `lambda_min == lambda_max`.
    pub eta_opt: Option<f64>,
    pub degenerate: bool,
}

/// `beta = sqrt((alpha + l_min)(alpha + l_max))`,
/// `eta = |(-l_max - alpha - beta) / (-l_max - alpha + beta)|`.
pub fn optimal_beta(lambda_min: f64, lambda_max: f64, alpha: f64) -> Result<ContourParams> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("contour abscissa must be positive, got {alpha}")));
    }
    let beta = ((alpha + lambda_min) * (alpha + lambda_max)).sqrt();
    let denom = -lambda_max - alpha + beta;
    let degenerate = denom.abs() <= 1e-14 * (lambda_max + alpha);
    let eta = (!degenerate).then(|| ((-lambda_max - alpha - beta) / denom).abs());
    Ok(ContourParams {
        alpha,
        beta_opt: beta,
        eta_opt: eta,
        degenerate,
    })
}

/// `z = (s - alpha - beta) / (s - alpha + beta)`
pub fn mobius(s: Complex64, alpha: f64, beta: f64) -> Result<Complex64> {
    let denom = s - alpha + beta;
    if denom.norm() == 0.0 {
        return Err(Error::invalid("s = alpha - beta is the pole of the Mobius map"));
    }
    Ok((s - alpha - beta) / denom)
}

/// `s = alpha - beta (z + 1) / (z - 1)`
pub fn mobius_inverse(z: Complex64, alpha: f64, beta: f64) -> Result<Complex64> {
    let denom = z - 1.0;
    if denom.norm() == 0.0 {
        return Err(Error::invalid("z = 1 is the pole of the inverse Mobius map"));
    }
    Ok(alpha - beta * (z + 1.0) / denom)
}

/// Centre and radius of the image of `|z| = eta` under the inverse map.
pub fn circle_image(eta: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let d = 1.0 - eta * eta;
    if d == 0.0 {
        return Err(Error::invalid("eta = 1 maps onto a line, not a circle"));
    }
    Ok((alpha + beta * (1.0 + eta * eta) / d, 2.0 * beta * eta / d.abs()))
}

/// `min{(alpha + l_max - beta (eta-1)/(eta+1))^2, (alpha + l_min - beta (eta+1)/(eta-1))^2}`
pub fn lambda_diagnostic(lambda_min: f64, lambda_max: f64, alpha: f64, beta: f64, eta: f64) -> Result<f64> {
    if !(eta > 1.0) {
        return Err(Error::invalid(format!("eta must exceed 1, got {eta}")));
    }
    let first = (alpha + lambda_max - beta * (eta - 1.0) / (eta + 1.0)).powi(2);
    let second = (alpha + lambda_min - beta * (eta + 1.0) / (eta - 1.0)).powi(2);
    Ok(first.min(second))
}
