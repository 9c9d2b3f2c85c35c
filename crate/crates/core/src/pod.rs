//! Weighted POD with respect to the `B_h` inner product.
//!
//! Two algorithms compute the same basis: the method of snapshots
//! (eigen-decomposition of the weighted `M x M` correlation matrix) and the
//! Cholesky route (SVD of `R_h S D^{1/2}` where `B_h = R_h^T R_h`).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, CsrMatrix};

/// Singular values below `RANK_TOL * sigma_1` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PodMethod {
    Snapshots,
    CholeskySvd,
}

/// How many modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// At most this many modes (capped at the numerical rank).
    Rank(usize),
    /// Smallest `R` with `sum_{k>R} sigma_k^2 <= tol^2 * sum_k sigma_k^2`.
    Energy(f64),
    /// Every numerically nonzero mode.
    Full,
}

#[derive(Debug, Clone)]
pub struct ReducedBasis {
    /// `N_free x R`, `B_h`-orthonormal columns.
    pub phi: DMatrix<f64>,
    /// All numerically nonzero singular values, non-increasing (length `r`).
    pub sigma: Vec<f64>,
    pub method: PodMethod,
    /// Set when the requested `R` exceeded the numerical rank.
    pub rank_capped: bool,
}

impl ReducedBasis {
    pub fn empty(n: usize, method: PodMethod) -> Self {
        Self {
            phi: DMatrix::zeros(n, 0),
            sigma: Vec::new(),
            method,
            rank_capped: false,
        }
    }

    /// Number of basis vectors `R`.
    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    /// Numerical rank `r` of the weighted snapshot matrix.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Basis restricted to its first `r` columns.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.dim());
        Self {
            phi: self.phi.columns(0, r).into_owned(),
            sigma: self.sigma.clone(),
            method: self.method,
            rank_capped: self.rank_capped,
        }
    }
}

fn check_inputs(n_rows: usize, n_cols: usize, weights: &[f64], b: &CsrMatrix) -> Result<()> {
    if weights.len() != n_cols {
        return Err(Error::mismatch(format!("{} weights for {n_cols} snapshots", weights.len())));
    }
    if b.nrows() != n_rows || b.ncols() != n_rows {
        return Err(Error::mismatch(format!(
            "inner-product matrix is {}x{} for {n_rows}-dimensional snapshots",
            b.nrows(),
            b.ncols()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("POD weights must be positive, got {w}")));
    }
    Ok(())
}

fn choose_rank(sigma: &[f64], truncation: Truncation) -> (usize, bool) {
    let r = sigma.len();
    match truncation {
        Truncation::Rank(k) => (k.min(r), k > r),
        Truncation::Full => (r, false),
        Truncation::Energy(tol) => {
            let total: f64 = sigma.iter().map(|s| s * s).sum();
            let mut tail = total;
            for (k, s) in sigma.iter().enumerate() {
                if tail <= tol * tol * total {
                    return (k, false);
                }
                tail -= s * s;
            }
            (r, false)
        }
    }
}

/// Flips each column so that its entry of largest magnitude is positive.
fn fix_signs(phi: &mut DMatrix<f64>) {
    for mut col in phi.column_iter_mut() {
        let k = col.iamax();
        if col[k] < 0.0 {
            col.neg_mut();
        }
    }
}

fn weighted(s: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut out = s.clone();
    for (mut col, w) in out.column_iter_mut().zip(weights) {
        col *= w.sqrt();
    }
    out
}

/// Method of snapshots: eigen-decomposition of `D^{1/2} S^T B S D^{1/2}`.
///
/// The candidate modes `S D^{1/2} psi_k` (eigenvalues above `RANK_TOL^2`
/// times the largest) are `B`-orthonormalized and refined by an SVD of the
/// projected `k x M` matrix. Without that step the modes lose orthogonality
/// and accuracy once `sigma_k / sigma_1` drops below `sqrt(eps)`.
pub fn pod_method_of_snapshots(
    s: &DMatrix<f64>,
    weights: &[f64],
    b: &CsrMatrix,
    truncation: Truncation,
) -> Result<ReducedBasis> {
    check_inputs(s.nrows(), s.ncols(), weights, b)?;
    let n = s.nrows();
    let sw = weighted(s, weights);
    let bsw = b.mul_dense(&sw);
    let corr = sw.transpose() * &bsw;
    let corr = (&corr + corr.transpose()) * 0.5;
    let eig = corr.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lambda_max = order.first().map(|&i| eig.eigenvalues[i]).unwrap_or(0.0);
    if !(lambda_max > 0.0) {
        return Ok(ReducedBasis::empty(n, PodMethod::Snapshots));
    }
    let floor = lambda_max * RANK_TOL * RANK_TOL;
    let candidates: Vec<DVector<f64>> = order
        .into_iter()
        .take_while(|&i| eig.eigenvalues[i] > floor)
        .map(|i| &sw * eig.eigenvectors.column(i))
        .collect();
    let q = b_orthonormalize(&candidates, b);

    let projected = q.transpose() * &bsw;
    let svd = projected.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::numerical("SVD did not return left singular vectors", f64::NAN))?;
    let mut rank_order: Vec<usize> = (0..svd.singular_values.len()).collect();
    rank_order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma_max = rank_order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let kept: Vec<usize> = rank_order
        .into_iter()
        .take_while(|&i| svd.singular_values[i] > RANK_TOL * sigma_max)
        .collect();
    let sigma: Vec<f64> = kept.iter().map(|&i| svd.singular_values[i]).collect();
    let (r, capped) = choose_rank(&sigma, truncation);
    let mut phi = DMatrix::zeros(n, r);
    for k in 0..r {
        phi.set_column(k, &(&q * u.column(kept[k])));
    }
    fix_signs(&mut phi);
    Ok(ReducedBasis {
        phi,
        sigma,
        method: PodMethod::Snapshots,
        rank_capped: capped,
    })
}

/// Gram-Schmidt in the `B` inner product, two passes per vector; vectors that
/// cancel completely are dropped.
fn b_orthonormalize(vectors: &[DVector<f64>], b: &CsrMatrix) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut b_basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let initial = b.quad_form(v).max(0.0).sqrt();
        if initial == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for (q, bq) in basis.iter().zip(&b_basis) {
                let c = bq.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let bw = b.mul_vec(&w);
        let norm = w.dot(&bw).max(0.0).sqrt();
        if norm <= 1e-14 * initial {
            continue;
        }
        basis.push(w / norm);
        b_basis.push(bw / norm);
    }
    if basis.is_empty() {
        DMatrix::zeros(vectors.first().map(|v| v.len()).unwrap_or(0), 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Cholesky route: SVD of `R_h S D^{1/2}`, basis `R_h^{-1} U`.
pub fn pod_cholesky_svd(
    s: &DMatrix<f64>,
    weights: &[f64],
    b: &CsrMatrix,
    truncation: Truncation,
) -> Result<ReducedBasis> {
    check_inputs(s.nrows(), s.ncols(), weights, b)?;
    let chol = BandedCholesky::factor(b)?;
    pod_cholesky_svd_with(s, weights, &chol, truncation)
}

pub(crate) fn pod_cholesky_svd_with(
    s: &DMatrix<f64>,
    weights: &[f64],
    chol: &BandedCholesky,
    truncation: Truncation,
) -> Result<ReducedBasis> {
    let n = s.nrows();
    let sw = weighted(s, weights);
    let mut rs = DMatrix::zeros(n, sw.ncols());
    for (k, col) in sw.column_iter().enumerate() {
        let v: Vec<f64> = col.iter().copied().collect();
        rs.set_column(k, &DVector::from_vec(chol.mul_upper(&v)));
    }
    let svd = rs.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::numerical("SVD did not return left singular vectors", f64::NAN))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma_max = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    if !(sigma_max > 0.0) {
        return Ok(ReducedBasis::empty(n, PodMethod::CholeskySvd));
    }
    let kept: Vec<usize> = order
        .into_iter()
        .take_while(|&i| svd.singular_values[i] > RANK_TOL * sigma_max)
        .collect();
    let sigma: Vec<f64> = kept.iter().map(|&i| svd.singular_values[i]).collect();
    let (r, capped) = choose_rank(&sigma, truncation);
    let mut phi = DMatrix::zeros(n, r);
    for k in 0..r {
        let zeta: Vec<f64> = u.column(kept[k]).iter().copied().collect();
        phi.set_column(k, &DVector::from_vec(chol.solve_upper(&zeta)));
    }
    fix_signs(&mut phi);
    Ok(ReducedBasis {
        phi,
        sigma,
        method: PodMethod::CholeskySvd,
        rank_capped: capped,
    })
}

/// Method of snapshots when `M <= N_free`, Cholesky-SVD otherwise.
pub fn pod(s: &DMatrix<f64>, weights: &[f64], b: &CsrMatrix, truncation: Truncation) -> Result<ReducedBasis> {
    if s.ncols() <= s.nrows() {
        pod_method_of_snapshots(s, weights, b, truncation)
    } else {
        pod_cholesky_svd(s, weights, b, truncation)
    }
}

/// Unit-weight POD of every state of a full-order trajectory.
pub fn time_domain_pod(states: &[DVector<f64>], b: &CsrMatrix, truncation: Truncation) -> Result<ReducedBasis> {
    if states.is_empty() {
        return Err(Error::invalid("time-domain POD of an empty trajectory"));
    }
    let n = states[0].len();
    let s = DMatrix::from_fn(n, states.len(), |i, j| states[j][i]);
    pod(&s, &vec![1.0; states.len()], b, truncation)
}

/// `sum_j w_j || S_j - Phi Phi^T B S_j ||_B^2`
pub fn pod_residual(s: &DMatrix<f64>, weights: &[f64], b: &CsrMatrix, basis: &ReducedBasis) -> Result<f64> {
    check_inputs(s.nrows(), s.ncols(), weights, b)?;
    if basis.phi.nrows() != s.nrows() {
        return Err(Error::mismatch("basis and snapshots live in different spaces"));
    }
    let coeffs = basis.phi.transpose() * b.mul_dense(s);
    let resid = s - &basis.phi * coeffs;
    let bres = b.mul_dense(&resid);
    Ok(resid
        .column_iter()
        .zip(bres.column_iter())
        .zip(weights)
        .map(|((r, br), w)| w * r.dot(&br))
        .sum())
}

/// Principal angles (ascending, radians) between the spans of two
/// `B`-orthonormal bases. Small angles come from sines, large ones from
/// cosines, so both ends are resolved to working precision.
pub fn principal_angles(a: &DMatrix<f64>, b_basis: &DMatrix<f64>, b: &CsrMatrix) -> Result<Vec<f64>> {
    if a.nrows() != b_basis.nrows() || b.nrows() != a.nrows() {
        return Err(Error::invalid(format!(
            "principal angles between {}-row and {}-row bases under a {}x{} inner product",
            a.nrows(),
            b_basis.nrows(),
            b.nrows(),
            b.ncols()
        )));
    }
    let (big, small) = if a.ncols() >= b_basis.ncols() { (a, b_basis) } else { (b_basis, a) };
    let k = small.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let cross = big.transpose() * b.mul_dense(small);
    let mut cosines: Vec<f64> = cross.singular_values().iter().map(|c| c.min(1.0)).collect();
    cosines.sort_by(|x, y| y.total_cmp(x));

    let chol = BandedCholesky::factor(b)?;
    let resid = small - big * &cross;
    let mut r = DMatrix::zeros(resid.nrows(), k);
    for (j, col) in resid.column_iter().enumerate() {
        let v: Vec<f64> = col.iter().copied().collect();
        r.set_column(j, &DVector::from_vec(chol.mul_upper(&v)));
    }
    let mut sines: Vec<f64> = r.singular_values().iter().map(|v| v.min(1.0)).collect();
    sines.sort_by(|x, y| x.total_cmp(y));
    sines.truncate(k);
    while sines.len() < k {
        sines.push(0.0);
    }

    Ok((0..k)
        .map(|i| {
            if sines[i] * sines[i] < 0.5 {
                sines[i].asin()
            } else {
                cosines[i].acos()
            }
        })
        .collect())
}

/// Result of POD on complex snapshots.
#[derive(Debug, Clone)]
pub struct ComplexPod {
    /// Real basis from the realified snapshot set `[Re S, Im S]`.
    pub basis: ReducedBasis,
    /// Complex POD modes (unit `B`-norm), each rotated so that its entry of
    /// largest modulus is real and positive.
    pub complex_phi: DMatrix<Complex64>,
    /// Complex singular values.
    pub complex_sigma: Vec<f64>,
    /// Largest `|Im|` entry of `complex_phi`.
    pub max_imag: f64,
}

/// POD of complex snapshots under the Hermitian `B` inner product.
///
/// The complex modes come from the Hermitian correlation matrix; the
/// returned real basis is the POD of the realified set, which spans the same
/// space whenever the snapshot set is closed under conjugation.
pub fn pod_complex(
    s: &DMatrix<Complex64>,
    weights: &[f64],
    b: &CsrMatrix,
    truncation: Truncation,
) -> Result<ComplexPod> {
    check_inputs(s.nrows(), s.ncols(), weights, b)?;
    let (n, m) = (s.nrows(), s.ncols());

    let mut sw = s.clone();
    for (mut col, w) in sw.column_iter_mut().zip(weights) {
        col *= Complex64::new(w.sqrt(), 0.0);
    }
    let re = sw.map(|z| z.re);
    let im = sw.map(|z| z.im);
    let bre = b.mul_dense(&re);
    let bim = b.mul_dense(&im);
    // S^H B S with S = X + iY: (X^T B X + Y^T B Y) + i (X^T B Y - Y^T B X)
    let real_part = re.transpose() * &bre + im.transpose() * &bim;
    let imag_part = re.transpose() * &bim - im.transpose() * &bre;
    let corr = DMatrix::from_fn(m, m, |i, j| {
        let z = Complex64::new(real_part[(i, j)], imag_part[(i, j)]);
        let zt = Complex64::new(real_part[(j, i)], imag_part[(j, i)]).conj();
        (z + zt) * 0.5
    });
    let eig = corr.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lambda_max = order.first().map(|&i| eig.eigenvalues[i]).unwrap_or(0.0);

    let mut complex_sigma = Vec::new();
    let mut modes = Vec::new();
    if lambda_max > 0.0 {
        let floor = lambda_max * (RANK_TOL * RANK_TOL).max(m as f64 * f64::EPSILON);
        for &i in order.iter().take_while(|&&i| eig.eigenvalues[i] > floor) {
            let sigma = eig.eigenvalues[i].sqrt();
            let mut phi = (&sw * eig.eigenvectors.column(i)) / Complex64::new(sigma, 0.0);
            let k = phi.iter().enumerate().fold(0, |best, (k, z)| {
                if z.norm() > phi[best].norm() {
                    k
                } else {
                    best
                }
            });
            let phase = phi[k].conj() / phi[k].norm();
            phi *= phase;
            complex_sigma.push(sigma);
            modes.push(phi);
        }
    }
    let (r, _) = choose_rank(&complex_sigma, truncation);
    let complex_phi = if r == 0 {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&modes[..r])
    };
    let max_imag = complex_phi.iter().fold(0.0f64, |mx, z| mx.max(z.im.abs()));

    let mut realified = DMatrix::zeros(n, 2 * m);
    realified.columns_mut(0, m).copy_from(&s.map(|z| z.re));
    realified.columns_mut(m, m).copy_from(&s.map(|z| z.im));
    let doubled: Vec<f64> = weights.iter().chain(weights).copied().collect();
    let basis = pod(&realified, &doubled, b, truncation)?;

    Ok(ComplexPod {
        basis,
        complex_phi,
        complex_sigma,
        max_imag,
    })
}
