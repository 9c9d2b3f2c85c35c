//! Error measures and norm checks.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplace::{SnapshotPlan, SnapshotSet};
use crate::linalg::CsrMatrix;
use crate::pod::{pod_residual, ReducedBasis};
use crate::rom::Trajectory;

/// `(sum_j ||u_j - v_j||_X^2)^{1/2} / (sum_j ||u_j||_X^2)^{1/2}` over all steps.
pub fn relative_error(reference: &[DVector<f64>], approx: &[DVector<f64>], norm: &CsrMatrix) -> Result<f64> {
    if reference.len() != approx.len() {
        return Err(Error::mismatch(format!(
            "trajectories have {} and {} states",
            reference.len(),
            approx.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, v) in reference.iter().zip(approx) {
        let d = u - v;
        num += norm.quad_form(&d);
        den += norm.quad_form(u);
    }
    if den == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok((num / den).sqrt())
}

/// Streaming form of [`relative_error`], fed one step at a time.
#[derive(Debug, Default, Clone)]
pub struct RelativeErrorAccumulator {
    num: f64,
    den: f64,
}

impl RelativeErrorAccumulator {
    pub fn push(&mut self, reference: &DVector<f64>, approx: &DVector<f64>, norm: &CsrMatrix) {
        self.num += norm.quad_form(&(reference - approx));
        self.den += norm.quad_form(reference);
    }

    pub fn value(&self) -> Result<f64> {
        if self.den == 0.0 {
            return Err(Error::UndefinedRatio);
        }
        Ok((self.num / self.den).sqrt())
    }
}

/// Quadrature of `int ||Re u(alpha + i tau) - P Re u||_{H^1_0}^2 dtau` over the
/// snapshot plan, with `P = Phi Phi^T B`.
pub fn hardy_quadrature_error(set: &SnapshotSet, basis: &ReducedBasis, energy: &CsrMatrix) -> Result<f64> {
    pod_residual(&set.columns, &set.weights(), energy, basis)
}

/// Trapezoidal `int_0^T e^{-2 alpha t} ||u(t)||_M^2 dt` on the trajectory grid.
pub fn weighted_time_norm(traj: &Trajectory, mass: &CsrMatrix, alpha: f64) -> Result<f64> {
    if alpha < 0.0 {
        return Err(Error::invalid(format!("weight exponent must be non-negative, got {alpha}")));
    }
    let values: Vec<f64> = traj
        .t_grid
        .iter()
        .zip(&traj.states)
        .map(|(t, u)| (-2.0 * alpha * t).exp() * mass.quad_form(u))
        .collect();
    Ok(traj
        .t_grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IsometryCheck {
    pub time_side: f64,
    pub laplace_side: f64,
}

/// Compares `||u||^2_{L^2_alpha}` of `u(t) = u0 e^{-lambda t}` with
/// `(1/2pi) int |u0 / (alpha + lambda + i tau)|^2 dtau` on a trapezoidal grid.
pub fn paley_wiener_check(lambda: f64, u0: f64, alpha: f64, tau_grid: &[f64]) -> IsometryCheck {
    let time_side = u0 * u0 / (2.0 * (alpha + lambda));
    let integrand = |tau: f64| {
        let re = alpha + lambda;
        u0 * u0 / (re * re + tau * tau)
    };
    let laplace_side = tau_grid
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (integrand(w[0]) + integrand(w[1])))
        .sum::<f64>()
        / (2.0 * std::f64::consts::PI);
    IsometryCheck { time_side, laplace_side }
}

/// Laplace side over the whole line `Re s = alpha`, using the snapshot-plan
/// quadrature (trapezoid in the Mobius angle, including the node at infinity
/// where `tau^2 |u_hat|^2 -> u0^2`).
pub fn paley_wiener_contour(lambda: f64, u0: f64, alpha: f64, beta: f64, m_total: usize) -> Result<IsometryCheck> {
    let plan = SnapshotPlan::new(alpha, beta, m_total)?;
    let sum: f64 = plan
        .nodes
        .iter()
        .map(|node| match node.s {
            Some(s) => node.weight * u0 * u0 / (s + lambda).norm_sqr(),
            None => node.weight * u0 * u0,
        })
        .sum();
    Ok(IsometryCheck {
        time_side: u0 * u0 / (2.0 * (alpha + lambda)),
        laplace_side: sum / (2.0 * std::f64::consts::PI),
    })
}

/// Uniform grid of `points` values on `[-limit, limit]`.
pub fn uniform_tau_grid(limit: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| -limit + 2.0 * limit * k as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub m: usize,
    pub r: usize,
    pub err_l2: f64,
    pub err_h1: f64,
}

/// Per-`R` errors for one snapshot count, plus run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub singular_values: Vec<(usize, Vec<f64>)>,
    /// `(M, smallest L2 error over R)`
    pub plateau: Vec<(usize, f64)>,
    /// `(M, R_max requested, numerical rank)` whenever the sweep was cut short.
    pub truncated: Vec<(usize, usize, usize)>,
    pub alpha: f64,
    pub beta: f64,
    pub mesh_n: usize,
    pub n_steps: usize,
    pub horizon: f64,
}

impl ErrorReport {
    pub fn plateau_for(&self, m: usize) -> Option<f64> {
        self.plateau.iter().find(|(k, _)| *k == m).map(|(_, p)| *p)
    }

    pub fn error_at(&self, m: usize, r: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|row| row.m == m && row.r == r)
    }
}
