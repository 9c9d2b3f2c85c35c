//! Backward-Euler time stepping for the full-order and reduced models.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{FemOperators, NodalField};
use crate::linalg::{BandedLu, CsrMatrix};
use crate::pod::ReducedBasis;

/// Matrix type the stepper can factor and apply.
pub trait StepOperator {
    type Factor;

    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
    /// Factors `mass + dt * stiff`.
    fn factor_step(mass: &Self, stiff: &Self, dt: f64) -> Result<Self::Factor>;
    fn solve_in_place(factor: &Self::Factor, rhs: &mut [f64]);
}

impl StepOperator for CsrMatrix {
    type Factor = BandedLu<f64>;

    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.mul_slice(x, y);
    }

    fn factor_step(mass: &Self, stiff: &Self, dt: f64) -> Result<Self::Factor> {
        BandedLu::factor_combination(&[(mass, 1.0), (stiff, dt)])
    }

    fn solve_in_place(factor: &Self::Factor, rhs: &mut [f64]) {
        factor.solve_in_place(rhs);
    }
}

impl StepOperator for DMatrix<f64> {
    type Factor = Cholesky<f64, Dyn>;

    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let col = self.column(j);
                for i in 0..n {
                    y[i] += col[i] * xj;
                }
            }
        }
    }

    fn factor_step(mass: &Self, stiff: &Self, dt: f64) -> Result<Self::Factor> {
        (mass + stiff * dt)
            .cholesky()
            .ok_or_else(|| Error::numerical("step matrix is not positive definite", f64::NAN))
    }

    fn solve_in_place(factor: &Self::Factor, rhs: &mut [f64]) {
        let mut v = DVector::from_column_slice(rhs);
        factor.solve_mut(&mut v);
        rhs.copy_from_slice(v.as_slice());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceTag {
    Full,
    Reduced,
}

/// States on the uniform grid `t_j = j T / N_t`, `j = 0..=N_t`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t_grid: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub space: SpaceTag,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.t_grid.len().saturating_sub(1)
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map(|s| s.len()).unwrap_or(0)
    }
}

/// Time-stepping problem `mass u' + stiff u = b(t) load`.
pub struct SteppingProblem<'a, O: StepOperator> {
    pub mass: &'a O,
    pub stiff: &'a O,
    pub load: &'a DVector<f64>,
    pub b_of_t: &'a dyn Fn(f64) -> f64,
}

/// Runs backward Euler, handing each state (including `u0`) to `observe`.
///
/// `(mass + dt stiff)` is factored once; the load is only rescaled by
/// `b(t_{n+1})` each step.
pub fn backward_euler_observe<O: StepOperator>(
    problem: &SteppingProblem<'_, O>,
    u0: &DVector<f64>,
    horizon: f64,
    n_steps: usize,
    observe: &mut dyn FnMut(usize, f64, &[f64]),
) -> Result<()> {
    let n = problem.mass.dim();
    if problem.stiff.dim() != n || problem.load.len() != n || u0.len() != n {
        return Err(Error::mismatch(format!(
            "stepper sizes: mass {n}, stiffness {}, load {}, u0 {}",
            problem.stiff.dim(),
            problem.load.len(),
            u0.len()
        )));
    }
    if !(horizon > 0.0) || n_steps == 0 {
        return Err(Error::invalid(format!(
            "time grid needs T > 0 and Nt >= 1 (got T = {horizon}, Nt = {n_steps})"
        )));
    }
    let dt = horizon / n_steps as f64;
    let factor = O::factor_step(problem.mass, problem.stiff, dt)
        .map_err(|e| Error::numerical(format!("backward Euler: {e}"), f64::NAN))?;
    let load = problem.load.as_slice();
    let has_load = load.iter().any(|&v| v != 0.0);

    let mut u = u0.as_slice().to_vec();
    let mut rhs = vec![0.0; n];
    observe(0, 0.0, &u);
    for step in 1..=n_steps {
        let t = step as f64 * horizon / n_steps as f64;
        problem.mass.apply_into(&u, &mut rhs);
        if has_load {
            let scale = dt * (problem.b_of_t)(t);
            for (r, l) in rhs.iter_mut().zip(load) {
                *r += scale * l;
            }
        }
        O::solve_in_place(&factor, &mut rhs);
        std::mem::swap(&mut u, &mut rhs);
        observe(step, t, &u);
    }
    Ok(())
}

/// Backward Euler returning every state.
pub fn backward_euler<O: StepOperator>(
    problem: &SteppingProblem<'_, O>,
    u0: &DVector<f64>,
    horizon: f64,
    n_steps: usize,
    space: SpaceTag,
) -> Result<Trajectory> {
    let mut t_grid = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    backward_euler_observe(problem, u0, horizon, n_steps, &mut |_, t, u| {
        t_grid.push(t);
        states.push(DVector::from_column_slice(u));
    })?;
    Ok(Trajectory { t_grid, states, space })
}

/// Galerkin projection of the semi-discrete problem onto a basis.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub mass_r: DMatrix<f64>,
    pub stiff_r: DMatrix<f64>,
    pub load_r: DVector<f64>,
    pub c0: DVector<f64>,
}

/// `Phi^T M Phi`, `Phi^T A Phi`, `Phi^T g` and `c0 = Phi^T B u0`.
pub fn project_model(
    fem: &FemOperators,
    basis: &ReducedBasis,
    g_h: &NodalField,
    u0_h: &NodalField,
) -> Result<ReducedModel> {
    let phi = &basis.phi;
    if phi.nrows() != fem.n_free || g_h.len() != fem.n_free || u0_h.len() != fem.n_free {
        return Err(Error::mismatch(format!(
            "projection of {}-DOF data onto a {}-row basis",
            fem.n_free,
            phi.nrows()
        )));
    }
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let mass_r = sym(phi.transpose() * fem.mass.mul_dense(phi));
    let stiff_r = sym(phi.transpose() * fem.stiffness.mul_dense(phi));
    let load_r = phi.transpose() * &g_h.0;
    let c0 = phi.transpose() * fem.energy.mul_vec(u0_h);
    Ok(ReducedModel {
        mass_r,
        stiff_r,
        load_r,
        c0,
    })
}

impl ReducedModel {
    pub fn dim(&self) -> usize {
        self.c0.len()
    }

    pub fn solve(&self, b_of_t: &dyn Fn(f64) -> f64, horizon: f64, n_steps: usize) -> Result<Trajectory> {
        let problem = SteppingProblem {
            mass: &self.mass_r,
            stiff: &self.stiff_r,
            load: &self.load_r,
            b_of_t,
        };
        backward_euler(&problem, &self.c0, horizon, n_steps, SpaceTag::Reduced)
    }
}

/// Maps reduced coefficients back to nodal values, `u(t_j) = Phi c(t_j)`.
pub fn lift(basis: &ReducedBasis, reduced: &Trajectory) -> Result<Trajectory> {
    if reduced.state_dim() != basis.dim() && !reduced.states.is_empty() {
        return Err(Error::mismatch(format!(
            "{}-dimensional coefficients for a {}-vector basis",
            reduced.state_dim(),
            basis.dim()
        )));
    }
    Ok(Trajectory {
        t_grid: reduced.t_grid.clone(),
        states: reduced.states.iter().map(|c| &basis.phi * c).collect(),
        space: SpaceTag::Full,
    })
}
