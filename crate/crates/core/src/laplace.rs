//! Laplace-domain snapshots on the cotangent contour.
//!
//! Nodes `s_i = alpha + i beta cot(theta_i / 2)`, `theta_i = 2 pi i / M`, with
//! weights `pi beta / (M sin^2(theta_i / 2))` for `i = 1..M-1`. Node `M` sits at
//! infinity; its term is replaced by the initial condition with weight
//! `pi / (M beta)`. Nodes `i` and `M - i` are complex conjugates, so only
//! `i = 1..=M/2` require a solve.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{FemOperators, NodalField};
use crate::linalg::BandedLu;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Regular,
    RealAxis,
    InitialCondition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotNode {
    /// 1-based position in the plan.
    pub index: usize,
    pub theta: f64,
    /// `None` for the node at infinity.
    pub s: Option<Complex64>,
    pub weight: f64,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotPlan {
    pub alpha: f64,
    pub beta: f64,
    pub m_total: usize,
    pub nodes: Vec<SnapshotNode>,
}

impl SnapshotPlan {
    pub fn new(alpha: f64, beta: f64, m_total: usize) -> Result<Self> {
        if m_total < 4 || !m_total.is_multiple_of(2) {
            return Err(Error::invalid(format!("node count must be even and >= 4, got {m_total}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("contour scale must be positive, got {beta}")));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid("contour abscissa must be finite"));
        }
        let m = m_total as f64;
        let nodes = (1..=m_total)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / m;
                if i == m_total {
                    return SnapshotNode {
                        index: i,
                        theta,
                        s: None,
                        weight: std::f64::consts::PI / (m * beta),
                        kind: NodeKind::InitialCondition,
                    };
                }
                let half = 0.5 * theta;
                let (s, kind) = if 2 * i == m_total {
                    (Complex64::new(alpha, 0.0), NodeKind::RealAxis)
                } else {
                    (Complex64::new(alpha, beta * half.cos() / half.sin()), NodeKind::Regular)
                };
                SnapshotNode {
                    index: i,
                    theta,
                    s: Some(s),
                    weight: std::f64::consts::PI * beta / (m * half.sin().powi(2)),
                    kind,
                }
            })
            .collect();
        Ok(Self {
            alpha,
            beta,
            m_total,
            nodes,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }

    /// 1-based index of the conjugate partner of node `i` (`i < M`).
    pub fn conjugate_of(&self, i: usize) -> usize {
        self.m_total - i
    }
}

pub fn make_snapshot_plan(alpha: f64, beta: f64, m_total: usize) -> Result<SnapshotPlan> {
    SnapshotPlan::new(alpha, beta, m_total)
}

/// Solves `(s M_h + A_h) u = b_hat g_h + M_h u0_h`.
pub fn solve_shifted(
    fem: &FemOperators,
    g_h: &NodalField,
    u0_h: &NodalField,
    b_hat: Complex64,
    s: Complex64,
) -> Result<Vec<Complex64>> {
    let n = fem.n_free;
    if g_h.len() != n || u0_h.len() != n {
        return Err(Error::mismatch(format!(
            "shifted solve on {n} DOFs with data of length {} / {}",
            g_h.len(),
            u0_h.len()
        )));
    }
    if s.re <= 0.0 {
        return Err(Error::Numerical {
            message: "shift outside the right half plane".into(),
            residual: f64::NAN,
            shift: Some(s),
        });
    }
    let mu0 = fem.mass.mul_vec(u0_h);
    let rhs: Vec<Complex64> = g_h
        .iter()
        .zip(mu0.iter())
        .map(|(g, m)| b_hat * g + m)
        .collect();
    let rhs_norm = max_modulus(&rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let lu = BandedLu::factor_combination(&[(&fem.mass, s), (&fem.stiffness, Complex64::new(1.0, 0.0))])
        .map_err(|e| Error::Numerical {
            message: e.to_string(),
            residual: f64::NAN,
            shift: Some(s),
        })?;
    let mut x = lu.solve(&rhs);
    let op_norm = shifted_norm(fem, s);
    let mut residual = f64::INFINITY;
    // Refinement sweeps only run when the first solve misses the tolerance.
    // The residual is measured as a normwise backward error.
    for _ in 0..3 {
        let r = shifted_residual(fem, s, &x, &rhs);
        residual = max_modulus(&r) / (op_norm * max_modulus(&x) + rhs_norm);
        if residual <= RESIDUAL_TOL {
            return Ok(x);
        }
        let dx = lu.solve(&r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi -= d);
    }
    Err(Error::Numerical {
        message: "shifted solve did not reach the residual tolerance".into(),
        residual,
        shift: Some(s),
    })
}

fn max_modulus(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Infinity norm of `s M + A`.
fn shifted_norm(fem: &FemOperators, s: Complex64) -> f64 {
    let mut row: Vec<(usize, Complex64)> = Vec::new();
    let mut norm = 0.0f64;
    for i in 0..fem.n_free {
        row.clear();
        row.extend(fem.mass.row(i).map(|(j, v)| (j, s * v)));
        row.extend(fem.stiffness.row(i).map(|(j, v)| (j, Complex64::new(v, 0.0))));
        row.sort_by_key(|(j, _)| *j);
        let mut total = 0.0;
        let mut k = 0;
        while k < row.len() {
            let (j, mut acc) = row[k];
            k += 1;
            while k < row.len() && row[k].0 == j {
                acc += row[k].1;
                k += 1;
            }
            total += acc.norm();
        }
        norm = norm.max(total);
    }
    norm
}

fn shifted_residual(fem: &FemOperators, s: Complex64, x: &[Complex64], rhs: &[Complex64]) -> Vec<Complex64> {
    let mx = fem.mass.mul_complex(x);
    let ax = fem.stiffness.mul_complex(x);
    mx.iter()
        .zip(ax)
        .zip(rhs)
        .map(|((m, a), b)| s * m + a - b)
        .collect()
}

/// Real snapshot matrix with the complex solutions it was built from.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub plan: SnapshotPlan,
    /// `N_free x M`; column `i - 1` holds `Re u(s_i)`, the last column `u0_h`.
    pub columns: DMatrix<f64>,
    /// Complex solutions for nodes `1..=M/2` in plan order.
    pub complex_cache: Vec<(usize, Vec<Complex64>)>,
    pub initial_condition: DVector<f64>,
    /// Number of shifted linear systems actually solved.
    pub solves: usize,
}

impl SnapshotSet {
    pub fn n_dofs(&self) -> usize {
        self.columns.nrows()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.plan.weights()
    }

    /// Complex solution at node `i` (1-based, `i < M`).
    pub fn complex_solution(&self, i: usize) -> Vec<Complex64> {
        let m = self.plan.m_total;
        assert!((1..m).contains(&i));
        let find = |k: usize| &self.complex_cache.iter().find(|(j, _)| *j == k).expect("cached node").1;
        if 2 * i <= m {
            find(i).clone()
        } else {
            find(m - i).iter().map(|z| z.conj()).collect()
        }
    }

    /// Complex snapshot matrix: `u(s_i)` for `i < M`, then `u0_h`.
    pub fn complex_columns(&self) -> DMatrix<Complex64> {
        let (n, m) = (self.n_dofs(), self.plan.m_total);
        let mut out = DMatrix::zeros(n, m);
        for i in 1..m {
            out.set_column(i - 1, &DVector::from_vec(self.complex_solution(i)));
        }
        out.set_column(m - 1, &self.initial_condition.map(|v| Complex64::new(v, 0.0)));
        out
    }
}

/// Snapshot matrix using conjugate halving: only nodes `1..=M/2` are solved.
pub fn compute_snapshots(
    plan: &SnapshotPlan,
    fem: &FemOperators,
    g_h: &NodalField,
    u0_h: &NodalField,
    b_hat: &(dyn Fn(Complex64) -> Result<Complex64> + Sync),
) -> Result<SnapshotSet> {
    let half: Vec<usize> = (1..=plan.m_total / 2).collect();
    build_set(plan, fem, g_h, u0_h, b_hat, &half)
}

/// Snapshot matrix with every node `1..M-1` solved independently; reference
/// for the halving check.
pub fn compute_snapshots_unhalved(
    plan: &SnapshotPlan,
    fem: &FemOperators,
    g_h: &NodalField,
    u0_h: &NodalField,
    b_hat: &(dyn Fn(Complex64) -> Result<Complex64> + Sync),
) -> Result<SnapshotSet> {
    let all: Vec<usize> = (1..plan.m_total).collect();
    build_set(plan, fem, g_h, u0_h, b_hat, &all)
}

fn build_set(
    plan: &SnapshotPlan,
    fem: &FemOperators,
    g_h: &NodalField,
    u0_h: &NodalField,
    b_hat: &(dyn Fn(Complex64) -> Result<Complex64> + Sync),
    solve_nodes: &[usize],
) -> Result<SnapshotSet> {
    let n = fem.n_free;
    let m = plan.m_total;
    if u0_h.len() != n {
        return Err(Error::mismatch("initial condition length differs from the DOF count"));
    }
    let solved: Vec<(usize, Vec<Complex64>)> = solve_nodes
        .par_iter()
        .map(|&i| {
            let s = plan.nodes[i - 1].s.expect("finite node");
            let bh = b_hat(s)?;
            solve_shifted(fem, g_h, u0_h, bh, s).map(|u| (i, u))
        })
        .collect::<Result<_>>()?;

    let mut columns = DMatrix::zeros(n, m);
    for (i, u) in &solved {
        columns.set_column(i - 1, &DVector::from_iterator(n, u.iter().map(|z| z.re)));
    }
    let solved_set: Vec<usize> = solved.iter().map(|(i, _)| *i).collect();
    for i in 1..m {
        if !solved_set.contains(&i) {
            let partner = m - i;
            let src = columns.column(partner - 1).into_owned();
            columns.set_column(i - 1, &src);
        }
    }
    columns.set_column(m - 1, &u0_h.0);
    let solves = solved.len();
    let complex_cache = solved.into_iter().filter(|(i, _)| 2 * i <= m).collect();
    Ok(SnapshotSet {
        plan: plan.clone(),
        columns,
        complex_cache,
        initial_condition: u0_h.0.clone(),
        solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_operators;
    use crate::linalg::dense_generalized_eigen;
    use crate::mesh::StructuredMesh;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn plan_with_four_nodes() {
        let p = make_snapshot_plan(1.0, 2.0, 4).unwrap();
        let thetas: Vec<f64> = p.nodes.iter().map(|n| n.theta).collect();
        for (t, e) in thetas.iter().zip([PI / 2.0, PI, 1.5 * PI, 2.0 * PI]) {
            assert!((t - e).abs() < 1e-15);
        }
        let s0 = p.nodes[0].s.unwrap();
        assert!((s0 - c(1.0, 2.0)).norm() < 1e-15);
        assert_eq!(p.nodes[1].s.unwrap(), c(1.0, 0.0));
        assert!((p.nodes[2].s.unwrap() - c(1.0, -2.0)).norm() < 1e-15);
        assert!(p.nodes[3].s.is_none());
        for (w, e) in p.weights().iter().zip([PI, PI / 2.0, PI, PI / 8.0]) {
            assert!((w - e).abs() < 1e-14, "{w} vs {e}");
        }
        assert_eq!(p.nodes[1].kind, NodeKind::RealAxis);
        assert_eq!(p.nodes[3].kind, NodeKind::InitialCondition);
    }

    #[test]
    fn plan_with_eight_nodes_pairs_conjugates() {
        let p = make_snapshot_plan(1.0, 2.0, 8).unwrap();
        let s2 = p.nodes[1].s.unwrap();
        assert!((s2 - c(1.0, 2.0)).norm() < 1e-14);
        let s6 = p.nodes[5].s.unwrap();
        assert!((s6 - s2.conj()).norm() < 1e-14);
        for i in 1..8 {
            let a = p.nodes[i - 1].s.unwrap();
            let b = p.nodes[p.conjugate_of(i) - 1].s.unwrap();
            assert!((a - b.conj()).norm() <= 1e-12 * a.norm());
            assert!((p.nodes[i - 1].weight - p.nodes[p.conjugate_of(i) - 1].weight).abs() < 1e-12);
        }
        assert!(p.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn real_axis_node_is_exact() {
        for m in [4, 6, 50, 150] {
            let p = make_snapshot_plan(0.7, 3.0, m).unwrap();
            assert_eq!(p.nodes[m / 2 - 1].s.unwrap(), c(0.7, 0.0));
        }
    }

    #[test]
    fn plan_rejects_bad_counts() {
        assert!(make_snapshot_plan(1.0, 2.0, 5).is_err());
        assert!(make_snapshot_plan(1.0, 2.0, 2).is_err());
        assert!(make_snapshot_plan(1.0, 0.0, 8).is_err());
    }

    #[test]
    fn scalar_shifted_solve() {
        let mesh = StructuredMesh::interval(2).unwrap();
        let fem = assemble_operators(&mesh, 1.0).unwrap();
        let g = NodalField(DVector::from_vec(vec![1.0]));
        let u0 = NodalField::zeros(1);
        let u = solve_shifted(&fem, &g, &u0, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!((u[0] - c(3.0 / 13.0, 0.0)).norm() < 1e-15);
        let zero = solve_shifted(&fem, &NodalField::zeros(1), &u0, c(1.0, 0.0), c(2.0, 5.0)).unwrap();
        assert_eq!(zero[0], c(0.0, 0.0));
        assert!(solve_shifted(&fem, &g, &u0, c(1.0, 0.0), c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn eigenvector_data_gives_scalar_resolvent() {
        let mesh = StructuredMesh::interval(12).unwrap();
        let fem = assemble_operators(&mesh, 1.0).unwrap();
        let (vals, vecs) = dense_generalized_eigen(&fem.stiffness.to_dense(), &fem.mass.to_dense()).unwrap();
        let zeta = vecs.column(2).into_owned();
        let u0 = NodalField(zeta.clone());
        let s = c(1.0, 4.0);
        let u = solve_shifted(&fem, &NodalField::zeros(fem.n_free), &u0, c(0.0, 0.0), s).unwrap();
        let factor = 1.0 / (s + vals[2]);
        for (ui, zi) in u.iter().zip(zeta.iter()) {
            assert!((ui - factor * zi).norm() < 1e-12);
        }
    }

    #[test]
    fn halving_solves_half_the_nodes() {
        let mesh = StructuredMesh::interval(8).unwrap();
        let fem = assemble_operators(&mesh, 1.0).unwrap();
        let plan = make_snapshot_plan(1.0, 2.0, 4).unwrap();
        let g = NodalField(DVector::from_element(fem.n_free, 1.0));
        let u0 = NodalField(DVector::from_fn(fem.n_free, |i, _| (i as f64).sin()));
        let b = |s: Complex64| Ok(1.0 / (s + 1.0));
        let set = compute_snapshots(&plan, &fem, &g, &u0, &b).unwrap();
        // Two shifted solves (one complex, one on the real axis) plus the copied IC column.
        assert_eq!(set.solves, 2);
        assert_eq!(set.solves + 1, plan.m_total / 2 + 1);
        assert_eq!(set.columns.column(0), set.columns.column(2));
        assert_eq!(set.columns.column(3), u0.0.column(0));

        let full = compute_snapshots_unhalved(&plan, &fem, &g, &u0, &b).unwrap();
        assert_eq!(full.solves, 3);
        assert!((&full.columns - &set.columns).amax() < 1e-13);
    }

    #[test]
    fn zero_data_gives_zero_snapshots() {
        let mesh = StructuredMesh::interval(8).unwrap();
        let fem = assemble_operators(&mesh, 1.0).unwrap();
        let plan = make_snapshot_plan(1.0, 2.0, 8).unwrap();
        let zero = NodalField::zeros(fem.n_free);
        let set = compute_snapshots(&plan, &fem, &zero, &zero, &|_| Ok(c(0.0, 0.0))).unwrap();
        assert_eq!(set.columns.amax(), 0.0);
    }
}
