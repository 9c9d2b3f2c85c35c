//! P1 finite-element operators with homogeneous Dirichlet conditions.

use std::ops::Deref;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, CsrMatrix};
use crate::mesh::StructuredMesh;

/// Mass, stiffness and H¹₀ Gram matrices restricted to the free DOFs.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// `(grad phi_i, grad phi_j)`; equals `stiffness` when the diffusion is 1.
    pub energy: CsrMatrix,
    pub diffusion: f64,
    pub n_free: usize,
}

/// Coefficients of a P1 function over the free DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField(pub DVector<f64>);

impl NodalField {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for NodalField {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl From<DVector<f64>> for NodalField {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

/// Quadrature rule on the reference simplex: barycentric points and weights
/// summing to one.
struct Rule {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// 3-point Gauss-Legendre on a segment (degree 5).
fn segment_rule() -> Rule {
    let d = 0.5 * (3.0f64 / 5.0).sqrt();
    let pts = [0.5 - d, 0.5, 0.5 + d];
    Rule {
        points: pts.iter().map(|&x| vec![1.0 - x, x]).collect(),
        weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
    }
}

/// 7-point rule on a triangle (degree 5), so `g * phi` is integrated exactly
/// for quadratic `g`.
fn triangle_rule() -> Rule {
    let s15 = 15.0f64.sqrt();
    let (a1, a2) = ((6.0 - s15) / 21.0, (6.0 + s15) / 21.0);
    let (w1, w2) = ((155.0 - s15) / 1200.0, (155.0 + s15) / 1200.0);
    let mut points = vec![vec![1.0 / 3.0; 3]];
    let mut weights = vec![9.0 / 40.0];
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        points.extend([vec![b, a, a], vec![a, b, a], vec![a, a, b]]);
        weights.extend([w; 3]);
    }
    Rule { points, weights }
}

/// Measure and constant hat-function gradients of one element.
fn element_geometry(mesh: &StructuredMesh, e: usize) -> (f64, Vec<[f64; 2]>) {
    let el = &mesh.elements()[e];
    let measure = mesh.element_measure(e);
    let grads = match mesh.dim() {
        1 => vec![[-1.0 / measure, 0.0], [1.0 / measure, 0.0]],
        _ => (0..3)
            .map(|i| {
                let pj = mesh.node(el[(i + 1) % 3]);
                let pk = mesh.node(el[(i + 2) % 3]);
                [(pj[1] - pk[1]) / (2.0 * measure), (pk[0] - pj[0]) / (2.0 * measure)]
            })
            .collect(),
    };
    (measure, grads)
}

fn rule_for(mesh: &StructuredMesh) -> Rule {
    match mesh.dim() {
        1 => segment_rule(),
        _ => triangle_rule(),
    }
}

/// Physical point of a barycentric quadrature node.
fn map_point(mesh: &StructuredMesh, el: &[usize], bary: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; mesh.dim()];
    for (&k, &l) in el.iter().zip(bary) {
        for (xc, nc) in x.iter_mut().zip(mesh.node(k)) {
            *xc += l * nc;
        }
    }
    x
}

fn element_mass(dim: usize, measure: f64) -> Vec<Vec<f64>> {
    let (diag, off) = match dim {
        1 => (measure / 3.0, measure / 6.0),
        _ => (measure / 6.0, measure / 12.0),
    };
    let k = dim + 1;
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { diag } else { off }).collect())
        .collect()
}

fn full_matrices(mesh: &StructuredMesh) -> (CsrMatrix, CsrMatrix) {
    let mut mass = Vec::new();
    let mut energy = Vec::new();
    for (e, el) in mesh.elements().iter().enumerate() {
        let (measure, grads) = element_geometry(mesh, e);
        let me = element_mass(mesh.dim(), measure);
        for (a, &i) in el.iter().enumerate() {
            for (b, &j) in el.iter().enumerate() {
                mass.push((i, j, me[a][b]));
                let dot = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                energy.push((i, j, measure * dot));
            }
        }
    }
    let n = mesh.n_nodes();
    (
        CsrMatrix::from_triplets(n, n, &mass),
        CsrMatrix::from_triplets(n, n, &energy),
    )
}

/// Mass matrix over all nodes, boundary included.
pub fn full_mass(mesh: &StructuredMesh) -> CsrMatrix {
    full_matrices(mesh).0
}

/// Stiffness (unit diffusion) matrix over all nodes, boundary included.
pub fn full_energy(mesh: &StructuredMesh) -> CsrMatrix {
    full_matrices(mesh).1
}

/// Assembles `M_h`, `A_h = diffusion * B_h` and `B_h` on the free DOFs.
pub fn assemble_operators(mesh: &StructuredMesh, diffusion: f64) -> Result<FemOperators> {
    if !(diffusion > 0.0 && diffusion.is_finite()) {
        return Err(Error::invalid(format!("diffusion must be positive, got {diffusion}")));
    }
    if mesh.n_free() == 0 {
        return Err(Error::EmptySystem);
    }
    let (mass, energy) = full_matrices(mesh);
    let n_free = mesh.n_free();
    let mass = mass.restrict(mesh.free_index(), n_free);
    let energy = energy.restrict(mesh.free_index(), n_free);
    let stiffness = energy.scaled(diffusion);
    Ok(FemOperators {
        mass,
        stiffness,
        energy,
        diffusion,
        n_free,
    })
}

/// Load vector `(g, phi_i)` over the free DOFs.
pub fn assemble_load(mesh: &StructuredMesh, g: &dyn Fn(&[f64]) -> f64) -> NodalField {
    let rule = rule_for(mesh);
    let mut load = DVector::zeros(mesh.n_free());
    for (e, el) in mesh.elements().iter().enumerate() {
        let measure = mesh.element_measure(e);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let gx = g(&map_point(mesh, el, bary)) * w * measure;
            for (a, &k) in el.iter().enumerate() {
                if let Some(i) = mesh.free_index()[k] {
                    load[i] += gx * bary[a];
                }
            }
        }
    }
    NodalField(load)
}

/// Nodal interpolant of `u0`, which must vanish on the boundary.
pub fn interpolate(mesh: &StructuredMesh, u0: &dyn Fn(&[f64]) -> f64) -> Result<NodalField> {
    for k in (0..mesh.n_nodes()).filter(|&k| mesh.is_boundary(k)) {
        let v = u0(mesh.node(k));
        if v.abs() > 1e-12 {
            return Err(Error::InvalidData(format!(
                "initial condition is {v:.3e} at boundary node {:?}",
                mesh.node(k)
            )));
        }
    }
    let values = mesh.free_nodes().iter().map(|&k| u0(mesh.node(k))).collect::<Vec<_>>();
    Ok(NodalField(DVector::from_vec(values)))
}

/// H¹₀-orthogonal projection onto the P1 space: solves `B_h p = (grad u0, grad phi_i)`.
pub fn project_h1(
    mesh: &StructuredMesh,
    fem: &FemOperators,
    grad_u0: &dyn Fn(&[f64]) -> [f64; 2],
) -> Result<NodalField> {
    let rule = rule_for(mesh);
    let mut rhs = vec![0.0; mesh.n_free()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let (measure, grads) = element_geometry(mesh, e);
        let mut avg = [0.0, 0.0];
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let gu = grad_u0(&map_point(mesh, el, bary));
            avg[0] += w * gu[0];
            avg[1] += w * gu[1];
        }
        for (a, &k) in el.iter().enumerate() {
            if let Some(i) = mesh.free_index()[k] {
                rhs[i] += measure * (avg[0] * grads[a][0] + avg[1] * grads[a][1]);
            }
        }
    }
    let chol = BandedCholesky::factor(&fem.energy)
        .map_err(|e| Error::numerical(format!("H1 projection: {e}"), f64::NAN))?;
    let p = DVector::from_vec(chol.solve(&rhs));
    let r = fem.energy.mul_vec(&p) - DVector::from_vec(rhs);
    let scale = p.norm().max(f64::MIN_POSITIVE);
    if !(r.norm() / scale).is_finite() {
        return Err(Error::numerical("H1 projection produced a non-finite solution", r.norm()));
    }
    Ok(NodalField(p))
}
