//! Structured simplicial meshes of `(-1/2, 1/2)^d` for `d = 1, 2`.

use crate::error::{Error, Result};

/// Uniform mesh of the unit interval or unit square centred at the origin.
///
/// Nodes are numbered lexicographically (x fastest). Free (interior) nodes
/// get consecutive indices in the same order, which keeps every assembled
/// operator banded with half-bandwidth `n` in 2D and `1` in 1D.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    dim: usize,
    cells_per_side: usize,
    nodes: Vec<[f64; 2]>,
    elements: Vec<Vec<usize>>,
    is_boundary: Vec<bool>,
    free_index: Vec<Option<usize>>,
    n_free: usize,
}

fn coordinate(j: usize, n: usize) -> f64 {
    -0.5 + j as f64 / n as f64
}

impl StructuredMesh {
    /// `n` cells on `[-1/2, 1/2]`.
    pub fn interval(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("interval mesh needs at least one cell"));
        }
        let nodes: Vec<[f64; 2]> = (0..=n).map(|j| [coordinate(j, n), 0.0]).collect();
        let elements = (0..n).map(|j| vec![j, j + 1]).collect();
        let is_boundary = (0..=n).map(|j| j == 0 || j == n).collect();
        Ok(Self::finish(1, n, nodes, elements, is_boundary))
    }

    /// `n x n` grid cells, each split into two counter-clockwise triangles
    /// along the lower-left to upper-right diagonal.
    pub fn square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("square mesh needs at least one cell per side"));
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        let mut is_boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([coordinate(i, n), coordinate(j, n)]);
                is_boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (ll, lr, ul, ur) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                elements.push(vec![ll, lr, ur]);
                elements.push(vec![ll, ur, ul]);
            }
        }
        Ok(Self::finish(2, n, nodes, elements, is_boundary))
    }

    fn finish(
        dim: usize,
        cells_per_side: usize,
        nodes: Vec<[f64; 2]>,
        elements: Vec<Vec<usize>>,
        is_boundary: Vec<bool>,
    ) -> Self {
        let mut n_free = 0;
        let free_index = is_boundary
            .iter()
            .map(|&b| {
                (!b).then(|| {
                    n_free += 1;
                    n_free - 1
                })
            })
            .collect();
        Self {
            dim,
            cells_per_side,
            nodes,
            elements,
            is_boundary,
            free_index,
            n_free,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Node coordinates; in 1D only the first component is meaningful.
    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k][..self.dim]
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.is_boundary[k]
    }

    pub fn free_index(&self) -> &[Option<usize>] {
        &self.free_index
    }

    /// Node index of each free DOF, in DOF order.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| !self.is_boundary[k]).collect()
    }

    /// Length (1D) or area (2D) of element `e`; positive for the CCW triangles.
    pub fn element_measure(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        match self.dim {
            1 => self.nodes[el[1]][0] - self.nodes[el[0]][0],
            _ => {
                let [a, b, c] = [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]];
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }
}
