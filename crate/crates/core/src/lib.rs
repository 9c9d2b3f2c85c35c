//! Laplace-domain snapshot model order reduction for linear parabolic problems
//! on structured P1 finite element meshes.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod fem;
pub mod forcing;
pub mod laplace;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod pod;
pub mod rom;
pub mod spectral;

pub use error::{Error, Result};
pub use fem::{assemble_load, assemble_operators, interpolate, project_h1, FemOperators, NodalField};
pub use forcing::{ForcingSpec, InitialConditionKind, InitialConditionSpec};
pub use laplace::{compute_snapshots, make_snapshot_plan, solve_shifted, SnapshotPlan, SnapshotSet};
pub use linalg::CsrMatrix;
pub use mesh::StructuredMesh;
pub use pod::{pod, PodMethod, ReducedBasis, Truncation};
pub use rom::{backward_euler, lift, project_model, ReducedModel, Trajectory};
