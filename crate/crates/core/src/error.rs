use thiserror::Error;

use crate::domain::Defect;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("degenerate triangle (zero area)")]
    Degenerate,
    #[error("polygon needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("zero-length segment")]
    ZeroLengthSegment,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeshError {
    #[error("edge ({0}, {1}) is shared by three or more triangles")]
    NonManifoldEdge(usize, usize),
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {count} vertices")]
    InvalidVertexIndex {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("mesh has no triangles")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CdtError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all input points are collinear")]
    Collinear,
    #[error("duplicate input point at index {0}")]
    DuplicatePoint(usize),
    #[error("constraint ({0}, {1}) references a missing vertex")]
    MissingVertex(usize, usize),
    #[error("constraint ({0}, {1}) crosses an existing constrained edge")]
    ConstraintCrossing(usize, usize),
    #[error("constraint loops do not enclose a consistent region")]
    InvalidConstraintLoop,
    #[error("domain is invalid: {}", format_defects(.0))]
    InvalidDomain(Vec<Defect>),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("mesh has no interior vertices")]
    EmptySystem,
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("marking threshold {0} is outside (0, 1)")]
    InvalidTheta(f64),
    #[error("solution has {got} nodal values, mesh has {expected} vertices")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cdt(#[from] CdtError),
    #[error("solver failed in refinement {iteration}: {source}")]
    Solver { iteration: usize, source: FemError },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub(crate) fn format_defects(defects: &[Defect]) -> String {
    defects
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
