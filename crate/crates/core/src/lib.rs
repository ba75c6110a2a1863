//! Triangular mesh generation for polygonal domains.
//!
//! The generator runs an adaptive finite element loop on a constrained
//! Delaunay triangulation of the input polygon: solve a Poisson problem,
//! estimate the error per triangle, refine the worst triangles with
//! red-green-blue closure and smooth the result, until the average triangle
//! quality reaches a target.

pub mod cdt;
pub mod domain;
pub mod driver;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod refine;
pub mod smooth;

pub use cdt::{
    constrain_edges, delaunay, delaunay_seeded, initial_triangulation, initial_triangulation_seeded, remove_exterior,
};
pub use driver::{adaptmesh, adaptmesh_observed, GenConfig, GenReport, IterationReport, MeshSummary, Stage};
pub use domain::{validate_polygon, Defect, PolygonDomain, ValidDomain};
pub use error::{CdtError, FemError, GenError, GeometryError, MeshError};
pub use fem::{assemble, estimate, mark, solve, ErrorField, EstimatorVariant, FemSolution, SparseSystem};
pub use geometry::{in_circumcircle, orient2d, polygon_area, segments_intersect, tri_metrics, Point2, Sign, TriMetrics};
pub use mesh::{ConformityReport, QualityStats, TriMesh, Violation};
pub use refine::{rgb_refine, uniform_refine};
pub use smooth::{cpt_step, flip_edges, smooth, SmoothConfig, SmoothOrder};
