//! The adaptive generation loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cdt::{initial_triangulation_seeded, INSERTION_SEED};
use crate::domain::PolygonDomain;
use crate::error::{FemError, GenError};
use crate::fem::{assemble, estimate, mark, solve, EstimatorVariant, FemSolution};
use crate::mesh::{QualityStats, TriMesh};
use crate::refine::rgb_refine;
use crate::smooth::{smooth, SmoothConfig, SmoothOrder};

/// Constant right-hand side of the Poisson problem driving refinement.
pub const SOURCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Marking threshold, strictly between 0 and 1.
    pub theta: f64,
    pub max_refinements: usize,
    /// Stop once the average triangle quality reaches this value.
    pub quality_target: f64,
    /// Optional extra stop condition on the average minimum angle, in degrees.
    pub min_angle_target: Option<f64>,
    pub smooth_max_iters: usize,
    pub smooth_tol: f64,
    /// Flip sweeps per smoothing round are capped at this factor times the
    /// edge count.
    pub flip_sweep_cap: usize,
    pub smooth_order: SmoothOrder,
    pub solver_tol: f64,
    /// Conjugate gradient iterations are capped at this factor times the
    /// number of unknowns.
    pub solver_max_iter_factor: usize,
    pub estimator_variant: EstimatorVariant,
    /// Point insertion order seed of the initial triangulation. It changes
    /// triangle numbering only, not the set of triangles.
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_refinements: 20,
            quality_target: 0.9,
            min_angle_target: None,
            smooth_max_iters: 20,
            smooth_tol: 1e-3,
            flip_sweep_cap: 10,
            smooth_order: SmoothOrder::FlipThenMove,
            solver_tol: 1e-10,
            solver_max_iter_factor: 20,
            estimator_variant: EstimatorVariant::Paper,
            seed: INSERTION_SEED,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let fail = |msg: String| Err(GenError::InvalidConfig(msg));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return fail(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.quality_target > 0.0 && self.quality_target <= 1.0) {
            return fail(format!("quality target must lie in (0, 1], got {}", self.quality_target));
        }
        if let Some(deg) = self.min_angle_target {
            if !(deg > 0.0 && deg <= 60.0) {
                return fail(format!("minimum angle target must lie in (0, 60], got {deg}"));
            }
        }
        if !(self.smooth_tol > 0.0) || !(self.solver_tol > 0.0) {
            return fail("tolerances must be positive".into());
        }
        if self.flip_sweep_cap == 0 || self.solver_max_iter_factor == 0 {
            return fail("iteration caps must be positive".into());
        }
        Ok(())
    }

    pub fn smooth_config(&self) -> SmoothConfig {
        SmoothConfig {
            max_iters: self.smooth_max_iters,
            tol: self.smooth_tol,
            flip_sweep_cap_factor: self.flip_sweep_cap,
            order: self.smooth_order,
        }
    }

    fn target_met(&self, stats: &QualityStats) -> bool {
        stats.average_quality >= self.quality_target
            && self
                .min_angle_target
                .is_none_or(|deg| stats.average_min_angle_degrees() >= deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub triangle_count: usize,
    pub vertex_count: usize,
    pub average_quality: f64,
    pub min_quality: f64,
    /// Degrees.
    pub average_min_angle: f64,
    /// Degrees.
    pub min_angle: f64,
}

impl MeshSummary {
    fn new(mesh: &TriMesh, stats: &QualityStats) -> Self {
        Self {
            triangle_count: mesh.num_triangles(),
            vertex_count: mesh.num_vertices(),
            average_quality: stats.average_quality,
            min_quality: stats.min_quality,
            average_min_angle: stats.average_min_angle_degrees(),
            min_angle: stats.min_angle.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub eta_max: f64,
    pub marked: usize,
    pub solver_iterations: usize,
    #[serde(flatten)]
    pub mesh: MeshSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub iterations_run: usize,
    pub initial: MeshSummary,
    pub iterations: Vec<IterationReport>,
    pub target_reached: bool,
    /// Seconds.
    pub wall_time: f64,
}

impl GenReport {
    pub fn final_summary(&self) -> &MeshSummary {
        self.iterations.last().map_or(&self.initial, |it| &it.mesh)
    }
}

/// Pipeline stage at which the observer is invoked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initial,
    Refined(usize),
    Smoothed(usize),
}

/// Generates a mesh of `domain`; see [`adaptmesh_observed`].
pub fn adaptmesh(domain: &PolygonDomain, cfg: &GenConfig) -> Result<(TriMesh, GenReport), GenError> {
    adaptmesh_observed(domain, cfg, |_, _| {})
}

/// Generates a mesh of `domain`, calling `observer` with the initial
/// triangulation and with every refined and smoothed mesh.
///
/// Each refinement solves the Poisson problem with unit source on the
/// current mesh, marks the triangles whose indicator exceeds `theta` times
/// the largest one, refines them and smooths the result. The loop stops
/// once the quality target holds or after `max_refinements` refinements;
/// the last mesh is returned either way.
pub fn adaptmesh_observed(
    domain: &PolygonDomain,
    cfg: &GenConfig,
    mut observer: impl FnMut(Stage, &TriMesh),
) -> Result<(TriMesh, GenReport), GenError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut mesh = initial_triangulation_seeded(domain, cfg.seed)?;
    observer(Stage::Initial, &mesh);
    let stats = mesh.quality_stats()?;
    let mut report = GenReport {
        iterations_run: 0,
        initial: MeshSummary::new(&mesh, &stats),
        iterations: Vec::new(),
        target_reached: cfg.target_met(&stats),
        wall_time: 0.0,
    };
    let smooth_cfg = cfg.smooth_config();

    for k in 1..=cfg.max_refinements {
        if report.target_reached {
            break;
        }
        let solver_err = |source: FemError| GenError::Solver { iteration: k, source };
        let (marked, eta_max, solver_iterations) = match assemble(&mesh, SOURCE) {
            Ok(system) => {
                let max_iter = cfg.solver_max_iter_factor * system.rhs.len();
                let solution = solve(&system, cfg.solver_tol, max_iter).map_err(solver_err)?;
                let errors = estimate(&mesh, &solution, SOURCE, cfg.estimator_variant).map_err(solver_err)?;
                let marked = mark(&errors, cfg.theta).map_err(solver_err)?;
                (marked, errors.eta_max, solution.solver_iterations)
            }
            Err(FemError::EmptySystem) => ((0..mesh.num_triangles()).collect(), 0.0, 0),
            Err(e) => return Err(solver_err(e)),
        };

        mesh = rgb_refine(&mesh, &marked);
        observer(Stage::Refined(k), &mesh);
        mesh = smooth(&mesh, &smooth_cfg);
        observer(Stage::Smoothed(k), &mesh);

        let stats = mesh.quality_stats()?;
        report.iterations_run = k;
        report.target_reached = cfg.target_met(&stats);
        report.iterations.push(IterationReport {
            iteration: k,
            eta_max,
            marked: marked.len(),
            solver_iterations,
            mesh: MeshSummary::new(&mesh, &stats),
        });
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((mesh, report))
}

/// Interior vertex solution on `mesh` with unit source, or `None` when the
/// mesh has no interior vertex.
pub fn solve_poisson(mesh: &TriMesh, cfg: &GenConfig) -> Result<Option<FemSolution>, FemError> {
    match assemble(mesh, SOURCE) {
        Ok(system) => {
            let max_iter = cfg.solver_max_iter_factor * system.rhs.len();
            solve(&system, cfg.solver_tol, max_iter).map(Some)
        }
        Err(FemError::EmptySystem) => Ok(None),
        Err(e) => Err(e),
    }
}
