//! Centroidal patch smoothing combined with Delaunay edge flipping.

use serde::{Deserialize, Serialize};

use crate::geometry::{in_circumcircle, orient2d, signed_area, Point2, Sign};
use crate::mesh::TriMesh;

/// Order of the two operations inside one smoothing round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothOrder {
    #[default]
    FlipThenMove,
    MoveThenFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothConfig {
    /// Maximum number of flip/move rounds.
    pub max_iters: usize,
    /// Stop once no vertex moves more than this fraction of its mean
    /// incident edge length.
    pub tol: f64,
    /// Flip sweeps per call are capped at this factor times the edge count.
    pub flip_sweep_cap_factor: usize,
    pub order: SmoothOrder,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol: 1e-3,
            flip_sweep_cap_factor: 10,
            order: SmoothOrder::FlipThenMove,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CptStep {
    pub max_displacement: f64,
    /// Displacement relative to the mean length of the incident edges.
    pub max_relative_displacement: f64,
    /// Interior vertices kept in place to avoid inverting a triangle.
    pub rejected: usize,
}

/// Moves every interior vertex to the area-weighted mean of the barycentres
/// of its incident triangles, all computed from the current positions.
pub fn cpt_step(mesh: &mut TriMesh) -> CptStep {
    let n = mesh.num_vertices();
    let mut weighted = vec![Point2::default(); n];
    let mut weight = vec![0.0; n];
    let mut edge_sum = vec![0.0; n];
    let mut edge_count = vec![0usize; n];
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.corners(t);
        let area = signed_area(a, b, c);
        let barycentre = (a + b + c) * (1.0 / 3.0);
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let v = tri[i];
            weighted[v] = weighted[v] + barycentre * area;
            weight[v] += area;
            let len = mesh.vertices[v].distance(mesh.vertices[tri[(i + 1) % 3]]);
            edge_sum[v] += len;
            edge_sum[tri[(i + 1) % 3]] += len;
            edge_count[v] += 1;
            edge_count[tri[(i + 1) % 3]] += 1;
        }
    }

    let old = mesh.vertices.clone();
    let mut moved = vec![false; n];
    for v in 0..n {
        if mesh.boundary_vertex[v] || weight[v] <= 0.0 {
            continue;
        }
        let target = weighted[v] * (1.0 / weight[v]);
        if target != old[v] {
            mesh.vertices[v] = target;
            moved[v] = true;
        }
    }

    let mut rejected = 0;
    loop {
        let mut reverted = false;
        for t in 0..mesh.num_triangles() {
            let tri = mesh.triangles[t];
            if !tri.iter().any(|&v| moved[v]) {
                continue;
            }
            let [a, b, c] = mesh.corners(t);
            if orient2d(a, b, c) != Sign::Positive {
                for v in tri {
                    if moved[v] {
                        mesh.vertices[v] = old[v];
                        moved[v] = false;
                        rejected += 1;
                        reverted = true;
                    }
                }
            }
        }
        if !reverted {
            break;
        }
    }

    let mut step = CptStep {
        rejected,
        ..CptStep::default()
    };
    for v in (0..n).filter(|&v| moved[v]) {
        let d = mesh.vertices[v].distance(old[v]);
        let mean_edge = edge_sum[v] / edge_count[v] as f64;
        step.max_displacement = step.max_displacement.max(d);
        step.max_relative_displacement = step.max_relative_displacement.max(d / mean_edge);
    }
    step
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlipOutcome {
    pub flips: usize,
    pub sweeps: usize,
}

/// Flips non-constrained edges whose opposite vertex lies strictly inside
/// the circumcircle, sweeping in triangle-index order until a sweep makes no
/// flip or `sweep_cap` sweeps have run.
pub fn flip_edges(mesh: &mut TriMesh, sweep_cap: usize) -> FlipOutcome {
    let mut outcome = FlipOutcome::default();
    while outcome.sweeps < sweep_cap {
        outcome.sweeps += 1;
        let mut flipped = 0;
        for t in 0..mesh.num_triangles() {
            for i in 0..3 {
                let Some(quad) = mesh.quad(t, i) else { continue };
                if quad.neighbor < t || mesh.is_constrained(quad.p, quad.q) {
                    continue;
                }
                let [a, p, q, d] = [quad.apex, quad.p, quad.q, quad.opposite].map(|v| mesh.vertices[v]);
                if in_circumcircle(a, p, q, d) == Sign::Positive && mesh.flip(&quad) {
                    flipped += 1;
                }
            }
        }
        outcome.flips += flipped;
        if flipped == 0 {
            break;
        }
    }
    outcome
}

/// Number of undirected edges, from Euler-style counting of triangle sides.
fn edge_count(mesh: &TriMesh) -> usize {
    let boundary = mesh.neighbors.iter().flatten().filter(|n| n.is_none()).count();
    (3 * mesh.num_triangles() + boundary) / 2
}

/// Alternates edge flipping and centroidal patch steps until the vertices
/// settle or `cfg.max_iters` rounds have run.
pub fn smooth(mesh: &TriMesh, cfg: &SmoothConfig) -> TriMesh {
    let mut mesh = mesh.clone();
    let sweep_cap = cfg.flip_sweep_cap_factor * edge_count(&mesh).max(1);
    for _ in 0..cfg.max_iters {
        if cfg.order == SmoothOrder::FlipThenMove {
            flip_edges(&mut mesh, sweep_cap);
        }
        let step = cpt_step(&mut mesh);
        if cfg.order == SmoothOrder::MoveThenFlip {
            flip_edges(&mut mesh, sweep_cap);
        }
        if step.max_relative_displacement < cfg.tol {
            break;
        }
    }
    mesh
}
