//! The triangulation store shared by every pipeline stage.
//!
//! Triangles are stored as counter-clockwise vertex index triples. Neighbor
//! slot `i` of a triangle refers to the triangle across the edge opposite
//! vertex `i`, i.e. the edge `(v[i+1], v[i+2])`.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::domain::PolygonDomain;
use crate::error::MeshError;
use crate::geometry::{
    orient2d, quality_or_zero, signed_area, strictly_between, tri_metrics, Point2, Sign,
};

/// An undirected edge with `0 < 1` ordering.
pub type Edge = (usize, usize);

pub fn edge_key(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    /// Subsegments of the input boundary edges.
    pub constrained: BTreeSet<Edge>,
    /// Per triangle, per slot: the adjacent triangle, `None` on the boundary.
    pub neighbors: Vec<[Option<usize>; 3]>,
    pub boundary_vertex: Vec<bool>,
}

impl TriMesh {
    /// Creates a mesh and builds its adjacency.
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        constrained: BTreeSet<Edge>,
    ) -> Result<Self, MeshError> {
        let mut mesh = TriMesh {
            vertices,
            triangles,
            constrained,
            neighbors: Vec::new(),
            boundary_vertex: Vec::new(),
        };
        mesh.build_adjacency()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Vertex indices of the edge in slot `i` of triangle `t`.
    pub fn edge(&self, t: usize, i: usize) -> Edge {
        let tri = self.triangles[t];
        edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3])
    }

    pub fn is_constrained(&self, a: usize, b: usize) -> bool {
        self.constrained.contains(&edge_key(a, b))
    }

    /// Undirected edges in ascending order.
    pub fn edges(&self) -> BTreeSet<Edge> {
        (0..self.num_triangles())
            .flat_map(|t| (0..3).map(move |i| (t, i)))
            .map(|(t, i)| self.edge(t, i))
            .collect()
    }

    /// Populates the neighbor table and the boundary-vertex flags.
    pub fn build_adjacency(&mut self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= n) {
                return Err(MeshError::InvalidVertexIndex {
                    triangle: t,
                    vertex: v,
                    count: n,
                });
            }
        }
        let mut incident: HashMap<Edge, Vec<(usize, usize)>> =
            HashMap::with_capacity(3 * self.triangles.len() / 2 + 1);
        for t in 0..self.triangles.len() {
            for i in 0..3 {
                let slots = incident.entry(self.edge(t, i)).or_default();
                if slots.len() == 2 {
                    let e = self.edge(t, i);
                    return Err(MeshError::NonManifoldEdge(e.0, e.1));
                }
                slots.push((t, i));
            }
        }
        let mut neighbors = vec![[None; 3]; self.triangles.len()];
        let mut boundary_vertex = vec![false; n];
        for (edge, slots) in &incident {
            match slots.as_slice() {
                [(t, i), (u, j)] => {
                    neighbors[*t][*i] = Some(*u);
                    neighbors[*u][*j] = Some(*t);
                }
                _ => {
                    boundary_vertex[edge.0] = true;
                    boundary_vertex[edge.1] = true;
                }
            }
        }
        self.neighbors = neighbors;
        self.boundary_vertex = boundary_vertex;
        Ok(())
    }

    /// Slot of triangle `t` whose neighbor is `other`.
    pub fn slot_of_neighbor(&self, t: usize, other: usize) -> Option<usize> {
        self.neighbors[t].iter().position(|&n| n == Some(other))
    }

    /// The quad around the interior edge in slot `i` of triangle `t`.
    ///
    /// With `t = (apex, p, q)` the neighbor is `(opposite, q, p)`.
    pub fn quad(&self, t: usize, i: usize) -> Option<Quad> {
        let other = self.neighbors[t][i]?;
        let j = self.slot_of_neighbor(other, t)?;
        let tri = self.triangles[t];
        Some(Quad {
            triangle: t,
            slot: i,
            neighbor: other,
            neighbor_slot: j,
            apex: tri[i],
            p: tri[(i + 1) % 3],
            q: tri[(i + 2) % 3],
            opposite: self.triangles[other][j],
        })
    }

    /// Replaces the diagonal `(p, q)` of a quad by `(apex, opposite)`.
    ///
    /// Returns `false` without touching the mesh when either new triangle
    /// would not be positively oriented. Constraint marks are not checked.
    pub fn flip(&mut self, quad: &Quad) -> bool {
        let Quad {
            triangle: t,
            slot: i,
            neighbor: n,
            neighbor_slot: j,
            apex: a,
            p,
            q,
            opposite: d,
        } = *quad;
        let (pa, pp, pq, pd) = (
            self.vertices[a],
            self.vertices[p],
            self.vertices[q],
            self.vertices[d],
        );
        if orient2d(pa, pp, pd) != Sign::Positive || orient2d(pa, pd, pq) != Sign::Positive {
            return false;
        }
        let across_ap = self.neighbors[t][(i + 2) % 3];
        let across_qa = self.neighbors[t][(i + 1) % 3];
        let across_dq = self.neighbors[n][(j + 2) % 3];
        let across_pd = self.neighbors[n][(j + 1) % 3];

        self.triangles[t] = [a, p, d];
        self.neighbors[t] = [across_pd, Some(n), across_ap];
        self.triangles[n] = [a, d, q];
        self.neighbors[n] = [across_dq, across_qa, Some(t)];

        if let Some(u) = across_pd {
            if let Some(k) = self.slot_of_neighbor(u, n) {
                self.neighbors[u][k] = Some(t);
            }
        }
        if let Some(u) = across_qa {
            if let Some(k) = self.slot_of_neighbor(u, t) {
                self.neighbors[u][k] = Some(n);
            }
        }
        true
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                signed_area(a, b, c)
            })
            .sum()
    }

    /// A triangle containing `p`, the lowest index winning ties on shared
    /// edges and vertices.
    pub fn locate_point(&self, p: Point2) -> Option<usize> {
        (0..self.num_triangles()).find(|&t| {
            let [a, b, c] = self.corners(t);
            orient2d(a, b, p) != Sign::Negative
                && orient2d(b, c, p) != Sign::Negative
                && orient2d(c, a, p) != Sign::Negative
        })
    }

    pub fn quality_stats(&self) -> Result<QualityStats, MeshError> {
        if self.triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut histogram = [0usize; HISTOGRAM_BINS];
        let mut quality_sum = 0.0;
        let mut angle_sum = 0.0;
        let mut min_quality = f64::INFINITY;
        let mut min_angle = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let [a, b, c] = self.corners(t);
            let (q, angle) = match tri_metrics(a, b, c) {
                Ok(m) => (m.quality, m.min_angle),
                Err(_) => (0.0, 0.0),
            };
            quality_sum += q;
            angle_sum += angle;
            min_quality = min_quality.min(q);
            min_angle = min_angle.min(angle);
            let bin = ((q * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            histogram[bin] += 1;
        }
        let n = self.num_triangles() as f64;
        Ok(QualityStats {
            average_quality: quality_sum / n,
            min_quality,
            average_min_angle: angle_sum / n,
            min_angle,
            histogram,
        })
    }

    /// Per-triangle quality (0 for degenerate triangles).
    pub fn qualities(&self) -> Vec<f64> {
        (0..self.num_triangles())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                quality_or_zero(a, b, c)
            })
            .collect()
    }

    /// Checks every structural invariant and reports the violations found.
    pub fn validate_conformity(&self) -> ConformityReport {
        let mut violations = Vec::new();
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                violations.push(Violation::InvalidIndex { triangle: t });
            }
        }
        if !violations.is_empty() {
            return ConformityReport { violations };
        }

        for t in 0..self.num_triangles() {
            let [a, b, c] = self.corners(t);
            if orient2d(a, b, c) != Sign::Positive {
                violations.push(Violation::NotPositivelyOriented { triangle: t });
            }
        }

        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut count: HashMap<Edge, usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                let (u, v) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                if let Some(&other) = directed.get(&(u, v)) {
                    violations.push(Violation::InconsistentOrientation {
                        edge: edge_key(u, v),
                        triangles: (other, t),
                    });
                }
                directed.insert((u, v), t);
                *count.entry(edge_key(u, v)).or_default() += 1;
            }
        }

        let mut boundary_edges: Vec<Edge> = Vec::new();
        let mut expected_boundary = vec![false; n];
        for (&e, &c) in &count {
            match c {
                1 => {
                    boundary_edges.push(e);
                    expected_boundary[e.0] = true;
                    expected_boundary[e.1] = true;
                    if !self.constrained.contains(&e) {
                        violations.push(Violation::UnconstrainedBoundaryEdge { edge: e });
                    }
                }
                2 => {}
                _ => violations.push(Violation::NonManifoldEdge { edge: e }),
            }
        }
        boundary_edges.sort_unstable();

        for &e in &self.constrained {
            if !count.contains_key(&e) {
                violations.push(Violation::MissingConstrainedEdge { edge: e });
            }
        }

        if self.boundary_vertex.len() != n {
            violations.push(Violation::StaleAdjacency);
        } else {
            for v in 0..n {
                if self.boundary_vertex[v] != expected_boundary[v] {
                    violations.push(Violation::BoundaryFlagMismatch { vertex: v });
                }
            }
        }

        if self.neighbors.len() != self.triangles.len() {
            violations.push(Violation::StaleAdjacency);
        } else {
            'outer: for t in 0..self.num_triangles() {
                for i in 0..3 {
                    let consistent = match self.neighbors[t][i] {
                        Some(u) => {
                            u < self.num_triangles()
                                && self.slot_of_neighbor(u, t).map(|j| self.edge(u, j))
                                    == Some(self.edge(t, i))
                        }
                        None => count.get(&self.edge(t, i)) == Some(&1),
                    };
                    if !consistent {
                        violations.push(Violation::StaleAdjacency);
                        break 'outer;
                    }
                }
            }
        }

        // A hanging vertex splits the far side of an edge, which leaves both
        // the long edge and the vertex itself on the boundary.
        let candidates: Vec<usize> = (0..n).filter(|&v| expected_boundary[v]).collect();
        for &(a, b) in &boundary_edges {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let (xlo, xhi) = (pa.x.min(pb.x), pa.x.max(pb.x));
            let (ylo, yhi) = (pa.y.min(pb.y), pa.y.max(pb.y));
            for &v in &candidates {
                let p = self.vertices[v];
                if v == a || v == b || p.x < xlo || p.x > xhi || p.y < ylo || p.y > yhi {
                    continue;
                }
                if orient2d(pa, pb, p) == Sign::Zero && strictly_between(pa, pb, p) {
                    violations.push(Violation::HangingNode {
                        vertex: v,
                        edge: (a, b),
                    });
                }
            }
        }

        ConformityReport { violations }
    }

    /// Checks that each input boundary edge is reproduced by a chain of
    /// constrained subsegments running from one corner to the other.
    ///
    /// Subsegment endpoints created by midpoint splits can be off the input
    /// line by one rounding, so collinearity is checked with a relative
    /// tolerance of `1e-12`.
    pub fn constrained_chains_cover(&self, domain: &PolygonDomain) -> Result<(), String> {
        let mut by_coord: HashMap<(u64, u64), usize> = HashMap::new();
        for (i, p) in self.vertices.iter().enumerate() {
            by_coord.insert((p.x.to_bits(), p.y.to_bits()), i);
        }
        let find = |p: Point2| by_coord.get(&(p.x.to_bits(), p.y.to_bits())).copied();
        let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(a, b) in &self.constrained {
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        for (start, end) in domain.edges() {
            let (Some(s), Some(e)) = (find(start), find(end)) else {
                return Err(format!("corner {start:?} or {end:?} is not a mesh vertex"));
            };
            let dir = end - start;
            let len2 = dir.dot(dir);
            let param = |p: Point2| (p - start).dot(dir) / len2;
            let off_line = |p: Point2| (p - start).cross(dir).abs() / len2;
            let mut current = s;
            let mut t_current = 0.0;
            let mut steps = 0;
            while current != e {
                let next = adjacency
                    .get(&current)
                    .into_iter()
                    .flatten()
                    .copied()
                    .filter(|&w| {
                        let p = self.vertices[w];
                        off_line(p) <= 1e-12 && param(p) > t_current && param(p) <= 1.0 + 1e-12
                    })
                    .min_by(|&u, &w| param(self.vertices[u]).total_cmp(&param(self.vertices[w])));
                match next {
                    Some(w) => {
                        t_current = param(self.vertices[w]);
                        current = w;
                    }
                    None => {
                        return Err(format!(
                            "constrained chain from {start:?} to {end:?} breaks at vertex {current}"
                        ))
                    }
                }
                steps += 1;
                if steps > self.constrained.len() {
                    return Err("constrained chain does not terminate".into());
                }
            }
        }
        Ok(())
    }
}

/// Two triangles sharing the edge `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quad {
    pub triangle: usize,
    pub slot: usize,
    pub neighbor: usize,
    pub neighbor_slot: usize,
    pub apex: usize,
    pub p: usize,
    pub q: usize,
    pub opposite: usize,
}

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityStats {
    pub average_quality: f64,
    pub min_quality: f64,
    /// Radians.
    pub average_min_angle: f64,
    /// Radians.
    pub min_angle: f64,
    /// Counts of triangle quality in `HISTOGRAM_BINS` equal bins over [0, 1].
    pub histogram: [usize; HISTOGRAM_BINS],
}

impl QualityStats {
    pub fn average_min_angle_degrees(&self) -> f64 {
        self.average_min_angle * 180.0 / PI
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    InvalidIndex { triangle: usize },
    NotPositivelyOriented { triangle: usize },
    InconsistentOrientation { edge: Edge, triangles: (usize, usize) },
    NonManifoldEdge { edge: Edge },
    UnconstrainedBoundaryEdge { edge: Edge },
    MissingConstrainedEdge { edge: Edge },
    BoundaryFlagMismatch { vertex: usize },
    HangingNode { vertex: usize, edge: Edge },
    StaleAdjacency,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidIndex { triangle } => {
                write!(f, "triangle {triangle} has an out-of-range vertex")
            }
            Violation::NotPositivelyOriented { triangle } => {
                write!(f, "triangle {triangle} is not positively oriented")
            }
            Violation::InconsistentOrientation { edge, triangles } => write!(
                f,
                "triangles {} and {} traverse edge {edge:?} in the same direction",
                triangles.0, triangles.1
            ),
            Violation::NonManifoldEdge { edge } => write!(f, "edge {edge:?} has 3+ triangles"),
            Violation::UnconstrainedBoundaryEdge { edge } => {
                write!(f, "boundary edge {edge:?} is not constrained")
            }
            Violation::MissingConstrainedEdge { edge } => {
                write!(f, "constrained edge {edge:?} is not a triangle edge")
            }
            Violation::BoundaryFlagMismatch { vertex } => {
                write!(f, "boundary flag of vertex {vertex} is wrong")
            }
            Violation::HangingNode { vertex, edge } => {
                write!(f, "vertex {vertex} hangs on edge {edge:?}")
            }
            Violation::StaleAdjacency => write!(f, "adjacency table is stale"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConformityReport {
    pub violations: Vec<Violation>,
}

impl ConformityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ConformityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
