//! Constrained Delaunay triangulation of a polygonal domain.
//!
//! Points are inserted incrementally (Bowyer-Watson) in a seeded shuffled
//! order. The hull is closed by ghost triangles that share a vertex at
//! infinity, so no bounding super-triangle is needed. Missing boundary edges
//! are then recovered by re-triangulating the cavity of the triangles they
//! cross, and everything outside the outer loop or inside a hole is removed.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{validate_polygon, PolygonDomain};
use crate::error::CdtError;
use crate::geometry::{in_circumcircle, orient2d, strictly_between, Point2, Sign};
use crate::mesh::{edge_key, Edge, TriMesh};

/// Seed of the insertion-order shuffle.
/// Default shuffle seed for point insertion.
pub const INSERTION_SEED: u64 = 0x05ee_dcd7;

/// The vertex at infinity closing the convex hull.
const GHOST: usize = usize::MAX;

struct Bowyer<'a> {
    points: &'a [Point2],
    triangles: Vec<[usize; 3]>,
}

impl Bowyer<'_> {
    fn conflicts(&self, tri: &[usize; 3], p: Point2) -> bool {
        if tri[2] == GHOST {
            let (u, v) = (self.points[tri[0]], self.points[tri[1]]);
            match orient2d(u, v, p) {
                Sign::Positive => true,
                Sign::Zero => strictly_between(u, v, p),
                Sign::Negative => false,
            }
        } else {
            let [a, b, c] = tri.map(|v| self.points[v]);
            in_circumcircle(a, b, c, p) == Sign::Positive
        }
    }

    fn insert(&mut self, v: usize) -> Result<(), CdtError> {
        let p = self.points[v];
        let (cavity, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = self
            .triangles
            .iter()
            .partition(|tri| self.conflicts(tri, p));
        if cavity.is_empty() {
            return Err(CdtError::DuplicatePoint(v));
        }
        let directed: HashSet<(usize, usize)> = cavity
            .iter()
            .flat_map(|t| (0..3).map(move |i| (t[i], t[(i + 1) % 3])))
            .collect();
        self.triangles = keep;
        for tri in &cavity {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                if directed.contains(&(b, a)) {
                    continue;
                }
                let new = if a == GHOST {
                    [b, v, GHOST]
                } else if b == GHOST {
                    [v, a, GHOST]
                } else {
                    [a, b, v]
                };
                self.triangles.push(new);
            }
        }
        Ok(())
    }
}

fn check_duplicates(points: &[Point2]) -> Result<(), CdtError> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .x
            .total_cmp(&points[j].x)
            .then(points[i].y.total_cmp(&points[j].y))
            .then(i.cmp(&j))
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(CdtError::DuplicatePoint(w[1]));
        }
    }
    Ok(())
}

/// Delaunay triangulation of a point set (vertex `i` is `points[i]`).
///
/// Cocircular configurations are resolved so that every ambiguous quad uses
/// the diagonal through its lowest-index vertex.
pub fn delaunay(points: &[Point2]) -> Result<TriMesh, CdtError> {
    delaunay_seeded(points, INSERTION_SEED)
}

/// [`delaunay`] with an explicit insertion-order seed. The result does not
/// depend on the seed.
pub fn delaunay_seeded(points: &[Point2], seed: u64) -> Result<TriMesh, CdtError> {
    if points.len() < 3 {
        return Err(CdtError::TooFewPoints(points.len()));
    }
    check_duplicates(points)?;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = (order[0], order[1]);
    let third = (2..order.len())
        .find(|&k| orient2d(points[a], points[b], points[order[k]]) != Sign::Zero)
        .ok_or(CdtError::Collinear)?;
    order.swap(2, third);
    let c = order[2];
    let (b, c) = if orient2d(points[a], points[b], points[c]) == Sign::Positive {
        (b, c)
    } else {
        (c, b)
    };

    let mut bw = Bowyer {
        points,
        triangles: vec![[a, b, c], [b, a, GHOST], [c, b, GHOST], [a, c, GHOST]],
    };
    for &v in &order[3..] {
        bw.insert(v)?;
    }
    let triangles = bw
        .triangles
        .into_iter()
        .filter(|t| t[2] != GHOST)
        .collect();
    let mut mesh = TriMesh::new(points.to_vec(), triangles, BTreeSet::new())?;
    canonicalize(&mut mesh);
    Ok(mesh)
}

/// Flips non-constrained edges until every quad is locally Delaunay, using
/// the lowest-index vertex to pick the diagonal of cocircular quads.
fn canonicalize(mesh: &mut TriMesh) {
    let cap = 10 * mesh.num_triangles().max(1);
    for _ in 0..cap {
        let mut flipped = false;
        for t in 0..mesh.num_triangles() {
            for i in 0..3 {
                let Some(quad) = mesh.quad(t, i) else { continue };
                if mesh.is_constrained(quad.p, quad.q) {
                    continue;
                }
                let [pa, pp, pq, pd] =
                    [quad.apex, quad.p, quad.q, quad.opposite].map(|v| mesh.vertices[v]);
                let wants_flip = match in_circumcircle(pa, pp, pq, pd) {
                    Sign::Positive => true,
                    Sign::Zero => quad.apex.min(quad.opposite) < quad.p.min(quad.q),
                    Sign::Negative => false,
                };
                if wants_flip && mesh.flip(&quad) {
                    flipped = true;
                }
            }
        }
        if !flipped {
            return;
        }
    }
}

/// Whether the open segments `(a, b)` and `(u, v)` cross at a single
/// interior point.
fn properly_cross(a: Point2, b: Point2, u: Point2, v: Point2) -> bool {
    let (o1, o2) = (orient2d(a, b, u), orient2d(a, b, v));
    let (o3, o4) = (orient2d(u, v, a), orient2d(u, v, b));
    o1 != Sign::Zero && o2 != Sign::Zero && o1 != o2 && o3 != Sign::Zero && o4 != Sign::Zero && o3 != o4
}

/// Triangulates the polygon `x, y, chain[0], .., chain[k-1]` (counter-clockwise)
/// with the Delaunay choice of apex for each base edge.
fn triangulate_pseudo_polygon(
    points: &[Point2],
    x: usize,
    y: usize,
    chain: &[usize],
    out: &mut Vec<[usize; 3]>,
) {
    if chain.is_empty() {
        return;
    }
    let mut pick = 0;
    for k in 1..chain.len() {
        if in_circumcircle(points[x], points[y], points[chain[pick]], points[chain[k]])
            == Sign::Positive
        {
            pick = k;
        }
    }
    let c = chain[pick];
    out.push([x, y, c]);
    triangulate_pseudo_polygon(points, c, y, &chain[..pick], out);
    triangulate_pseudo_polygon(points, x, c, &chain[pick + 1..], out);
}

fn insert_constraint(mesh: &mut TriMesh, a: usize, b: usize) -> Result<(), CdtError> {
    let n = mesh.num_vertices();
    if a >= n || b >= n || a == b {
        return Err(CdtError::MissingVertex(a, b));
    }
    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);

    // A vertex on the open segment splits the constraint.
    if let Some(v) = (0..n).find(|&v| {
        v != a
            && v != b
            && orient2d(pa, pb, mesh.vertices[v]) == Sign::Zero
            && strictly_between(pa, pb, mesh.vertices[v])
    }) {
        insert_constraint(mesh, a, v)?;
        return insert_constraint(mesh, v, b);
    }

    let key = edge_key(a, b);
    if mesh.edges().contains(&key) {
        mesh.constrained.insert(key);
        return Ok(());
    }

    let mut crossed = Vec::new();
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles[t];
        let mut hit = false;
        for i in 0..3 {
            let (u, v) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            if [u, v].contains(&a) || [u, v].contains(&b) {
                continue;
            }
            if properly_cross(pa, pb, mesh.vertices[u], mesh.vertices[v]) {
                if mesh.is_constrained(u, v) {
                    return Err(CdtError::ConstraintCrossing(a, b));
                }
                hit = true;
            }
        }
        if hit {
            crossed.push(t);
        }
    }

    let inner: HashSet<(usize, usize)> = crossed
        .iter()
        .flat_map(|&t| {
            let tri = mesh.triangles[t];
            (0..3).map(move |i| (tri[i], tri[(i + 1) % 3]))
        })
        .collect();
    let next: HashMap<usize, usize> = inner
        .iter()
        .filter(|&&(u, v)| !inner.contains(&(v, u)))
        .copied()
        .collect();
    let walk = |from: usize, to: usize| -> Result<Vec<usize>, CdtError> {
        let mut chain = Vec::new();
        let mut cur = *next.get(&from).ok_or(CdtError::ConstraintCrossing(a, b))?;
        while cur != to {
            chain.push(cur);
            cur = *next.get(&cur).ok_or(CdtError::ConstraintCrossing(a, b))?;
            if chain.len() > next.len() {
                return Err(CdtError::ConstraintCrossing(a, b));
            }
        }
        Ok(chain)
    };
    // Counter-clockwise around the cavity, a -> b runs along the right side.
    let right = walk(a, b)?;
    let left = walk(b, a)?;

    let mut fresh = Vec::with_capacity(crossed.len());
    triangulate_pseudo_polygon(&mesh.vertices, a, b, &left, &mut fresh);
    triangulate_pseudo_polygon(&mesh.vertices, b, a, &right, &mut fresh);
    debug_assert_eq!(fresh.len(), crossed.len());

    let removed: HashSet<usize> = crossed.into_iter().collect();
    let mut triangles: Vec<[usize; 3]> = (0..mesh.num_triangles())
        .filter(|t| !removed.contains(t))
        .map(|t| mesh.triangles[t])
        .collect();
    triangles.extend(fresh);
    mesh.triangles = triangles;
    mesh.build_adjacency()?;
    mesh.constrained.insert(key);
    Ok(())
}

/// Forces each edge into the triangulation and marks it constrained.
///
/// Non-constrained edges stay locally Delaunay with respect to visibility
/// across the constraints.
pub fn constrain_edges(mut mesh: TriMesh, edges: &BTreeSet<Edge>) -> Result<TriMesh, CdtError> {
    for &(a, b) in edges {
        insert_constraint(&mut mesh, a, b)?;
    }
    canonicalize(&mut mesh);
    Ok(mesh)
}

/// Drops every triangle outside the outer loop or inside a hole.
///
/// Triangles are classified by flood fill from the hull, toggling between
/// outside and inside whenever a constrained edge is crossed.
pub fn remove_exterior(mut mesh: TriMesh, domain: &PolygonDomain) -> Result<TriMesh, CdtError> {
    let nt = mesh.num_triangles();
    let mut inside: Vec<Option<bool>> = vec![None; nt];
    let mut queue = VecDeque::new();
    for t in 0..nt {
        for i in 0..3 {
            if mesh.neighbors[t][i].is_none() {
                let (u, v) = mesh.edge(t, i);
                let state = mesh.is_constrained(u, v);
                match inside[t] {
                    None => {
                        inside[t] = Some(state);
                        queue.push_back(t);
                    }
                    Some(s) if s != state => return Err(CdtError::InvalidConstraintLoop),
                    Some(_) => {}
                }
            }
        }
    }
    while let Some(t) = queue.pop_front() {
        let state = inside[t].expect("queued triangles are classified");
        for i in 0..3 {
            let Some(u) = mesh.neighbors[t][i] else { continue };
            let (x, y) = mesh.edge(t, i);
            let expected = if mesh.is_constrained(x, y) { !state } else { state };
            match inside[u] {
                None => {
                    inside[u] = Some(expected);
                    queue.push_back(u);
                }
                Some(s) if s != expected => return Err(CdtError::InvalidConstraintLoop),
                Some(_) => {}
            }
        }
    }

    mesh.triangles = (0..nt)
        .filter(|&t| inside[t] == Some(true))
        .map(|t| mesh.triangles[t])
        .collect();
    if mesh.triangles.is_empty() {
        return Err(CdtError::InvalidConstraintLoop);
    }
    // Constraints that ended up outside the kept region do not belong to the domain.
    let kept = mesh.edges();
    mesh.constrained.retain(|e| kept.contains(e));
    mesh.build_adjacency()?;
    debug_assert!((mesh.total_area() - domain.area()).abs() <= 1e-9 * domain.area().abs());
    Ok(mesh)
}

/// The initial mesh of a domain: the constrained Delaunay triangulation of
/// its corner points with the outside and the holes removed.
pub fn initial_triangulation(domain: &PolygonDomain) -> Result<TriMesh, CdtError> {
    initial_triangulation_seeded(domain, INSERTION_SEED)
}

/// [`initial_triangulation`] with an explicit insertion-order seed.
pub fn initial_triangulation_seeded(domain: &PolygonDomain, seed: u64) -> Result<TriMesh, CdtError> {
    let valid = validate_polygon(domain).map_err(CdtError::InvalidDomain)?;
    let domain = valid.domain;
    let mut points = Vec::new();
    let mut edges = BTreeSet::new();
    for lp in domain.loops() {
        let offset = points.len();
        points.extend_from_slice(lp);
        for i in 0..lp.len() {
            edges.insert(edge_key(offset + i, offset + (i + 1) % lp.len()));
        }
    }
    let mesh = delaunay_seeded(&points, seed)?;
    let mesh = constrain_edges(mesh, &edges)?;
    remove_exterior(mesh, &domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::p;
    use rand::Rng;

    fn unit_square() -> Vec<Point2> {
        vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)]
    }

    /// Empty-circumcircle check of every (triangle, point) pair.
    fn brute_force_delaunay(mesh: &TriMesh) -> bool {
        (0..mesh.num_triangles()).all(|t| {
            let [a, b, c] = mesh.corners(t);
            mesh.vertices
                .iter()
                .all(|&d| in_circumcircle(a, b, c, d) != Sign::Positive)
        })
    }

    #[test]
    fn square_has_two_triangles() {
        let m = delaunay(&unit_square()).unwrap();
        assert_eq!(m.num_triangles(), 2);
        // Cocircular: the diagonal through vertex 0 wins.
        assert!(m.edges().contains(&(0, 2)));
        assert!(brute_force_delaunay(&m));
    }

    #[test]
    fn three_points_one_triangle() {
        let m = delaunay(&[p(0., 0.), p(0., 1.), p(1., 0.)]).unwrap();
        assert_eq!(m.num_triangles(), 1);
        assert!(m.validate_conformity().violations.iter().all(|v| matches!(
            v,
            crate::mesh::Violation::UnconstrainedBoundaryEdge { .. }
        )));
    }

    #[test]
    fn rejects_bad_point_sets() {
        assert_eq!(
            delaunay(&[p(0., 0.), p(1., 1.), p(2., 2.), p(3., 3.)]),
            Err(CdtError::Collinear)
        );
        assert_eq!(
            delaunay(&[p(0., 0.), p(1., 0.), p(0., 1.), p(1., 0.)]),
            Err(CdtError::DuplicatePoint(3))
        );
        assert_eq!(delaunay(&[p(0., 0.), p(1., 0.)]), Err(CdtError::TooFewPoints(2)));
    }

    #[test]
    fn random_point_sets_are_delaunay() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(3..=50);
            let pts: Vec<Point2> = (0..n).map(|_| p(rng.gen(), rng.gen())).collect();
            let m = delaunay(&pts).unwrap();
            assert!(brute_force_delaunay(&m));
            let hull_area = m.total_area();
            assert!(hull_area > 0.0);
        }
    }

    #[test]
    fn grid_points_with_many_cocircular_quads() {
        let pts: Vec<Point2> = (0..6)
            .flat_map(|j| (0..6).map(move |i| p(i as f64, j as f64)))
            .collect();
        let m = delaunay(&pts).unwrap();
        assert_eq!(m.num_triangles(), 50);
        assert!(brute_force_delaunay(&m));
        assert!((m.total_area() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn points_collinear_with_the_hull() {
        let mut pts: Vec<Point2> = (0..8).map(|i| p(i as f64, 0.0)).collect();
        pts.push(p(3.5, 2.0));
        pts.push(p(3.5, -2.0));
        let m = delaunay(&pts).unwrap();
        assert!(brute_force_delaunay(&m));
        assert!((m.total_area() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn constraining_the_other_diagonal_flips_it() {
        let m = delaunay(&unit_square()).unwrap();
        let m = constrain_edges(m, &BTreeSet::from([(1, 3)])).unwrap();
        assert!(m.edges().contains(&(1, 3)));
        assert!(!m.edges().contains(&(0, 2)));
        assert!(m.constrained.contains(&(1, 3)));
    }

    #[test]
    fn constraining_an_existing_edge_only_marks_it() {
        let m = delaunay(&unit_square()).unwrap();
        let before = m.triangles.clone();
        let m = constrain_edges(m, &BTreeSet::from([(0, 2)])).unwrap();
        assert_eq!(m.triangles, before);
        assert_eq!(m.constrained, BTreeSet::from([(0, 2)]));
    }

    #[test]
    fn constraint_through_many_triangles() {
        // A long horizontal edge across a cloud of points.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = vec![p(-1.0, 0.001), p(2.0, -0.001)];
        pts.extend((0..40).map(|_| p(rng.gen(), rng.gen_range(-1.0..1.0))));
        let m = delaunay(&pts).unwrap();
        let area = m.total_area();
        let m = constrain_edges(m, &BTreeSet::from([(0, 1)])).unwrap();
        assert!(m.edges().contains(&(0, 1)));
        assert!((m.total_area() - area).abs() < 1e-12 * area);
        assert!(m
            .validate_conformity()
            .violations
            .iter()
            .all(|v| matches!(v, crate::mesh::Violation::UnconstrainedBoundaryEdge { .. })));
        // Constrained Delaunay: no vertex visible from a triangle lies in its circumcircle.
        for t in 0..m.num_triangles() {
            for i in 0..3 {
                if let Some(q) = m.quad(t, i) {
                    if m.is_constrained(q.p, q.q) {
                        continue;
                    }
                    let [a, b, c, d] = [q.apex, q.p, q.q, q.opposite].map(|v| m.vertices[v]);
                    assert_ne!(in_circumcircle(a, b, c, d), Sign::Positive);
                }
            }
        }
    }

    #[test]
    fn crossing_constraints_are_rejected() {
        let m = delaunay(&unit_square()).unwrap();
        let m = constrain_edges(m, &BTreeSet::from([(0, 2)])).unwrap();
        assert_eq!(
            constrain_edges(m, &BTreeSet::from([(1, 3)])).unwrap_err(),
            CdtError::ConstraintCrossing(1, 3)
        );
    }

    #[test]
    fn convex_polygon_keeps_everything() {
        let hexagon: Vec<Point2> = (0..6)
            .map(|k| {
                let t = std::f64::consts::PI / 3.0 * k as f64;
                p(t.cos(), t.sin())
            })
            .collect();
        let m = initial_triangulation(&PolygonDomain::new(hexagon)).unwrap();
        assert_eq!(m.num_triangles(), 4);
        assert!(m.validate_conformity().is_ok());
    }

    #[test]
    fn square_initial_mesh() {
        let m = initial_triangulation(&PolygonDomain::new(unit_square())).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.total_area(), 1.0);
        assert_eq!(m.constrained.len(), 4);
    }

    #[test]
    fn nonconvex_polygon_removes_exterior() {
        let l_shape = vec![
            p(0., 0.),
            p(2., 0.),
            p(2., 1.),
            p(1., 1.),
            p(1., 2.),
            p(0., 2.),
        ];
        let domain = PolygonDomain::new(l_shape);
        let m = initial_triangulation(&domain).unwrap();
        assert_eq!(m.num_triangles(), 4);
        assert!((m.total_area() - 3.0).abs() < 1e-15);
        assert!(m.validate_conformity().is_ok());
        assert!(m.constrained_chains_cover(&domain).is_ok());
        for t in 0..m.num_triangles() {
            let [a, b, c] = m.corners(t);
            let centroid = (a + b + c) * (1.0 / 3.0);
            assert!(!(centroid.x > 1.0 && centroid.y > 1.0));
        }
    }

    #[test]
    fn square_with_hole() {
        let hole = vec![p(0.4, 0.4), p(0.6, 0.4), p(0.6, 0.6), p(0.4, 0.6)];
        let domain = PolygonDomain::new(unit_square()).with_hole(hole);
        let m = initial_triangulation(&domain).unwrap();
        assert_eq!(m.num_triangles(), 8);
        assert!((m.total_area() - 0.96).abs() < 1e-12);
        assert_eq!(m.locate_point(p(0.5, 0.5)), None);
        assert!(m.validate_conformity().is_ok());
    }

    #[test]
    fn invalid_domain_is_reported() {
        let bowtie = vec![p(0., 0.), p(1., 1.), p(1., 0.), p(0., 1.)];
        assert!(matches!(
            initial_triangulation(&PolygonDomain::new(bowtie)),
            Err(CdtError::InvalidDomain(_))
        ));
    }

    #[test]
    fn result_is_independent_of_insertion_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut points: Vec<Point2> = (0..40).map(|_| p(rng.gen(), rng.gen())).collect();
        points.extend((0..5).flat_map(|i| (0..5).map(move |j| p(2.0 + i as f64, j as f64))));
        let canonical = |m: &TriMesh| {
            let mut tris: Vec<[usize; 3]> = m
                .triangles
                .iter()
                .map(|t| {
                    let r = (0..3).min_by_key(|&i| t[i]).unwrap();
                    [t[r], t[(r + 1) % 3], t[(r + 2) % 3]]
                })
                .collect();
            tris.sort();
            tris
        };
        let reference = canonical(&delaunay(&points).unwrap());
        for seed in 0..8 {
            assert_eq!(canonical(&delaunay_seeded(&points, seed).unwrap()), reference);
        }
    }
}
