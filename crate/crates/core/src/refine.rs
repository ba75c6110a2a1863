//! Red-green-blue refinement.
//!
//! Every triangle uses its longest edge as the reference edge. A triangle
//! with any bisected edge must also have its reference edge bisected; with
//! that rule satisfied it is split green (reference edge only), blue
//! (reference edge plus one more) or red (all three edges).

use std::collections::{BTreeMap, BTreeSet};

use crate::mesh::{edge_key, Edge, TriMesh};

/// Slot of the reference (longest) edge of triangle `t`.
///
/// Equal lengths are resolved in favor of the lowest opposite vertex.
pub fn reference_slot(mesh: &TriMesh, t: usize) -> usize {
    let tri = mesh.triangles[t];
    let len2 = |i: usize| {
        let d = mesh.vertices[tri[(i + 1) % 3]] - mesh.vertices[tri[(i + 2) % 3]];
        d.dot(d)
    };
    (0..3)
        .max_by(|&i, &j| {
            len2(i)
                .total_cmp(&len2(j))
                .then_with(|| tri[j].cmp(&tri[i]))
        })
        .expect("three slots")
}

/// Smallest superset of `split` in which every triangle with a bisected edge
/// also has its reference edge bisected.
pub fn closure(mesh: &TriMesh, split: &BTreeSet<Edge>) -> BTreeSet<Edge> {
    let mut closed = split.clone();
    let reference: Vec<usize> = (0..mesh.num_triangles())
        .map(|t| reference_slot(mesh, t))
        .collect();
    let mut pending: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| (0..3).any(|i| closed.contains(&mesh.edge(t, i))))
        .collect();
    pending.reverse();
    while let Some(t) = pending.pop() {
        let slot = reference[t];
        if closed.insert(mesh.edge(t, slot)) {
            if let Some(other) = mesh.neighbors[t][slot] {
                pending.push(other);
            }
        }
    }
    closed
}

/// Red-refines the marked triangles and closes the mesh with green and blue
/// splits. Midpoints of constrained edges split them into two constrained
/// subsegments.
pub fn rgb_refine(mesh: &TriMesh, marked: &[usize]) -> TriMesh {
    if marked.is_empty() {
        return mesh.clone();
    }
    let seeds: BTreeSet<Edge> = marked
        .iter()
        .flat_map(|&t| (0..3).map(move |i| (t, i)))
        .map(|(t, i)| mesh.edge(t, i))
        .collect();
    let split = closure(mesh, &seeds);

    let mut vertices = mesh.vertices.clone();
    let mut midpoint: BTreeMap<Edge, usize> = BTreeMap::new();
    for &(a, b) in &split {
        midpoint.insert((a, b), vertices.len());
        vertices.push(mesh.vertices[a].midpoint(mesh.vertices[b]));
    }
    let mid = |u: usize, v: usize| midpoint.get(&edge_key(u, v)).copied();

    let mut triangles = Vec::with_capacity(mesh.num_triangles() + 3 * split.len());
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles[t];
        let r = reference_slot(mesh, t);
        let (a, b, c) = (tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]);
        match (mid(b, c), mid(c, a), mid(a, b)) {
            (None, None, None) => triangles.push(tri),
            (Some(m0), None, None) => triangles.extend([[a, b, m0], [a, m0, c]]),
            (Some(m0), Some(m1), None) => {
                triangles.extend([[a, b, m0], [m0, c, m1], [a, m0, m1]])
            }
            (Some(m0), None, Some(m2)) => {
                triangles.extend([[a, m2, m0], [m2, b, m0], [a, m0, c]])
            }
            (Some(m0), Some(m1), Some(m2)) => {
                triangles.extend([[a, m2, m1], [m2, b, m0], [m1, m0, c], [m0, m1, m2]])
            }
            _ => unreachable!("closure bisects the reference edge of every split triangle"),
        }
    }

    let mut constrained = mesh.constrained.clone();
    for (&(a, b), &m) in &midpoint {
        if constrained.remove(&(a, b)) {
            constrained.insert(edge_key(a, m));
            constrained.insert(edge_key(m, b));
        }
    }
    TriMesh::new(vertices, triangles, constrained).expect("refinement of a manifold mesh is manifold")
}

/// Splits every triangle into four.
pub fn uniform_refine(mesh: &TriMesh) -> TriMesh {
    let all: Vec<usize> = (0..mesh.num_triangles()).collect();
    rgb_refine(mesh, &all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tri_metrics, Point2};
    use crate::mesh::tests::{closed_mesh, p, structured_square, two_triangle_square};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn min_angle(mesh: &TriMesh) -> f64 {
        (0..mesh.num_triangles())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                tri_metrics(a, b, c).unwrap().min_angle
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn jittered_square(n: usize, seed: u64) -> TriMesh {
        let mut m = structured_square(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1.0 / n as f64;
        for v in 0..m.num_vertices() {
            if !m.boundary_vertex[v] {
                m.vertices[v] = m.vertices[v]
                    + p(rng.gen_range(-0.3..0.3) * h, rng.gen_range(-0.3..0.3) * h);
            }
        }
        m
    }

    #[test]
    fn single_triangle_red_split() {
        let m = closed_mesh(vec![p(0., 0.), p(2., 0.), p(0.5, 1.5)], vec![[0, 1, 2]]);
        let r = rgb_refine(&m, &[0]);
        assert_eq!(r.num_triangles(), 4);
        assert_eq!(r.num_vertices(), 6);
        let parent = tri_metrics(p(0., 0.), p(2., 0.), p(0.5, 1.5)).unwrap();
        for t in 0..4 {
            let [a, b, c] = r.corners(t);
            let child = tri_metrics(a, b, c).unwrap();
            assert!((child.area - parent.area / 4.0).abs() < 1e-15);
            assert!((child.longest_edge - parent.longest_edge / 2.0).abs() < 1e-15);
            assert!((child.min_angle - parent.min_angle).abs() < 1e-12);
        }
        assert_eq!(r.constrained.len(), 6);
        assert!(r.validate_conformity().is_ok());
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = structured_square(3);
        assert_eq!(rgb_refine(&m, &[]), m);
    }

    #[test]
    fn two_triangle_square_closes_with_green() {
        let m = two_triangle_square();
        let r = rgb_refine(&m, &[0]);
        // The shared diagonal is the neighbor's longest edge.
        assert_eq!(r.num_triangles(), 6);
        assert_eq!(r.num_vertices(), 7);
        assert!(r.validate_conformity().is_ok());
        assert!((r.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn short_edge_split_escalates_to_blue() {
        // Triangle 1 = (0, 2, 3) gets edge (0, 2) bisected, which is not its
        // longest edge, so the longest edge (2, 3) is added.
        let m = closed_mesh(
            vec![p(0., 0.), p(1., -0.2), p(1., 0.2), p(-2., 3.), p(1.5, 0.0)],
            vec![[0, 1, 2], [0, 2, 3], [1, 4, 2]],
        );
        let split = closure(&m, &BTreeSet::from([(0, 2)]));
        assert!(split.contains(&(2, 3)));
        let r = rgb_refine(&m, &[0]);
        assert!(r.validate_conformity().is_ok(), "{}", r.validate_conformity());
    }

    #[test]
    fn uniform_refinement_quadruples() {
        let m = structured_square(2);
        let all: BTreeSet<Edge> = m.edges();
        assert_eq!(closure(&m, &all), all);
        let r = uniform_refine(&m);
        assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        assert_eq!(r.num_vertices(), m.num_vertices() + all.len());
        assert!(r.validate_conformity().is_ok());
    }

    #[test]
    fn interior_mark_stops_at_green_neighbors() {
        let m = structured_square(6);
        let t = m.locate_point(p(0.55, 0.52)).unwrap();
        let r = rgb_refine(&m, &[t]);
        assert!(r.validate_conformity().is_ok());
        // Far-away triangles are untouched.
        let untouched = m.triangles.iter().filter(|tri| r.triangles.contains(tri)).count();
        assert!(untouched > m.num_triangles() / 2);
    }

    #[test]
    fn constrained_edges_are_split() {
        let m = structured_square(2);
        let domain = crate::domain::PolygonDomain::new(vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)]);
        let r = uniform_refine(&m);
        assert_eq!(r.constrained.len(), 2 * m.constrained.len());
        assert!(r.constrained_chains_cover(&domain).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn refinement_invariants(seed in 0u64..10_000, n in 2usize..6, fraction in 0.0..1.0f64) {
            let m = jittered_square(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let marked: Vec<usize> = (0..m.num_triangles()).filter(|_| rng.gen_bool(fraction.max(0.05))).collect();
            prop_assume!(!marked.is_empty());
            let r = rgb_refine(&m, &marked);
            let report = r.validate_conformity();
            prop_assert!(report.is_ok(), "{}", report);
            prop_assert!(r.num_vertices() > m.num_vertices());
            prop_assert!(r.num_triangles() > m.num_triangles());
            prop_assert!((r.total_area() - m.total_area()).abs() <= 1e-12 * m.total_area());
            prop_assert!(min_angle(&r) >= 0.49 * min_angle(&m));
            let seeds: BTreeSet<Edge> = marked.iter().flat_map(|&t| (0..3).map(move |i| (t, i))).map(|(t, i)| m.edge(t, i)).collect();
            let once = closure(&m, &seeds);
            prop_assert_eq!(closure(&m, &once), once);
        }

        #[test]
        fn children_partition_each_parent(seed in 0u64..10_000) {
            let m = jittered_square(3, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let marked: Vec<usize> = (0..m.num_triangles()).filter(|_| rng.gen_bool(0.3)).collect();
            prop_assume!(!marked.is_empty());
            let r = rgb_refine(&m, &marked);
            for t in 0..m.num_triangles() {
                let [a, b, c] = m.corners(t);
                let parent = tri_metrics(a, b, c).unwrap().area;
                let inside = |q: Point2| {
                    use crate::geometry::{orient2d, Sign};
                    orient2d(a, b, q) == Sign::Positive && orient2d(b, c, q) == Sign::Positive && orient2d(c, a, q) == Sign::Positive
                };
                let children: f64 = (0..r.num_triangles())
                    .filter(|&u| {
                        let [x, y, z] = r.corners(u);
                        inside((x + y + z) * (1.0 / 3.0))
                    })
                    .map(|u| {
                        let [x, y, z] = r.corners(u);
                        tri_metrics(x, y, z).unwrap().area
                    })
                    .sum();
                prop_assert!((children - parent).abs() <= 1e-12 * parent);
            }
        }
    }
}
