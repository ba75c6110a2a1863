//! Piecewise-linear finite elements for `-Δu = f` with `u = 0` on the
//! boundary, and the residual error indicator that drives refinement.

use serde::{Deserialize, Serialize};

use crate::error::FemError;
use crate::geometry::{signed_area, Point2};
use crate::mesh::TriMesh;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from triplets, summing duplicates in input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps the per-entry summation order equal to the input order.
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (row, o) in out.iter_mut().enumerate() {
            let range = self.row_ptr[row]..self.row_ptr[row + 1];
            *o = self.col_idx[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Entries `(row, col, value)` in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }
}

/// The discrete system over the interior (free) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Unknown index of each mesh vertex, `None` for boundary vertices.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub vertex_of_dof: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    /// One value per mesh vertex; exactly zero on the boundary.
    pub nodal_values: Vec<f64>,
    pub solver_iterations: usize,
    /// Relative residual `|b - Ax| / |b|` of the returned solution.
    pub residual_norm: f64,
}

impl FemSolution {
    pub fn max_value(&self) -> f64 {
        self.nodal_values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorField {
    pub eta: Vec<f64>,
    pub eta_max: f64,
}

/// Element residual term of the indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorVariant {
    /// `h_T^2 (f A_T)^2`.
    #[default]
    Paper,
    /// `h_T^2 f^2 A_T`, i.e. `h_T^2 |f|^2_{L2(T)}`.
    Classical,
}

/// Gradients of the three hat functions times twice the area.
fn scaled_gradients(p: [Point2; 3]) -> [Point2; 3] {
    std::array::from_fn(|i| {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        Point2::new(a.y - b.y, b.x - a.x)
    })
}

/// Assembles the stiffness matrix and load vector for a constant source,
/// eliminating the boundary vertices.
pub fn assemble(mesh: &TriMesh, source: f64) -> Result<SparseSystem, FemError> {
    let mut dof_of_vertex = vec![None; mesh.num_vertices()];
    let mut vertex_of_dof = Vec::new();
    for v in 0..mesh.num_vertices() {
        if !mesh.boundary_vertex[v] {
            dof_of_vertex[v] = Some(vertex_of_dof.len());
            vertex_of_dof.push(v);
        }
    }
    if vertex_of_dof.is_empty() {
        return Err(FemError::EmptySystem);
    }
    let n = vertex_of_dof.len();
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    let mut rhs = vec![0.0; n];
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles[t];
        let corners = mesh.corners(t);
        let area = signed_area(corners[0], corners[1], corners[2]);
        let g = scaled_gradients(corners);
        for i in 0..3 {
            let Some(row) = dof_of_vertex[tri[i]] else { continue };
            rhs[row] += source * area / 3.0;
            for j in 0..3 {
                if let Some(col) = dof_of_vertex[tri[j]] {
                    triplets.push((row, col, g[i].dot(g[j]) / (4.0 * area)));
                }
            }
        }
    }
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(n, triplets),
        rhs,
        dof_of_vertex,
        vertex_of_dof,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients to a relative residual of `tol`.
pub fn solve(system: &SparseSystem, tol: f64, max_iter: usize) -> Result<FemSolution, FemError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.n;
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    let scatter = |x: &[f64]| {
        let mut nodal = vec![0.0; system.dof_of_vertex.len()];
        for (dof, &v) in system.vertex_of_dof.iter().enumerate() {
            nodal[v] = x[dof];
        }
        nodal
    };
    if b_norm == 0.0 {
        return Ok(FemSolution {
            nodal_values: scatter(&x),
            solver_iterations: 0,
            residual_norm: 0.0,
        });
    }

    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut residual = 1.0;
    while iterations < max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        residual = norm(&r) / b_norm;
        if residual <= tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    // Report the true residual rather than the recurrence.
    let mut ax = vec![0.0; n];
    a.mul_vec(&x, &mut ax);
    let true_residual = b.iter().zip(&ax).map(|(b, ax)| (b - ax).powi(2)).sum::<f64>().sqrt() / b_norm;
    if residual > tol || true_residual > tol {
        return Err(FemError::NonConvergence {
            iterations,
            residual: true_residual.max(residual),
        });
    }
    Ok(FemSolution {
        nodal_values: scatter(&x),
        solver_iterations: iterations,
        residual_norm: true_residual,
    })
}

/// Constant gradient of the piecewise-linear field on triangle `t`.
pub fn gradient(mesh: &TriMesh, values: &[f64], t: usize) -> Point2 {
    let corners = mesh.corners(t);
    let area = signed_area(corners[0], corners[1], corners[2]);
    let g = scaled_gradients(corners);
    let tri = mesh.triangles[t];
    let sum = (0..3).fold(Point2::default(), |acc, i| acc + g[i] * values[tri[i]]);
    sum * (0.5 / area)
}

/// Per-triangle residual indicator
/// `sqrt(element + 1/2 h_T sum_e |e| [grad u . n]^2)` over interior edges.
pub fn estimate(
    mesh: &TriMesh,
    solution: &FemSolution,
    source: f64,
    variant: EstimatorVariant,
) -> Result<ErrorField, FemError> {
    let values = &solution.nodal_values;
    if values.len() != mesh.num_vertices() {
        return Err(FemError::SizeMismatch {
            expected: mesh.num_vertices(),
            got: values.len(),
        });
    }
    let gradients: Vec<Point2> = (0..mesh.num_triangles())
        .map(|t| gradient(mesh, values, t))
        .collect();
    let eta: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| {
            let p = mesh.corners(t);
            let area = signed_area(p[0], p[1], p[2]);
            let h = (0..3)
                .map(|i| p[i].distance(p[(i + 1) % 3]))
                .fold(0.0, f64::max);
            let element = match variant {
                EstimatorVariant::Paper => (h * source * area).powi(2),
                EstimatorVariant::Classical => h * h * source * source * area,
            };
            let jumps: f64 = (0..3)
                .filter_map(|i| {
                    let other = mesh.neighbors[t][i]?;
                    let edge = p[(i + 2) % 3] - p[(i + 1) % 3];
                    let len = edge.norm();
                    let normal = Point2::new(edge.y, -edge.x) * (1.0 / len);
                    let jump = (gradients[t] - gradients[other]).dot(normal);
                    Some(len * jump * jump)
                })
                .sum();
            (element + 0.5 * h * jumps).sqrt()
        })
        .collect();
    let eta_max = eta.iter().copied().fold(0.0, f64::max);
    Ok(ErrorField { eta, eta_max })
}

/// Triangles whose indicator strictly exceeds `theta` times the maximum.
pub fn mark(errors: &ErrorField, theta: f64) -> Result<Vec<usize>, FemError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(FemError::InvalidTheta(theta));
    }
    let threshold = theta * errors.eta_max;
    Ok(errors
        .eta
        .iter()
        .enumerate()
        .filter(|&(_, &e)| e > threshold)
        .map(|(t, _)| t)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::{criss_cross_square, p, structured_square};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Series solution of `-Δu = 1` on the unit square at its center.
    fn square_center_series() -> f64 {
        let pi4 = std::f64::consts::PI.powi(4);
        let mut sum = 0.0;
        for m in (1..2000).step_by(2) {
            for n in (1..2000).step_by(2) {
                let sign = if ((m - 1) / 2 + (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let (m, n) = (m as f64, n as f64);
                sum += sign * 16.0 / (pi4 * m * n * (m * m + n * n));
            }
        }
        sum
    }

    #[test]
    fn series_oracle_value() {
        assert!((square_center_series() - 0.0736714).abs() < 1e-7);
    }

    #[test]
    fn criss_cross_patch() {
        let m = criss_cross_square(p(0.5, 0.5));
        let sys = assemble(&m, 1.0).unwrap();
        assert_eq!(sys.matrix.n, 1);
        assert!((sys.matrix.get(0, 0) - 4.0).abs() < 1e-15);
        assert!((sys.rhs[0] - 1.0 / 3.0).abs() < 1e-15);
        let sol = solve(&sys, 1e-10, 20).unwrap();
        assert!((sol.nodal_values[4] - 1.0 / 12.0).abs() < 1e-12);
        assert_eq!(&sol.nodal_values[..4], &[0.0; 4]);
    }

    #[test]
    fn criss_cross_indicator() {
        let m = criss_cross_square(p(0.5, 0.5));
        let sol = solve(&assemble(&m, 1.0).unwrap(), 1e-12, 20).unwrap();
        let field = estimate(&m, &sol, 1.0, EstimatorVariant::Paper).unwrap();
        // Gradients (0, 1/6) and (-1/6, 0) jump by (1/3)/sqrt(2) across
        // diagonals of length sqrt(2)/2; h = 1 and A = 1/4.
        let expected = (1.0 / 16.0 + 2f64.sqrt() / 36.0).sqrt();
        for &e in &field.eta {
            assert!((e - expected).abs() < 1e-12, "{e} vs {expected}");
        }
        assert_eq!(field.eta_max, field.eta[0]);
    }

    #[test]
    fn zero_source() {
        let m = structured_square(4);
        let sys = assemble(&m, 0.0).unwrap();
        assert!(sys.rhs.iter().all(|&b| b == 0.0));
        let sol = solve(&sys, 1e-10, 100).unwrap();
        assert_eq!(sol.solver_iterations, 0);
        assert!(sol.nodal_values.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn no_interior_vertices() {
        let m = crate::mesh::tests::two_triangle_square();
        assert_eq!(assemble(&m, 1.0).unwrap_err(), FemError::EmptySystem);
    }

    #[test]
    fn matrix_is_exactly_symmetric_with_positive_diagonal() {
        let m = structured_square(6);
        let sys = assemble(&m, 1.0).unwrap();
        for (r, c, v) in sys.matrix.entries() {
            assert_eq!(v, sys.matrix.get(c, r));
        }
        assert!(sys.matrix.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn matrix_is_positive_definite() {
        let mut m = structured_square(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for v in 0..m.num_vertices() {
            if !m.boundary_vertex[v] {
                m.vertices[v] = m.vertices[v] + p(rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03));
            }
        }
        let sys = assemble(&m, 1.0).unwrap();
        let mut kx = vec![0.0; sys.matrix.n];
        for _ in 0..100 {
            let x: Vec<f64> = (0..sys.matrix.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            sys.matrix.mul_vec(&x, &mut kx);
            assert!(dot(&x, &kx) > 0.0);
        }
    }

    #[test]
    fn linear_field_has_no_jumps() {
        let m = structured_square(4);
        let values: Vec<f64> = m.vertices.iter().map(|v| 2.0 * v.x - 0.5 * v.y + 1.0).collect();
        let sol = FemSolution {
            nodal_values: values,
            solver_iterations: 0,
            residual_norm: 0.0,
        };
        let field = estimate(&m, &sol, 0.0, EstimatorVariant::Paper).unwrap();
        assert!(field.eta.iter().all(|&e| e < 1e-13));
    }

    #[test]
    fn indicator_is_symmetric_on_symmetric_mesh() {
        // Criss-cross cells are invariant under the square's symmetry group.
        let n = 4;
        let h = 1.0 / n as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices: Vec<Point2> = (0..=n)
            .flat_map(|j| (0..=n).map(move |i| p(i as f64 * h, j as f64 * h)))
            .collect();
        let mut triangles = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let c = vertices.len();
                vertices.push(p((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
                let [a, b, d, e] = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
                triangles.extend([[a, b, c], [b, d, c], [d, e, c], [e, a, c]]);
            }
        }
        let m = crate::mesh::tests::closed_mesh(vertices, triangles);
        let sol = solve(&assemble(&m, 1.0).unwrap(), 1e-13, 1000).unwrap();
        let field = estimate(&m, &sol, 1.0, EstimatorVariant::Paper).unwrap();
        let centroid = |t: usize| {
            let [a, b, c] = m.corners(t);
            (a + b + c) * (1.0 / 3.0)
        };
        let maps: [fn(Point2) -> Point2; 3] = [
            |q| p(1.0 - q.x, q.y),
            |q| p(q.y, q.x),
            |q| p(1.0 - q.y, 1.0 - q.x),
        ];
        for t in 0..m.num_triangles() {
            for map in maps {
                let image = m.locate_point(map(centroid(t))).unwrap();
                assert!((field.eta[t] - field.eta[image]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indicator_bounded_below_by_element_term() {
        let m = structured_square(8);
        let sol = solve(&assemble(&m, 1.0).unwrap(), 1e-10, 1000).unwrap();
        let field = estimate(&m, &sol, 1.0, EstimatorVariant::Paper).unwrap();
        for t in 0..m.num_triangles() {
            let metrics = {
                let [a, b, c] = m.corners(t);
                crate::geometry::tri_metrics(a, b, c).unwrap()
            };
            assert!(field.eta[t] >= metrics.longest_edge * metrics.area);
        }
    }

    #[test]
    fn converges_to_series_value() {
        let target = square_center_series();
        let mut last = f64::INFINITY;
        for n in [4, 8, 16, 32, 64] {
            let m = structured_square(n);
            let sys = assemble(&m, 1.0).unwrap();
            let sol = solve(&sys, 1e-10, 20 * sys.matrix.n).unwrap();
            assert!(sol.residual_norm <= 1e-10);
            let err = (sol.max_value() - target).abs();
            assert!(err < last, "n = {n}: {err} >= {last}");
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = structured_square(8);
        let sys = assemble(&m, 1.0).unwrap();
        assert!(matches!(solve(&sys, 1e-10, 2), Err(FemError::NonConvergence { iterations: 2, .. })));
    }

    #[test]
    fn marking_examples() {
        let field = |eta: Vec<f64>| ErrorField {
            eta_max: eta.iter().copied().fold(0.0, f64::max),
            eta,
        };
        assert_eq!(mark(&field(vec![2.0; 3]), 0.5).unwrap(), vec![0, 1, 2]);
        assert_eq!(mark(&field(vec![1.0, 0.4, 0.6]), 0.5).unwrap(), vec![0, 2]);
        assert!(mark(&field(vec![0.0; 3]), 0.5).unwrap().is_empty());
        assert_eq!(mark(&field(vec![1.0]), 1.0), Err(FemError::InvalidTheta(1.0)));
        assert_eq!(mark(&field(vec![1.0]), 0.0), Err(FemError::InvalidTheta(0.0)));
    }

    proptest! {
        #[test]
        fn marking_is_the_strict_threshold_set(
            eta in proptest::collection::vec(0.0..10.0f64, 1..60),
            theta in 0.01..0.99f64,
        ) {
            let eta_max = eta.iter().copied().fold(0.0, f64::max);
            let field = ErrorField { eta: eta.clone(), eta_max };
            let marked = mark(&field, theta).unwrap();
            let expected: Vec<usize> = (0..eta.len()).filter(|&t| eta[t] > theta * eta_max).collect();
            prop_assert_eq!(&marked, &expected);
            if eta_max > 0.0 {
                prop_assert!(!marked.is_empty());
            }
        }
    }
}
