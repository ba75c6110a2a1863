//! Mesh writers and the SVG renderer.

use std::fmt::Write as _;

use adaptmesh::{MeshError, Point2, TriMesh};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Msh2,
    Json,
}

impl MeshFormat {
    /// JSON for `.json` paths, MSH 2.2 otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Msh2,
        }
    }
}

pub fn write_mesh(mesh: &TriMesh, format: MeshFormat) -> String {
    match format {
        MeshFormat::Msh2 => write_msh2(mesh),
        MeshFormat::Json => write_json(mesh),
    }
}

/// Gmsh 2.2 ASCII: 1-based nodes, one line element per constrained edge
/// (physical tag 1) followed by the triangles (physical tag 2).
pub fn write_msh2(mesh: &TriMesh) -> String {
    let mut out = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    writeln!(out, "{}", mesh.num_vertices()).unwrap();
    for (i, v) in mesh.vertices.iter().enumerate() {
        writeln!(out, "{} {} {} 0", i + 1, v.x, v.y).unwrap();
    }
    out.push_str("$EndNodes\n$Elements\n");
    writeln!(out, "{}", mesh.constrained.len() + mesh.num_triangles()).unwrap();
    let mut id = 0;
    for &(a, b) in &mesh.constrained {
        id += 1;
        writeln!(out, "{id} 1 2 1 1 {} {}", a + 1, b + 1).unwrap();
    }
    for t in &mesh.triangles {
        id += 1;
        writeln!(out, "{id} 2 2 2 2 {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out.push_str("$EndElements\n");
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    constrained: Vec<[usize; 2]>,
}

fn json_rows<T: Serialize>(out: &mut String, key: &str, rows: &[T], last: bool) {
    write!(out, "  \"{key}\": [").unwrap();
    for (i, row) in rows.iter().enumerate() {
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        out.push_str(&serde_json::to_string(row).expect("plain arrays serialize"));
    }
    out.push_str(if rows.is_empty() { "]" } else { "\n  ]" });
    out.push_str(if last { "\n" } else { ",\n" });
}

/// `{"vertices": [[x, y], ...], "triangles": [[a, b, c], ...],
/// "constrained": [[a, b], ...]}` with 0-based indices, one entry per line.
pub fn write_json(mesh: &TriMesh) -> String {
    let vertices: Vec<[f64; 2]> = mesh.vertices.iter().map(|&v| v.into()).collect();
    let constrained: Vec<[usize; 2]> = mesh.constrained.iter().map(|&(a, b)| [a, b]).collect();
    let mut out = String::from("{\n");
    json_rows(&mut out, "vertices", &vertices, false);
    json_rows(&mut out, "triangles", &mesh.triangles, false);
    json_rows(&mut out, "constrained", &constrained, true);
    out.push_str("}\n");
    out
}

#[derive(Debug, thiserror::Error)]
pub enum MeshReadError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub fn parse_json_mesh(text: &str) -> Result<TriMesh, MeshReadError> {
    let file: MeshFile = serde_json::from_str(text)?;
    let vertices = file.vertices.into_iter().map(Point2::from).collect();
    let constrained = file
        .constrained
        .into_iter()
        .map(|[a, b]| (a.min(b), a.max(b)))
        .collect();
    Ok(TriMesh::new(vertices, file.triangles, constrained)?)
}

/// Per-triangle fill of an SVG rendering.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ColorBy {
    #[default]
    None,
    /// Triangle quality on the fixed range [0, 1].
    Quality,
    /// One value per triangle, mapped over its own range.
    Scalar(Vec<f64>),
}

const LOW: [f64; 3] = [59.0, 76.0, 192.0];
const HIGH: [f64; 3] = [180.0, 4.0, 38.0];

fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = (0..3)
        .map(|i| (LOW[i] + t * (HIGH[i] - LOW[i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Standalone SVG with one `polygon` per triangle. The view box is the
/// bounding box padded by 2% and the y axis points up.
pub fn render_svg(mesh: &TriMesh, color: &ColorBy) -> String {
    let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for v in &mesh.vertices {
        lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    if mesh.vertices.is_empty() {
        lo = Point2::new(0.0, 0.0);
        hi = Point2::new(1.0, 1.0);
    }
    let size = (hi - lo).x.max((hi - lo).y).max(f64::MIN_POSITIVE);
    let pad = 0.02 * size;
    let (width, height) = ((hi.x - lo.x) + 2.0 * pad, (hi.y - lo.y) + 2.0 * pad);

    let fills: Vec<String> = match color {
        ColorBy::None => vec!["none".into(); mesh.num_triangles()],
        ColorBy::Quality => mesh.qualities().into_iter().map(ramp).collect(),
        ColorBy::Scalar(values) => {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = max - min;
            values
                .iter()
                .map(|&v| ramp(if span > 0.0 { (v - min) / span } else { 0.0 }))
                .collect()
        }
    };

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"800\" height=\"{}\">",
        lo.x - pad,
        -hi.y - pad,
        width,
        height,
        (800.0 * height / width).round()
    )
    .unwrap();
    out.push_str("<g stroke=\"#202020\" stroke-width=\"0.6\" stroke-linejoin=\"round\" vector-effect=\"non-scaling-stroke\">\n");
    for (t, fill) in fills.iter().enumerate() {
        let [a, b, c] = mesh.corners(t);
        writeln!(
            out,
            "<polygon points=\"{},{} {},{} {},{}\" fill=\"{fill}\" vector-effect=\"non-scaling-stroke\"/>",
            a.x, -a.y, b.x, -b.y, c.x, -c.y
        )
        .unwrap();
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn two_triangle_square() -> TriMesh {
        TriMesh::new(
            vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)],
            vec![[0, 1, 2], [0, 2, 3]],
            BTreeSet::from([(0, 1), (1, 2), (2, 3), (0, 3)]),
        )
        .unwrap()
    }

    #[test]
    fn msh2_counts() {
        let text = write_msh2(&two_triangle_square());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "2.2 0 8");
        assert_eq!(lines[4], "4");
        let elements: Vec<&&str> = lines.iter().skip_while(|l| **l != "$Elements").skip(2).take_while(|l| **l != "$EndElements").collect();
        assert_eq!(elements.iter().filter(|l| l.split(' ').nth(1) == Some("1")).count(), 4);
        assert_eq!(elements.iter().filter(|l| l.split(' ').nth(1) == Some("2")).count(), 2);
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let mut m = two_triangle_square();
        m.vertices.push(p(0.1 + 0.2, 1.0 / 3.0));
        m = TriMesh::new(m.vertices, vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]], m.constrained).unwrap();
        let back = parse_json_mesh(&write_json(&m)).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.constrained, m.constrained);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!((a.x.to_bits(), a.y.to_bits()), (b.x.to_bits(), b.y.to_bits()));
        }
        assert_eq!(write_json(&back), write_json(&m));
    }

    #[test]
    fn single_triangle_svg() {
        let m = TriMesh::new(vec![p(0., 0.), p(1., 0.), p(0., 1.)], vec![[0, 1, 2]], BTreeSet::new()).unwrap();
        let svg = render_svg(&m, &ColorBy::None);
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("viewBox=\"-0.02 -1.02 1.04 1.04\""));
    }

    #[test]
    fn equilateral_quality_fill_is_uniform() {
        let s = 3f64.sqrt() / 2.0;
        let vertices = vec![p(0., 0.), p(1., 0.), p(0.5, s), p(1.5, s)];
        let m = TriMesh::new(vertices, vec![[0, 1, 2], [1, 3, 2]], BTreeSet::new()).unwrap();
        let svg = render_svg(&m, &ColorBy::Quality);
        let fills: BTreeSet<&str> = svg.match_indices("fill=\"").map(|(i, _)| &svg[i + 6..i + 13]).collect();
        assert_eq!(fills.len(), 1);
        assert_eq!(fills.into_iter().next(), Some(ramp(1.0).as_str()));
    }
}
