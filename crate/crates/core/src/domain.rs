//! Input polygons and their validation.

use std::fmt;

use crate::geometry::{orient2d, polygon_area, segments_intersect, strictly_between, Point2, Sign};

/// An outer corner-point loop with optional hole loops.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolygonDomain {
    pub outer: Vec<Point2>,
    pub holes: Vec<Vec<Point2>>,
}

impl PolygonDomain {
    pub fn new(outer: Vec<Point2>) -> Self {
        Self {
            outer,
            holes: Vec::new(),
        }
    }

    pub fn with_hole(mut self, hole: Vec<Point2>) -> Self {
        self.holes.push(hole);
        self
    }

    /// All loops, outer first.
    pub fn loops(&self) -> impl Iterator<Item = &[Point2]> {
        std::iter::once(self.outer.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    /// Every boundary edge as a pair of corner points.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.loops()
            .flat_map(|l| (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()])))
    }

    /// Enclosed area: outer area minus the hole areas.
    pub fn area(&self) -> f64 {
        let area = |l: &[Point2]| polygon_area(l).map(f64::abs).unwrap_or(0.0);
        area(&self.outer) - self.holes.iter().map(|h| area(h)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoopId {
    Outer,
    Hole(usize),
}

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopId::Outer => write!(f, "outer loop"),
            LoopId::Hole(i) => write!(f, "hole {i}"),
        }
    }
}

/// A reason why a domain cannot be meshed.
#[derive(Debug, Clone, PartialEq)]
pub enum Defect {
    NonFinite { lp: LoopId, index: usize },
    TooFewPoints { lp: LoopId, count: usize },
    ZeroArea { lp: LoopId },
    DuplicatePoint { first: (LoopId, usize), second: (LoopId, usize) },
    /// Two edges of one loop intersect; edges are numbered by their first vertex.
    SelfIntersection { lp: LoopId, edges: (usize, usize) },
    /// Edges of two different loops intersect.
    LoopIntersection { first: (LoopId, usize), second: (LoopId, usize) },
    HoleNotInside { hole: usize },
    NestedHole { inner: usize, outer: usize },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::NonFinite { lp, index } => write!(f, "{lp}: point {index} is not finite"),
            Defect::TooFewPoints { lp, count } => {
                write!(f, "{lp}: needs at least 3 distinct points, got {count}")
            }
            Defect::ZeroArea { lp } => write!(f, "{lp}: zero area"),
            Defect::DuplicatePoint { first, second } => write!(
                f,
                "duplicate point: {} point {} equals {} point {}",
                first.0, first.1, second.0, second.1
            ),
            Defect::SelfIntersection { lp, edges } => write!(
                f,
                "{lp}: self-intersection between edges {} and {}",
                edges.0, edges.1
            ),
            Defect::LoopIntersection { first, second } => write!(
                f,
                "{} edge {} intersects {} edge {}",
                first.0, first.1, second.0, second.1
            ),
            Defect::HoleNotInside { hole } => write!(f, "hole {hole} is not inside the outer loop"),
            Defect::NestedHole { inner, outer } => write!(f, "hole {inner} lies inside hole {outer}"),
        }
    }
}

/// A domain that passed validation, with loops normalized to a
/// counter-clockwise outer loop and clockwise holes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidDomain {
    pub domain: PolygonDomain,
    /// Number of consecutive duplicate points that were merged.
    pub merged_duplicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

/// Exact point-in-polygon classification by winding number.
pub fn locate_in_loop(p: Point2, lp: &[Point2]) -> Location {
    let n = lp.len();
    let mut winding = 0i32;
    for i in 0..n {
        let (a, b) = (lp[i], lp[(i + 1) % n]);
        let side = orient2d(a, b, p);
        if side == Sign::Zero && (strictly_between(a, b, p) || p == a || p == b) {
            return Location::Boundary;
        }
        if a.y <= p.y {
            if b.y > p.y && side == Sign::Positive {
                winding += 1;
            }
        } else if b.y <= p.y && side == Sign::Negative {
            winding -= 1;
        }
    }
    if winding != 0 {
        Location::Inside
    } else {
        Location::Outside
    }
}

fn merge_consecutive_duplicates(lp: &[Point2]) -> (Vec<Point2>, usize) {
    let mut out: Vec<Point2> = Vec::with_capacity(lp.len());
    for &p in lp {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    let merged = lp.len() - out.len();
    (out, merged)
}

fn loop_edge(lp: &[Point2], i: usize) -> (Point2, Point2) {
    (lp[i], lp[(i + 1) % lp.len()])
}

fn self_intersections(lp: &[Point2], id: LoopId, defects: &mut Vec<Defect>) {
    let n = lp.len();
    for i in 0..n {
        let (a, b) = loop_edge(lp, i);
        for j in (i + 1)..n {
            let (c, d) = loop_edge(lp, j);
            if let Ok(true) = segments_intersect(a, b, c, d) {
                defects.push(Defect::SelfIntersection {
                    lp: id,
                    edges: (i, j),
                });
            }
        }
    }
}

fn cross_intersections(
    first: (&[Point2], LoopId),
    second: (&[Point2], LoopId),
    defects: &mut Vec<Defect>,
) -> bool {
    let mut any = false;
    for i in 0..first.0.len() {
        let (a, b) = loop_edge(first.0, i);
        for j in 0..second.0.len() {
            let (c, d) = loop_edge(second.0, j);
            // Loops share no vertices (duplicates are rejected earlier).
            if segments_intersect(a, b, c, d).unwrap_or(false) {
                defects.push(Defect::LoopIntersection {
                    first: (first.1, i),
                    second: (second.1, j),
                });
                any = true;
            }
        }
    }
    any
}

/// Check a domain for the defects that make it unmeshable and return its
/// normalized form.
pub fn validate_polygon(domain: &PolygonDomain) -> Result<ValidDomain, Vec<Defect>> {
    let mut defects = Vec::new();
    let mut merged_duplicates = 0;

    let ids = std::iter::once(LoopId::Outer).chain((0..domain.holes.len()).map(LoopId::Hole));
    let mut loops: Vec<(LoopId, Vec<Point2>)> = Vec::new();
    for (id, lp) in ids.zip(domain.loops()) {
        if let Some(index) = lp.iter().position(|p| !p.is_finite()) {
            defects.push(Defect::NonFinite { lp: id, index });
            continue;
        }
        let (lp, merged) = merge_consecutive_duplicates(lp);
        merged_duplicates += merged;
        if lp.len() < 3 {
            defects.push(Defect::TooFewPoints {
                lp: id,
                count: lp.len(),
            });
            continue;
        }
        loops.push((id, lp));
    }
    if !defects.is_empty() {
        return Err(defects);
    }

    // Duplicates anywhere, including across loops.
    let mut all: Vec<(Point2, LoopId, usize)> = loops
        .iter()
        .flat_map(|(id, lp)| lp.iter().enumerate().map(move |(i, &p)| (p, *id, i)))
        .collect();
    all.sort_by(|a, b| a.0.x.total_cmp(&b.0.x).then(a.0.y.total_cmp(&b.0.y)));
    for w in all.windows(2) {
        if w[0].0 == w[1].0 {
            defects.push(Defect::DuplicatePoint {
                first: (w[0].1, w[0].2),
                second: (w[1].1, w[1].2),
            });
        }
    }

    for (id, lp) in &loops {
        if polygon_area(lp).map(|a| a == 0.0).unwrap_or(true) {
            defects.push(Defect::ZeroArea { lp: *id });
        }
        self_intersections(lp, *id, &mut defects);
    }
    if !defects.is_empty() {
        return Err(defects);
    }

    let outer = &loops[0].1;
    let holes = &loops[1..];
    for (k, (id, hole)) in holes.iter().enumerate() {
        let crosses = cross_intersections((outer, LoopId::Outer), (hole, *id), &mut defects);
        if !crosses && locate_in_loop(hole[0], outer) != Location::Inside {
            defects.push(Defect::HoleNotInside { hole: k });
        }
    }
    for (i, (id_i, hi)) in holes.iter().enumerate() {
        for (j, (id_j, hj)) in holes.iter().enumerate().skip(i + 1) {
            if cross_intersections((hi, *id_i), (hj, *id_j), &mut defects) {
                continue;
            }
            if locate_in_loop(hi[0], hj) == Location::Inside {
                defects.push(Defect::NestedHole { inner: i, outer: j });
            } else if locate_in_loop(hj[0], hi) == Location::Inside {
                defects.push(Defect::NestedHole { inner: j, outer: i });
            }
        }
    }
    if !defects.is_empty() {
        return Err(defects);
    }

    let oriented = |lp: &[Point2], ccw: bool| {
        let mut lp = lp.to_vec();
        let positive = polygon_area(&lp).map(|a| a > 0.0).unwrap_or(true);
        if positive != ccw {
            lp.reverse();
        }
        lp
    };
    Ok(ValidDomain {
        domain: PolygonDomain {
            outer: oriented(outer, true),
            holes: holes.iter().map(|(_, h)| oriented(h, false)).collect(),
        },
        merged_duplicates,
    })
}
