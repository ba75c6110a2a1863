//! Exact geometric predicates and per-triangle metrics.
//!
//! Sign decisions (`orient2d`, `in_circumcircle`) are delegated to adaptive
//! precision arithmetic so they are correct for every finite input. Metric
//! computations are ordinary floating point.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Exact coordinate midpoint (up to a single rounding per coordinate).
    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    fn coord(self) -> robust::Coord<f64> {
        robust::Coord {
            x: self.x,
            y: self.y,
        }
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(p: [f64; 2]) -> Self {
        Point2::new(p[0], p[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Sign of an exact geometric determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(value: f64) -> Sign {
        if value > 0.0 {
            Sign::Positive
        } else if value < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn reversed(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

/// Orientation of the triple `(a, b, c)`: `Positive` for counter-clockwise.
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> Sign {
    Sign::of(robust::orient2d(a.coord(), b.coord(), c.coord()))
}

/// `Positive` iff `d` is strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`.
pub fn in_circumcircle(a: Point2, b: Point2, c: Point2, d: Point2) -> Sign {
    Sign::of(robust::incircle(a.coord(), b.coord(), c.coord(), d.coord()))
}

/// Shape measures of a single triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriMetrics {
    pub area: f64,
    pub longest_edge: f64,
    pub inradius: f64,
    pub circumradius: f64,
    /// `2 * inradius / circumradius`; 1 for equilateral triangles.
    pub quality: f64,
    /// Smallest interior angle in radians.
    pub min_angle: f64,
}

/// Interior angle at `apex` between the rays to `p` and `q`.
pub fn angle_at(apex: Point2, p: Point2, q: Point2) -> f64 {
    let u = p - apex;
    let v = q - apex;
    u.cross(v).abs().atan2(u.dot(v))
}

/// Signed area in plain floating point (no exactness guarantee).
pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

pub fn tri_metrics(a: Point2, b: Point2, c: Point2) -> Result<TriMetrics, GeometryError> {
    if orient2d(a, b, c) == Sign::Zero {
        return Err(GeometryError::Degenerate);
    }
    let area = signed_area(a, b, c).abs();
    let lab = a.distance(b);
    let lbc = b.distance(c);
    let lca = c.distance(a);
    let semi = 0.5 * (lab + lbc + lca);
    let inradius = area / semi;
    let circumradius = lab * lbc * lca / (4.0 * area);
    let quality = (2.0 * inradius / circumradius).min(1.0);
    let min_angle = angle_at(a, b, c)
        .min(angle_at(b, c, a))
        .min(angle_at(c, a, b))
        .min(PI / 3.0);
    Ok(TriMetrics {
        area,
        longest_edge: lab.max(lbc).max(lca),
        inradius,
        circumradius,
        quality,
        min_angle,
    })
}

/// Quality for reporting: degenerate triangles count as 0.
pub fn quality_or_zero(a: Point2, b: Point2, c: Point2) -> f64 {
    tri_metrics(a, b, c).map(|m| m.quality).unwrap_or(0.0)
}

/// Signed shoelace area, positive for counter-clockwise loops.
pub fn polygon_area(points: &[Point2]) -> Result<f64, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    let n = points.len();
    let twice: f64 = (0..n)
        .map(|i| points[i].cross(points[(i + 1) % n]))
        .sum();
    Ok(0.5 * twice)
}

/// Whether `p` lies strictly between `a` and `b` on their common line
/// (collinearity is assumed to have been checked by the caller).
pub(crate) fn strictly_between(a: Point2, b: Point2, p: Point2) -> bool {
    let within = |lo: f64, hi: f64, v: f64| {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        lo < v && v < hi
    };
    if a.x != b.x {
        within(a.x, b.x, p.x)
    } else {
        within(a.y, b.y, p.y)
    }
}

/// Closed-segment intersection test that ignores shared endpoints.
///
/// Segments sharing one endpoint only intersect if they overlap beyond it.
pub fn segments_intersect(
    p1: Point2,
    p2: Point2,
    q1: Point2,
    q2: Point2,
) -> Result<bool, GeometryError> {
    if p1 == p2 || q1 == q2 {
        return Err(GeometryError::ZeroLengthSegment);
    }
    let shared = [(p1, p2, q1, q2), (p1, p2, q2, q1), (p2, p1, q1, q2), (p2, p1, q2, q1)];
    let shared_count = shared.iter().filter(|(s, _, t, _)| s == t).count();
    if shared_count >= 2 {
        // Identical segments.
        return Ok(true);
    }
    for &(s, p_other, t, q_other) in &shared {
        if s == t {
            // Only a collinear fold-back can add a second common point.
            return Ok(orient2d(s, p_other, q_other) == Sign::Zero
                && (p_other - s).dot(q_other - s) > 0.0);
        }
    }

    let o1 = orient2d(p1, p2, q1);
    let o2 = orient2d(p1, p2, q2);
    let o3 = orient2d(q1, q2, p1);
    let o4 = orient2d(q1, q2, p2);
    if o1 != Sign::Zero && o2 != Sign::Zero && o3 != Sign::Zero && o4 != Sign::Zero {
        return Ok(o1 != o2 && o3 != o4);
    }
    let on_segment = |a: Point2, b: Point2, p: Point2| strictly_between(a, b, p) || p == a || p == b;
    Ok((o1 == Sign::Zero && on_segment(p1, p2, q1))
        || (o2 == Sign::Zero && on_segment(p1, p2, q2))
        || (o3 == Sign::Zero && on_segment(q1, q2, p1))
        || (o4 == Sign::Zero && on_segment(q1, q2, p2)))
}
