//! Small planar geometry helpers shared by alignment, triangulation and warping.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A 2-D point in pixel space: origin top-left, x rightward, y downward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Weighted combination `wa·self + wb·other`, evaluated as a commutative sum.
    pub fn blend(self, wa: f64, other: Point, wb: f64) -> Point {
        Point::new(wa * self.x + wb * other.x, wa * self.y + wb * other.y)
    }

    pub(crate) fn coord(self) -> robust::Coord<f64> {
        robust::Coord { x: self.x, y: self.y }
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Exact orientation test; positive when `a, b, c` wind counter-clockwise
/// in the standard (x right, y up) sense.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(a.coord(), b.coord(), c.coord())
}

/// Exact in-circle test; positive when `d` lies strictly inside the circle
/// through the counter-clockwise triangle `a, b, c`.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(a.coord(), b.coord(), c.coord(), d.coord())
}

/// Affine map `p ↦ (a·x + b·y + c, d·x + e·y + f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub m: [f64; 6],
}

impl Affine {
    pub fn apply(&self, p: Point) -> Point {
        let [a, b, c, d, e, f] = self.m;
        Point::new(a * p.x + b * p.y + c, d * p.x + e * p.y + f)
    }

    /// The unique affine map sending triangle `from` onto triangle `to`,
    /// or `None` when `from` is degenerate (area below `min_area`).
    pub fn from_triangles(from: [Point; 3], to: [Point; 3], min_area: f64) -> Option<Affine> {
        let [p0, p1, p2] = from;
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let det = e1.x * e2.y - e1.y * e2.x;
        if det.is_nan() || det.abs() * 0.5 < min_area {
            return None;
        }
        let inv = 1.0 / det;
        // inverse of [[e1.x, e2.x], [e1.y, e2.y]]
        let (i00, i01, i10, i11) = (e2.y * inv, -e2.x * inv, -e1.y * inv, e1.x * inv);
        let [q0, q1, q2] = to;
        let f1 = q1 - q0;
        let f2 = q2 - q0;
        let a = f1.x * i00 + f2.x * i10;
        let b = f1.x * i01 + f2.x * i11;
        let d = f1.y * i00 + f2.y * i10;
        let e = f1.y * i01 + f2.y * i11;
        let c = q0.x - a * p0.x - b * p0.y;
        let f = q0.y - d * p0.x - e * p0.y;
        Some(Affine { m: [a, b, c, d, e, f] })
    }
}

/// Signed area of a triangle (positive for counter-clockwise winding).
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}
