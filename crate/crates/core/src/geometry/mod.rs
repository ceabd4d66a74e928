//! Planar primitives shared by every other module: points, simple polygons,
//! natural cubic splines, homographies and rasterized overlap.

mod homography;
mod raster;
mod spline;

pub use homography::{perspective_from_left_edge, Homography};
pub use raster::{rasterized_overlap, Overlap, DEFAULT_RESOLUTION};
pub(crate) use raster::rasterize_indicator;
pub use spline::{resample_by_arc_length, smooth_boundary, smooth_side, SplineCurve};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Areas below this are treated as degenerate.
pub const MIN_AREA: f64 = 1e-12;

/// A point in the plane. Serialized as a two-element `[x, y]` array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(&self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(&self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn lerp(&self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Winding direction in a y-up frame. In image (y-down) coordinates the
/// visual sense is mirrored; the sign of the shoelace sum is what is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Clockwise,
    CounterClockwise,
}

/// A simple closed polygon given by its ordered vertices (implicitly closed).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    points: Vec<Point>,
    orientation: Orientation,
}

impl Polygon {
    /// Validates the vertex list: at least three finite points and no
    /// consecutive duplicates (the closing pair last→first included).
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateShape(format!(
                "polygon needs at least 3 vertices, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::DegenerateShape(format!("vertex {i} is not finite")));
        }
        let n = points.len();
        for i in 0..n {
            if points[i] == points[(i + 1) % n] {
                return Err(Error::DegenerateShape(format!(
                    "consecutive duplicate vertex at index {}",
                    (i + 1) % n
                )));
            }
        }
        let orientation = if signed_area(&points) >= 0.0 {
            Orientation::CounterClockwise
        } else {
            Orientation::Clockwise
        };
        Ok(Self { points, orientation })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    /// Iterator over closed edges `(p_i, p_{i+1})`.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    /// `(min, max)` corners of the axis-aligned bounding box.
    pub fn bounds(&self) -> (Point, Point) {
        bounds(&self.points)
    }

    /// Even-odd containment with points on an edge counted inside.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if point_segment_distance(p, a, b) == 0.0 {
                return true;
            }
            // half-open in y: an edge covers [min_y, max_y)
            if (a.y <= p.y) != (b.y <= p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Minimum distance from `p` to the closed boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<Polygon> {
        Polygon::new(self.points.iter().map(|&p| f(p)).collect())
    }

    /// Total length of the closed boundary.
    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }
}

/// Shoelace area, positive for counter-clockwise (y-up) order.
pub fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += points[i].cross(points[(i + 1) % n]);
    }
    0.5 * acc
}

/// Absolute shoelace area. Fails for areas below [`MIN_AREA`].
pub fn polygon_area(p: &Polygon) -> Result<f64> {
    let a = p.signed_area().abs();
    if a < MIN_AREA {
        return Err(Error::DegenerateShape(format!("polygon area {a:e} is zero")));
    }
    Ok(a)
}

pub fn bounds(points: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Length of an open polyline.
pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Minimum distance from `p` to an open polyline.
pub fn polyline_distance(p: Point, points: &[Point]) -> f64 {
    if points.len() == 1 {
        return p.dist(points[0]);
    }
    points
        .windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}
