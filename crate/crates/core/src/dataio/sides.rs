use serde::{Deserialize, Serialize};

use super::{Source, TextInstance};
use crate::error::{Error, Result};
use crate::geometry::{polyline_length, resample_by_arc_length, signed_area, Point, Polygon};
use crate::tps::Correspondences;

pub const DEFAULT_PER_SIDE: usize = 32;
/// Largest vertex count for which corner detection is exhaustive.
pub const EXHAUSTIVE_CORNER_LIMIT: usize = 16;

/// An annotation split into two long sides, both ordered left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSplit {
    pub top: Vec<Point>,
    pub bottom: Vec<Point>,
}

impl SideSplit {
    pub fn new(top: Vec<Point>, bottom: Vec<Point>) -> Result<Self> {
        if top.len() < 2 || bottom.len() < 2 {
            return Err(Error::MalformedAnnotation(format!(
                "each side needs at least 2 points, got {} and {}",
                top.len(),
                bottom.len()
            )));
        }
        Ok(Self { top, bottom })
    }

    /// `(tl, tr, br, bl)`.
    pub fn corners(&self) -> [Point; 4] {
        [self.top[0], *self.top.last().unwrap(), *self.bottom.last().unwrap(), self.bottom[0]]
    }

    /// Closed polygon: top forwards, bottom backwards.
    pub fn polygon(&self) -> Result<Polygon> {
        let mut pts = self.top.clone();
        pts.extend(self.bottom.iter().rev());
        Polygon::new(pts)
    }
}

/// Splits by the list convention: the first half of the vertices is the top
/// side left to right, the second half the bottom side right to left.
fn split_by_convention(pts: &[Point]) -> Result<SideSplit> {
    let half = pts.len() / 2;
    let top = pts[..half].to_vec();
    let bottom = pts[half..].iter().rev().copied().collect();
    SideSplit::new(top, bottom)
}

fn run(pts: &[Point], from: usize, to: usize) -> Vec<Point> {
    let n = pts.len();
    let mut out = vec![pts[from]];
    let mut i = from;
    while i != to {
        i = (i + 1) % n;
        out.push(pts[i]);
    }
    out
}

/// Indices `i0 < i1 < i2 < i3` of the largest-area quadrilateral.
fn max_area_quad(pts: &[Point]) -> [usize; 4] {
    let n = pts.len();
    let mut best = ([0, 1, 2, 3], f64::NEG_INFINITY);
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let area = signed_area(&[pts[a], pts[b], pts[c], pts[d]]).abs();
                    if area > best.1 {
                        best = ([a, b, c, d], area);
                    }
                }
            }
        }
    }
    best.0
}

/// Picks four corners as the vertices of the max-area quadrilateral; the two
/// vertex runs between them with the larger combined length are the long
/// sides, and the one with the smaller mean `y` is the top.
fn split_by_corners(pts: &[Point]) -> Result<SideSplit> {
    if pts.len() > EXHAUSTIVE_CORNER_LIMIT {
        return Err(Error::MalformedAnnotation(format!(
            "corner detection supports at most {EXHAUSTIVE_CORNER_LIMIT} vertices, got {}",
            pts.len()
        )));
    }
    let [a, b, c, d] = max_area_quad(pts);
    let runs = [run(pts, a, b), run(pts, b, c), run(pts, c, d), run(pts, d, a)];
    let len = |i: usize| polyline_length(&runs[i]);
    let (s1, s2) = if len(0) + len(2) >= len(1) + len(3) {
        (runs[0].clone(), runs[2].clone())
    } else {
        (runs[1].clone(), runs[3].clone())
    };
    let mean_y = |s: &[Point]| s.iter().map(|p| p.y).sum::<f64>() / s.len() as f64;
    let (mut top, mut bottom) = if mean_y(&s1) <= mean_y(&s2) { (s1, s2) } else { (s2, s1) };
    if top[0].x > top.last().unwrap().x {
        top.reverse();
    }
    if bottom[0].x > bottom.last().unwrap().x {
        bottom.reverse();
    }
    SideSplit::new(top, bottom)
}

/// Splits an instance into top and bottom sides.
///
/// CTW1500 and synthetic instances with an even vertex count, and plain
/// quadrilaterals listed from the top-left, follow the list convention.
/// Otherwise corners are detected as the maximum-area quadrilateral of the
/// vertices.
pub fn split_sides(instance: &TextInstance) -> Result<SideSplit> {
    let pts = instance.polygon.points();
    if pts.len() < 4 {
        return Err(Error::MalformedAnnotation(format!(
            "{}: need at least 4 vertices to split sides, got {}",
            instance.id,
            pts.len()
        )));
    }
    match instance.source {
        Source::Ctw1500 | Source::Synthetic if pts.len() % 2 == 0 => split_by_convention(pts),
        _ if pts.len() == 4 => split_by_convention(pts),
        _ => split_by_corners(pts),
    }
}

/// Resamples both sides of `split` at `per_side` uniform arc-length points of
/// their smoothing splines. The top side maps to `(t, 0)` and the bottom
/// side to `(t, 1)` on the unit rectangle with `t` the normalized arc length.
/// Corners are reproduced bit-exactly.
pub fn make_correspondences(split: &SideSplit, per_side: usize) -> Result<Correspondences> {
    if per_side < 2 {
        return Err(Error::Config(format!("per_side must be at least 2, got {per_side}")));
    }
    let top = resample_by_arc_length(&split.top, per_side)?;
    let bottom = resample_by_arc_length(&split.bottom, per_side)?;
    let ts: Vec<f64> = (0..per_side).map(|j| j as f64 / (per_side - 1) as f64).collect();
    let source = ts
        .iter()
        .map(|&t| Point::new(t, 0.0))
        .chain(ts.iter().map(|&t| Point::new(t, 1.0)))
        .collect();
    let target = top.into_iter().chain(bottom).collect();
    Correspondences::new(source, target)
}

/// Mean distance between arc-length-matched points of the two sides.
pub fn text_height(split: &SideSplit) -> Result<f64> {
    let n = DEFAULT_PER_SIDE;
    let top = resample_by_arc_length(&split.top, n)?;
    let bottom = resample_by_arc_length(&split.bottom, n)?;
    Ok(top.iter().zip(&bottom).map(|(a, b)| a.dist(*b)).sum::<f64>() / n as f64)
}
