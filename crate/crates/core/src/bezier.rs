//! Cubic Bezier text boundaries: two independent curves for the long sides.
//!
//! This is the comparison baseline for the thin-plate-spline representation.
//! Both sides are fitted by least squares against the same arc-length
//! parameterized correspondences, with their end control points pinned to the
//! text corners.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::tps::{Correspondences, MAX_FIT_CONDITION};

pub const DEFAULT_DEGREE: usize = 3;

/// Control points of the top and bottom curves, both running left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BezierParams {
    pub top: Vec<Point>,
    pub bottom: Vec<Point>,
}

impl BezierParams {
    pub fn new(top: Vec<Point>, bottom: Vec<Point>) -> Result<Self> {
        if top.len() != bottom.len() || top.len() < 2 {
            return Err(Error::Config(format!(
                "both sides need the same number (≥ 2) of control points, got {} and {}",
                top.len(),
                bottom.len()
            )));
        }
        if top.iter().chain(&bottom).any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite control point".into()));
        }
        Ok(Self { top, bottom })
    }

    pub fn degree(&self) -> usize {
        self.top.len() - 1
    }

    pub fn control_points(&self) -> impl Iterator<Item = Point> + '_ {
        self.top.iter().chain(&self.bottom).copied()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernstein basis polynomial `C(n,i) tⁱ (1−t)ⁿ⁻ⁱ`.
pub fn bernstein(i: usize, n: usize, t: f64) -> f64 {
    assert!(i <= n, "bernstein index {i} exceeds degree {n}");
    binomial(n, i) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32)
}

/// Point on the curve with the given control points at parameter `t`.
pub fn eval_curve(ctrl: &[Point], t: f64) -> Point {
    let n = ctrl.len() - 1;
    ctrl.iter().enumerate().fold(Point::default(), |acc, (i, &p)| acc + p * bernstein(i, n, t))
}

/// Closed polygon: the top curve sampled forwards, then the bottom curve
/// sampled backwards, `samples_per_side` points each.
pub fn bezier_decode(params: &BezierParams, samples_per_side: usize) -> Result<Polygon> {
    if samples_per_side < 2 {
        return Err(Error::Config(format!("samples_per_side must be ≥ 2, got {samples_per_side}")));
    }
    let ts: Vec<f64> = (0..samples_per_side)
        .map(|j| j as f64 / (samples_per_side - 1) as f64)
        .collect();
    let mut pts: Vec<Point> = ts.iter().map(|&t| eval_curve(&params.top, t)).collect();
    pts.extend(ts.iter().rev().map(|&t| eval_curve(&params.bottom, t)));
    Polygon::new(pts)
}

/// Fits one side with end control points fixed to the first and last point.
/// `ts` must lie in `[0, 1]`; the points at `t = 0` and `t = 1` pin the ends.
pub fn fit_side(points: &[Point], ts: &[f64], degree: usize) -> Result<Vec<Point>> {
    if points.len() != ts.len() || points.len() < degree + 1 {
        return Err(Error::Config(format!(
            "degree {degree} needs at least {} parameterized points, got {}",
            degree + 1,
            points.len()
        )));
    }
    let first = points[ts.iter().position(|&t| t == 0.0).ok_or_else(|| {
        Error::Config("side has no point at t = 0 to pin".into())
    })?];
    let last = points[ts.iter().position(|&t| t == 1.0).ok_or_else(|| {
        Error::Config("side has no point at t = 1 to pin".into())
    })?];
    if degree < 2 {
        return Ok(vec![first, last]);
    }
    let inner = degree - 1;
    let m = points.len();
    let mut a = DMatrix::<f64>::zeros(m, inner);
    let mut bx = DVector::<f64>::zeros(m);
    let mut by = DVector::<f64>::zeros(m);
    for (j, (&p, &t)) in points.iter().zip(ts).enumerate() {
        for i in 0..inner {
            a[(j, i)] = bernstein(i + 1, degree, t);
        }
        let b0 = bernstein(0, degree, t);
        let bn = bernstein(degree, degree, t);
        bx[j] = p.x - b0 * first.x - bn * last.x;
        by[j] = p.y - b0 * first.y - bn * last.y;
    }
    let svd = a.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_FIT_CONDITION) {
        return Err(Error::SingularFit { condition, limit: MAX_FIT_CONDITION });
    }
    let sx = svd.solve(&bx, 0.0).map_err(|e| Error::Config(e.to_string()))?;
    let sy = svd.solve(&by, 0.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut ctrl = Vec::with_capacity(degree + 1);
    ctrl.push(first);
    ctrl.extend((0..inner).map(|i| Point::new(sx[i], sy[i])));
    ctrl.push(last);
    Ok(ctrl)
}

#[derive(Debug, Clone)]
pub struct BezierFit {
    pub params: BezierParams,
    pub rms_residual: f64,
    pub max_residual: f64,
}

/// Fits both sides from correspondences laid out on the unit rectangle:
/// sources with `y = 0` belong to the top side, `y = 1` to the bottom, and
/// the source `x` is the curve parameter.
pub fn bezier_fit(corr: &Correspondences, degree: usize) -> Result<BezierFit> {
    let mut top = (Vec::new(), Vec::new());
    let mut bottom = (Vec::new(), Vec::new());
    for (s, t) in corr.iter() {
        let side = if s.y == 0.0 {
            &mut top
        } else if s.y == 1.0 {
            &mut bottom
        } else {
            return Err(Error::Config(format!("correspondence at y = {} is on neither side", s.y)));
        };
        side.0.push(t);
        side.1.push(s.x);
    }
    let params = BezierParams::new(
        fit_side(&top.0, &top.1, degree)?,
        fit_side(&bottom.0, &bottom.1, degree)?,
    )?;
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for (ctrl, (pts, ts)) in [(&params.top, &top), (&params.bottom, &bottom)] {
        for (p, &t) in pts.iter().zip(ts) {
            let d = eval_curve(ctrl, t).dist(*p);
            sq += d * d;
            max = max.max(d);
        }
    }
    Ok(BezierFit { params, rms_residual: (sq / corr.len() as f64).sqrt(), max_residual: max })
}
