use super::{Point, Polygon};
use crate::error::{Error, Result};

// 8-point Gauss-Legendre rule on [-1, 1]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const QUAD_PIECES: usize = 4;

/// Natural cubic spline through a sequence of points, parameterized by
/// cumulative chord length and interpolated per coordinate.
#[derive(Debug, Clone)]
pub struct SplineCurve {
    knots: Vec<f64>,
    // per segment: [a, b, c, d] for x and for y, s(t) = a + b t + c t^2 + d t^3
    coeffs: Vec<[[f64; 4]; 2]>,
    // arc length at each knot
    arc: Vec<f64>,
}

fn natural_second_derivatives(h: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior unknowns m[1..n-1]
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        let j = i + 1;
        diag[i] = 2.0 * (h[j - 1] + h[j]);
        upper[i] = h[j];
        rhs[i] = 6.0 * ((v[j + 1] - v[j]) / h[j] - (v[j] - v[j - 1]) / h[j - 1]);
    }
    for i in 1..k {
        let w = h[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
    }
    m
}

impl SplineCurve {
    /// Builds the interpolating spline. Consecutive duplicate points are
    /// dropped; at least two distinct points are required.
    pub fn new(points: &[Point]) -> Result<Self> {
        let mut pts: Vec<Point> = Vec::with_capacity(points.len());
        for &p in points {
            if !p.is_finite() {
                return Err(Error::MalformedAnnotation("non-finite side vertex".into()));
            }
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return Err(Error::MalformedAnnotation(format!(
                "a side needs at least 2 distinct points, got {}",
                pts.len()
            )));
        }
        let h: Vec<f64> = pts.windows(2).map(|w| w[0].dist(w[1])).collect();
        Ok(Self::build(&pts, &h))
    }

    fn build(pts: &[Point], h: &[f64]) -> Self {
        let mut knots = Vec::with_capacity(pts.len());
        knots.push(0.0);
        for &d in h {
            knots.push(knots.last().unwrap() + d);
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let mx = natural_second_derivatives(h, &xs);
        let my = natural_second_derivatives(h, &ys);
        let seg = |v: &[f64], m: &[f64], i: usize| -> [f64; 4] {
            let hi = h[i];
            [
                v[i],
                (v[i + 1] - v[i]) / hi - hi * (2.0 * m[i] + m[i + 1]) / 6.0,
                m[i] / 2.0,
                (m[i + 1] - m[i]) / (6.0 * hi),
            ]
        };
        let coeffs = (0..h.len()).map(|i| [seg(&xs, &mx, i), seg(&ys, &my, i)]).collect();
        let mut curve = Self { knots, coeffs, arc: Vec::new() };
        let mut arc = vec![0.0];
        for i in 0..curve.coeffs.len() {
            let len = curve.segment_arc(i, h[i]);
            arc.push(arc.last().unwrap() + len);
        }
        curve.arc = arc;
        curve
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Total chord-length parameter range.
    pub fn param_len(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn arc_length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    fn segment_of(&self, u: f64) -> usize {
        let n = self.coeffs.len();
        match self.knots.binary_search_by(|k| k.total_cmp(&u)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    fn eval_seg(&self, i: usize, t: f64) -> Point {
        let [cx, cy] = &self.coeffs[i];
        let e = |c: &[f64; 4]| c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        Point::new(e(cx), e(cy))
    }

    fn deriv_seg(&self, i: usize, t: f64) -> Point {
        let [cx, cy] = &self.coeffs[i];
        let e = |c: &[f64; 4]| c[1] + t * (2.0 * c[2] + t * 3.0 * c[3]);
        Point::new(e(cx), e(cy))
    }

    fn second_deriv_seg(&self, i: usize, t: f64) -> Point {
        let [cx, cy] = &self.coeffs[i];
        Point::new(2.0 * cx[2] + 6.0 * cx[3] * t, 2.0 * cy[2] + 6.0 * cy[3] * t)
    }

    /// Position at chord parameter `u`; the end segments extrapolate.
    pub fn eval(&self, u: f64) -> Point {
        let i = self.segment_of(u);
        self.eval_seg(i, u - self.knots[i])
    }

    pub fn derivative(&self, u: f64) -> Point {
        let i = self.segment_of(u);
        self.deriv_seg(i, u - self.knots[i])
    }

    pub fn second_derivative(&self, u: f64) -> Point {
        let i = self.segment_of(u);
        self.second_deriv_seg(i, u - self.knots[i])
    }

    fn segment_arc(&self, i: usize, t_end: f64) -> f64 {
        let piece = t_end / QUAD_PIECES as f64;
        let mut acc = 0.0;
        for q in 0..QUAD_PIECES {
            let mid = (q as f64 + 0.5) * piece;
            for (n, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                acc += w * self.deriv_seg(i, mid + 0.5 * piece * n).norm();
            }
        }
        acc * 0.5 * piece
    }

    /// Chord parameter at which the arc length from the start equals `s`.
    pub fn param_at_arc(&self, s: f64) -> f64 {
        let total = self.arc_length();
        if s <= 0.0 {
            return 0.0;
        }
        if s >= total {
            return self.param_len();
        }
        let i = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => return self.knots[i],
            Err(i) => i - 1,
        };
        let h = self.knots[i + 1] - self.knots[i];
        let target = s - self.arc[i];
        let (mut lo, mut hi) = (0.0, h);
        let seg_len = self.arc[i + 1] - self.arc[i];
        let mut t = h * target / seg_len;
        for _ in 0..60 {
            let f = self.segment_arc(i, t) - target;
            if f.abs() < 1e-14 * total.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let speed = self.deriv_seg(i, t).norm();
            let newton = t - f / speed;
            t = if speed > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        self.knots[i] + t
    }

    /// `n >= 2` points at uniform arc-length spacing; the end points are
    /// the spline's end knots.
    pub fn resample(&self, n: usize) -> Vec<Point> {
        let total = self.arc_length();
        (0..n)
            .map(|j| {
                if j == 0 {
                    self.eval_seg(0, 0.0)
                } else if j == n - 1 {
                    let last = self.coeffs.len() - 1;
                    self.eval_seg(last, self.knots[last + 1] - self.knots[last])
                } else {
                    self.eval(self.param_at_arc(total * j as f64 / (n - 1) as f64))
                }
            })
            .collect()
    }
}

/// Resamples an open polyline at `n` uniformly arc-length-spaced points of
/// the natural cubic spline through its vertices. The end points are copied
/// from the input unchanged.
pub fn resample_by_arc_length(points: &[Point], n: usize) -> Result<Vec<Point>> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 samples per side, got {n}")));
    }
    let curve = SplineCurve::new(points)?;
    let mut out = curve.resample(n);
    out[0] = points[0];
    out[n - 1] = *points.last().unwrap();
    Ok(out)
}

/// Smoothed, densified copy of one side.
pub fn smooth_side(points: &[Point], samples: usize) -> Result<Vec<Point>> {
    resample_by_arc_length(points, samples)
}

/// Builds a closed polygon from two long sides, both given left to right.
/// Each side is replaced by `samples_per_side` points on its spline; the
/// result runs along the top then back along the bottom.
pub fn smooth_boundary(top: &[Point], bottom: &[Point], samples_per_side: usize) -> Result<Polygon> {
    if samples_per_side < 4 {
        return Err(Error::Config(format!(
            "samples_per_side must be at least 4, got {samples_per_side}"
        )));
    }
    let mut pts = smooth_side(top, samples_per_side)?;
    let mut b = smooth_side(bottom, samples_per_side)?;
    b.reverse();
    pts.extend(b);
    Polygon::new(pts)
}
