use nalgebra::Matrix3;

use super::Point;
use crate::error::{Error, Result};

/// Projective map of the plane, stored with `h[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    /// Normalizes so the bottom-right entry is 1 and rejects singular or
    /// non-normalizable matrices.
    pub fn new(h: Matrix3<f64>) -> Result<Self> {
        let s = h[(2, 2)];
        if s.abs() < 1e-300 || !s.is_finite() {
            return Err(Error::DegenerateShape("homography h22 is zero".into()));
        }
        let h = h / s;
        if h.iter().any(|v| !v.is_finite()) || h.determinant().abs() <= 1e-12 {
            return Err(Error::DegenerateShape("homography is singular".into()));
        }
        Ok(Self { h })
    }

    pub fn identity() -> Self {
        Self { h: Matrix3::identity() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn apply(&self, p: Point) -> Point {
        let h = &self.h;
        let w = h[(2, 0)] * p.x + h[(2, 1)] * p.y + h[(2, 2)];
        Point::new(
            (h[(0, 0)] * p.x + h[(0, 1)] * p.y + h[(0, 2)]) / w,
            (h[(1, 0)] * p.x + h[(1, 1)] * p.y + h[(1, 2)]) / w,
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .h
            .try_inverse()
            .ok_or_else(|| Error::DegenerateShape("homography is singular".into()))?;
        Self::new(inv)
    }
}

/// Reprojection of an image plane rotated about its left edge.
///
/// The image lies in the plane `Z = 0` with pixel `(x, y)` at `(x, y, 0)`.
/// It is rotated by `angle_deg` about the line `x = 0` so that the right side
/// recedes, then projected back onto `Z = 0` through a pinhole at
/// `(0, image_h / 2, -focal)`. Points on the left edge are fixed.
pub fn perspective_from_left_edge(
    angle_deg: f64,
    image_w: f64,
    image_h: f64,
    focal: f64,
) -> Result<Homography> {
    if !(0.0..90.0).contains(&angle_deg) {
        return Err(Error::Config(format!("rotation angle {angle_deg} outside [0, 90)")));
    }
    if !(image_w > 0.0 && image_h > 0.0 && focal > 0.0) {
        return Err(Error::Config("image size and focal length must be positive".into()));
    }
    let (s, c) = angle_deg.to_radians().sin_cos();
    let cy = image_h / 2.0;
    // rotated point (x c, y, x s) projected from (0, cy, -f):
    //   x' = f x c / (f + x s),  y' = cy + f (y - cy) / (f + x s)
    Homography::new(Matrix3::new(
        c, 0.0, 0.0,
        cy * s / focal, 1.0, 0.0,
        s / focal, 0.0, 1.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_angle_is_identity() {
        let h = perspective_from_left_edge(0.0, 640.0, 480.0, 640.0).unwrap();
        assert_eq!(*h.matrix(), Matrix3::identity());
        let p = Point::new(123.25, -7.5);
        assert!(h.apply(p).dist(p) < 1e-9);
    }

    #[test]
    fn left_edge_is_fixed() {
        let h = perspective_from_left_edge(45.0, 640.0, 480.0, 640.0).unwrap();
        for y in [0.0, 100.0, 240.0, 480.0] {
            let p = Point::new(0.0, y);
            assert!(h.apply(p).dist(p) < 1e-9);
        }
    }

    #[test]
    fn right_edge_is_foreshortened() {
        let (w, ht) = (640.0, 480.0);
        let h = perspective_from_left_edge(45.0, w, ht, w).unwrap();
        let corners = [
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, ht),
            Point::new(0.0, ht),
        ]
        .map(|p| h.apply(p));
        let left = corners[3].y - corners[0].y;
        let right = corners[2].y - corners[1].y;
        assert!(right < left);
        assert!(corners[1].x < w);
        // oracle: direct 3D rotation and pinhole projection of (w, 0)
        let th = 45f64.to_radians();
        let (px, py, pz) = (w * th.cos(), 0.0, w * th.sin());
        let t = w / (pz + w);
        let exp = Point::new(t * px, ht / 2.0 + t * (py - ht / 2.0));
        assert!(corners[1].dist(exp) < 1e-9);
    }

    #[test]
    fn inverse_round_trip() {
        let h = perspective_from_left_edge(70.0, 300.0, 200.0, 300.0).unwrap();
        let inv = h.inverse().unwrap();
        let p = Point::new(211.0, 37.0);
        assert!(inv.apply(h.apply(p)).dist(p) < 1e-9);
    }

    #[test]
    fn bad_angles_rejected() {
        assert!(perspective_from_left_edge(90.0, 1.0, 1.0, 1.0).is_err());
        assert!(perspective_from_left_edge(-1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Homography::new(Matrix3::zeros()).is_err());
    }
}
