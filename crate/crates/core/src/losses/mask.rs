use rayon::prelude::*;

use super::Raster;
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

/// Distance threshold as a fraction of text height.
pub const DEFAULT_T_B: f64 = 0.6;
/// Relaxation threshold.
pub const DEFAULT_T_R: f64 = 0.8;

/// Border-distance mask of one text instance.
///
/// `raw` holds `M = max(0, 1 − d / (s·t_b))` where `d` is the distance to
/// the boundary and `s` the text height; `relaxed` holds `M' = min(1, M / t_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderMask {
    pub raw: Raster,
    pub relaxed: Raster,
    pub t_b: f64,
    pub t_r: f64,
    pub text_height: f64,
}

impl BorderMask {
    pub fn width(&self) -> usize {
        self.raw.width()
    }

    pub fn height(&self) -> usize {
        self.raw.height()
    }
}

/// Raw mask value for a boundary distance.
pub(crate) fn border_value(d: f64, s: f64, t_b: f64) -> f64 {
    let q = d / s;
    if q >= t_b {
        0.0
    } else {
        1.0 - q / t_b
    }
}

/// Relaxation of a raw mask value.
pub fn relax(m: f64, t_r: f64) -> f64 {
    if m >= t_r {
        1.0
    } else {
        m / t_r
    }
}

/// Rasterizes the border mask of `boundary` onto a `width × height` grid.
/// Distances are exact point-to-segment distances from each cell centre.
pub fn make_border_mask(
    boundary: &Polygon,
    text_height: f64,
    width: usize,
    height: usize,
    t_b: f64,
    t_r: f64,
) -> Result<BorderMask> {
    if !(text_height > 0.0 && text_height.is_finite()) {
        return Err(Error::Config(format!("text height must be positive, got {text_height}")));
    }
    if !(t_b > 0.0) {
        return Err(Error::Config(format!("t_b must be positive, got {t_b}")));
    }
    if !(t_r > 0.0 && t_r <= 1.0) {
        return Err(Error::Config(format!("t_r must lie in (0, 1], got {t_r}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Config("mask dimensions must be positive".into()));
    }
    let reach = text_height * t_b;
    let (lo, hi) = boundary.bounds();
    let raw_values: Vec<f64> = (0..height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let y = row as f64;
            (0..width).map(move |col| {
                let p = Point::new(col as f64, y);
                // cells beyond the dilated bounding box are farther than the reach
                if p.x < lo.x - reach || p.x > hi.x + reach || p.y < lo.y - reach || p.y > hi.y + reach {
                    0.0
                } else {
                    border_value(boundary.boundary_distance(p), text_height, t_b)
                }
            })
        })
        .collect();
    let relaxed_values = raw_values.iter().map(|&m| relax(m, t_r)).collect();
    Ok(BorderMask {
        raw: Raster::new(width, height, raw_values)?,
        relaxed: Raster::new(width, height, relaxed_values)?,
        t_b,
        t_r,
        text_height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect() -> Polygon {
        Polygon::new(vec![
            Point::new(10.0, 10.0),
            Point::new(50.0, 10.0),
            Point::new(50.0, 30.0),
            Point::new(10.0, 30.0),
        ])
        .unwrap()
    }

    #[test]
    fn on_boundary_is_one() {
        let m = make_border_mask(&rect(), 20.0, 64, 40, DEFAULT_T_B, DEFAULT_T_R).unwrap();
        assert_eq!(m.raw.get(10, 20), 1.0);
        assert_eq!(m.relaxed.get(10, 20), 1.0);
        assert_eq!(m.raw.get(30, 10), 1.0);
    }

    #[test]
    fn threshold_distance_is_zero() {
        // s = 20, t_b = 0.6: the reach is 12 px and (30, 42) is 12 px below the bottom edge
        let m = make_border_mask(&rect(), 20.0, 64, 60, DEFAULT_T_B, DEFAULT_T_R).unwrap();
        assert_eq!(m.raw.get(30, 42), 0.0);
        assert_eq!(m.relaxed.get(30, 42), 0.0);
        assert!(m.raw.get(30, 41) > 0.0);
    }

    #[test]
    fn plateau_value() {
        // d = 0.12 s lands on M = 0.8 which relaxes to 1
        let m = border_value(0.12 * 25.0, 25.0, 0.6);
        assert!((m - 0.8).abs() < 1e-12);
        assert!((relax(m, 0.8) - 1.0).abs() < 1e-12);
        assert_eq!(relax(0.4, 0.8), 0.5);
    }

    #[test]
    fn relaxation_is_monotone_in_threshold() {
        let m = make_border_mask(&rect(), 20.0, 64, 40, 0.6, 1.0).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for t_r in [1.0, 0.9, 0.8, 0.7, 0.5] {
            let cur: Vec<f64> = m.raw.values().iter().map(|&v| relax(v, t_r)).collect();
            if let Some(p) = &prev {
                assert!(cur.iter().zip(p).all(|(c, p)| c >= p));
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(make_border_mask(&rect(), 0.0, 4, 4, 0.6, 0.8).is_err());
        assert!(make_border_mask(&rect(), 1.0, 4, 4, 0.0, 0.8).is_err());
        assert!(make_border_mask(&rect(), 1.0, 4, 4, 0.6, 1.5).is_err());
    }
}
