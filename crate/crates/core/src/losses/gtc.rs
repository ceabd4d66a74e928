use rayon::prelude::*;

use super::Raster;
use crate::error::{Error, Result};
use crate::geometry::{polyline_length, rasterize_indicator, Point};
use crate::tps::{decode, decode_boundary, fill_basis, TpsParams};

/// Gaussian spread as a fraction of the unit rectangle's width and height.
pub const DEFAULT_SIGMA_FRAC: (f64, f64) = (0.25, 0.25);
/// Lattice samples per output pixel along each axis.
pub const DEFAULT_OVERSAMPLE: usize = 4;

/// Gaussian text-centre map: a centred Gaussian on the unit rectangle pushed
/// through the shape transform onto the raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GtcMap {
    pub values: Raster,
    pub sigma_frac: (f64, f64),
}

/// Gaussian on the unit rectangle, peak 1 at `(0.5, 0.5)`.
pub(crate) fn unit_gaussian(p: Point, sigma: (f64, f64)) -> f64 {
    let dx = (p.x - 0.5) / sigma.0;
    let dy = (p.y - 0.5) / sigma.1;
    (-0.5 * (dx * dx + dy * dy)).exp()
}

fn odd_at_least(v: f64) -> usize {
    let n = (v.ceil() as usize).max(3);
    n | 1
}

/// Renders the text-centre map for `params` on a `width × height` raster.
///
/// The Gaussian is sampled on a lattice over the unit rectangle that is
/// `oversample` times denser than the decoded shape's pixel extent; every
/// lattice sample is mapped through `params` and written to its nearest cell,
/// keeping the maximum. Cells whose centres fall outside the decoded
/// boundary are zero.
pub fn make_gtc(
    params: &TpsParams,
    width: usize,
    height: usize,
    sigma_frac: (f64, f64),
    oversample: usize,
) -> Result<GtcMap> {
    if width == 0 || height == 0 {
        return Err(Error::Config("map dimensions must be positive".into()));
    }
    if !(sigma_frac.0 > 0.0 && sigma_frac.1 > 0.0) {
        return Err(Error::Config("Gaussian sigma must be positive".into()));
    }
    if oversample == 0 {
        return Err(Error::Config("oversample must be at least 1".into()));
    }
    // pixel extent of the shape along and across the text
    let coarse = decode(params, 5, 17)?;
    let along = (0..5).map(|r| polyline_length(coarse.row(r))).fold(0.0, f64::max);
    let across = (0..17)
        .map(|c| {
            let col: Vec<Point> = (0..5).map(|r| coarse.at(r, c)).collect();
            polyline_length(&col)
        })
        .fold(0.0, f64::max);
    let cols = odd_at_least(along * oversample as f64 + 1.0);
    let rows = odd_at_least(across * oversample as f64 + 1.0);

    // per-thread max-combine; negative marks an untouched cell
    let splat = (0..rows)
        .into_par_iter()
        .fold(
            || (vec![-1.0f64; width * height], Vec::with_capacity(params.config().param_cols())),
            |(mut acc, mut phi), i| {
                let v = i as f64 / (rows - 1) as f64;
                for j in 0..cols {
                    let src = Point::new(j as f64 / (cols - 1) as f64, v);
                    fill_basis(params.config(), src, &mut phi);
                    let dst = params.apply_basis(&phi);
                    let (cx, cy) = (dst.x.round(), dst.y.round());
                    if cx < 0.0 || cy < 0.0 || cx >= width as f64 || cy >= height as f64 {
                        continue;
                    }
                    let idx = cy as usize * width + cx as usize;
                    acc[idx] = acc[idx].max(unit_gaussian(src, sigma_frac));
                }
                (acc, phi)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(
            || vec![-1.0f64; width * height],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x = x.max(y));
                a
            },
        );
    let outline = decode_boundary(params, (cols / oversample).max(32))?;
    let inside = rasterize_indicator(&outline, width, height);
    let mut values = Raster::filled(width, height, 0.0);
    for (idx, v) in values.values.iter_mut().enumerate() {
        if inside[idx] && splat[idx] > 0.0 {
            *v = splat[idx];
        }
    }
    Ok(GtcMap { values, sigma_frac })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tps::{make_fiducials, Distribution};

    #[test]
    fn identity_warp_is_the_gaussian() {
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let (w, h) = (61usize, 41usize);
        let p = TpsParams::affine(cfg, Point::new(0.0, 0.0), [[(w - 1) as f64, 0.0], [0.0, (h - 1) as f64]]);
        let m = make_gtc(&p, w, h, DEFAULT_SIGMA_FRAC, DEFAULT_OVERSAMPLE).unwrap();
        assert_eq!(m.values.argmax(), (30, 20));
        assert_eq!(m.values.max(), 1.0);
        for row in 0..h {
            for col in 0..w {
                let exp = unit_gaussian(
                    Point::new(col as f64 / (w - 1) as f64, row as f64 / (h - 1) as f64),
                    DEFAULT_SIGMA_FRAC,
                );
                let got = m.values.get(col, row);
                assert!(got >= exp - 1e-12, "max-combine never lowers a cell");
                assert!(got - exp < 0.05);
            }
        }
    }

    #[test]
    fn outside_shape_is_zero() {
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let p = TpsParams::affine(cfg, Point::new(10.0, 10.0), [[40.0, 0.0], [0.0, 10.0]]);
        let m = make_gtc(&p, 70, 40, DEFAULT_SIGMA_FRAC, DEFAULT_OVERSAMPLE).unwrap();
        assert_eq!(m.values.get(5, 5), 0.0);
        assert_eq!(m.values.get(60, 15), 0.0);
        assert!(m.values.get(30, 15) > 0.9);
        assert!(m.values.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn argmax_near_decoded_centre() {
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let mut t = TpsParams::affine(cfg.clone(), Point::new(12.0, 8.0), [[60.0, 6.0], [-4.0, 18.0]]).matrix().clone();
        t[(1, 5)] = 3.0;
        let p = TpsParams::new(cfg, t).unwrap();
        let m = make_gtc(&p, 90, 40, DEFAULT_SIGMA_FRAC, DEFAULT_OVERSAMPLE).unwrap();
        let (c, r) = m.values.argmax();
        let centre = p.apply(Point::new(0.5, 0.5));
        assert!((c as f64 - centre.x).abs() <= 1.0 && (r as f64 - centre.y).abs() <= 1.0);
    }

    #[test]
    fn ridge_follows_fitted_bend() {
        use crate::dataio::{generate_synthetic, make_correspondences, SyntheticSpec};
        use crate::tps::fit;
        let spec = SyntheticSpec { amplitude_frac: 0.2, periods: 0.5, aspect: 6.0, seed: 5, ..Default::default() };
        let s = generate_synthetic(&spec).unwrap();
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let f = fit(&cfg, &make_correspondences(&s.split, 32).unwrap(), 1e-8).unwrap();
        let (w, h) = (s.image_size.0.ceil() as usize, s.image_size.1.ceil() as usize);
        let m = make_gtc(&f.params, w, h, DEFAULT_SIGMA_FRAC, DEFAULT_OVERSAMPLE).unwrap();
        let mid: Vec<Point> = (0..=1000).map(|i| f.params.apply(Point::new(i as f64 / 1000.0, 0.5))).collect();
        let mut checked = 0;
        for c in 0..w {
            let x = c as f64;
            let Some(seg) = mid.windows(2).find(|s| (s[0].x - x) * (s[1].x - x) <= 0.0 && s[0].x != s[1].x) else {
                continue;
            };
            let y = seg[0].y + (x - seg[0].x) / (seg[1].x - seg[0].x) * (seg[1].y - seg[0].y);
            let (row, v) = (0..h).map(|r| (r, m.values.get(c, r))).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            if v > 0.0 {
                assert!((row as f64 - y).abs() < 2.0, "column {c}: ridge {row}, midline {y:.2}");
                checked += 1;
            }
        }
        assert!(checked > 150);
    }
}
