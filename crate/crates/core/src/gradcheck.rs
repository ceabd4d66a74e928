//! Finite-difference checks of the analytic loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::losses::{ba_loss, corner_loss, make_border_mask, BorderMask, DEFAULT_T_B, DEFAULT_T_R};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub trials: usize,
    pub seed: u64,
    /// Central-difference step in pixels.
    pub step: f64,
    pub tolerance: f64,
    /// Points closer than this to a bilinear cell edge are skipped.
    pub edge_margin: f64,
    /// Corners closer than this to their target are skipped.
    pub coincidence_margin: f64,
    /// Scales every analytic gradient; anything but 1 should fail the check.
    pub gradient_scale: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            step: 1e-5,
            tolerance: 1e-3,
            edge_margin: 1e-3,
            coincidence_margin: 1e-3,
            gradient_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub trials: usize,
    /// Number of scalar gradient components compared.
    pub checks: usize,
    pub skipped: usize,
    pub max_rel_error_ba: f64,
    pub max_rel_error_corner: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.max_rel_error_ba.max(self.max_rel_error_corner)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

/// Relative error with a small absolute floor so exact zeros compare cleanly.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn near_cell_edge(v: f64, margin: f64) -> bool {
    let f = v - v.floor();
    f < margin || f > 1.0 - margin
}

fn random_mask(rng: &mut ChaCha8Rng) -> Result<BorderMask> {
    let (w, h) = (48usize, 32usize);
    let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-2.0..2.0);
    let quad = vec![
        Point::new(8.0 + jitter(rng), 8.0 + jitter(rng)),
        Point::new(40.0 + jitter(rng), 8.0 + jitter(rng)),
        Point::new(40.0 + jitter(rng), 24.0 + jitter(rng)),
        Point::new(8.0 + jitter(rng), 24.0 + jitter(rng)),
    ];
    let height = rng.random_range(8.0..20.0);
    make_border_mask(&Polygon::new(quad)?, height, w, h, DEFAULT_T_B, DEFAULT_T_R)
}

/// Compares analytic gradients of the border alignment and corner losses with
/// central finite differences on random configurations.
pub fn run_gradcheck(opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if opts.trials == 0 {
        return Err(Error::Config("gradient check needs at least one trial".into()));
    }
    if !(opts.step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {}", opts.step)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h = opts.step;
    let mut report = GradCheckReport {
        trials: opts.trials,
        checks: 0,
        skipped: 0,
        max_rel_error_ba: 0.0,
        max_rel_error_corner: 0.0,
        tolerance: opts.tolerance,
    };
    let mut mask = random_mask(&mut rng)?;
    for trial in 0..opts.trials {
        if trial % 50 == 49 {
            mask = random_mask(&mut rng)?;
        }
        // a handful of boundary points around the quadrilateral's band
        let pts: Vec<Point> = (0..6)
            .map(|_| Point::new(rng.random_range(2.0..46.0), rng.random_range(2.0..30.0)))
            .collect();
        let ba = ba_loss(&mask, &pts)?;
        for (i, &p) in pts.iter().enumerate() {
            if near_cell_edge(p.x, opts.edge_margin) || near_cell_edge(p.y, opts.edge_margin) {
                report.skipped += 1;
                continue;
            }
            for axis in 0..2 {
                let mut plus = pts.clone();
                let mut minus = pts.clone();
                if axis == 0 {
                    plus[i].x += h;
                    minus[i].x -= h;
                } else {
                    plus[i].y += h;
                    minus[i].y -= h;
                }
                let numeric = (ba_loss(&mask, &plus)?.loss - ba_loss(&mask, &minus)?.loss) / (2.0 * h);
                let g = ba.grads[i] * opts.gradient_scale;
                let analytic = if axis == 0 { g.x } else { g.y };
                report.max_rel_error_ba = report.max_rel_error_ba.max(relative_error(analytic, numeric));
                report.checks += 1;
            }
        }

        let gt: [Point; 4] = std::array::from_fn(|_| Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..30.0)));
        let pred: [Point; 4] = std::array::from_fn(|i| {
            gt[i] + Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))
        });
        let cor = corner_loss(&pred, &gt);
        for i in 0..4 {
            if pred[i].dist(gt[i]) < opts.coincidence_margin {
                report.skipped += 1;
                continue;
            }
            for axis in 0..2 {
                let (mut plus, mut minus) = (pred, pred);
                if axis == 0 {
                    plus[i].x += h;
                    minus[i].x -= h;
                } else {
                    plus[i].y += h;
                    minus[i].y -= h;
                }
                let numeric = (corner_loss(&plus, &gt).loss - corner_loss(&minus, &gt).loss) / (2.0 * h);
                let g = cor.grads[i] * opts.gradient_scale;
                let analytic = if axis == 0 { g.x } else { g.y };
                report.max_rel_error_corner = report.max_rel_error_corner.max(relative_error(analytic, numeric));
                report.checks += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let r = run_gradcheck(&GradCheckOptions { trials: 200, ..Default::default() }).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.checks > 2000);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let r = run_gradcheck(&GradCheckOptions { trials: 20, gradient_scale: 1.1, ..Default::default() }).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn zero_trials() {
        let opts = GradCheckOptions { trials: 0, ..Default::default() };
        assert!(matches!(run_gradcheck(&opts), Err(Error::Config(_))));
    }
}
