//! Network-free shape supervision: the relaxed border mask and border
//! alignment loss, the corner loss, the per-instance regression loss,
//! Gaussian text-centre maps and the soft cross-entropy.
//!
//! Rasters use integer-centred cells: value `(col, row)` lives at the image
//! point `(col, row)`.

mod align;
mod descent;
mod gtc;
mod mask;
mod sample;

pub use align::{ba_loss, corner_loss, reg_loss, BaLoss, BoundarySamples, CornerLoss, RegInstance};
pub use descent::{
    mean_boundary_distance, AlignmentProblem, DescentOptions, DescentTrace, DEFAULT_STEPS,
};
pub use gtc::{make_gtc, GtcMap, DEFAULT_OVERSAMPLE, DEFAULT_SIGMA_FRAC};
pub use mask::{make_border_mask, relax, BorderMask, DEFAULT_T_B, DEFAULT_T_R};
pub use sample::bilinear_sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2-D array of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Config(format!(
                "raster {width}×{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self { width, height, values: vec![v; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.values[row * self.width + col] = v;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(col, row)` of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

/// Default clamp applied to predicted probabilities.
pub const PROB_EPS: f64 = 1e-7;

/// Soft (binary) cross-entropy `−Σ [y log p + (1−y) log(1−p)]` with targets
/// in `[0, 1]` and predictions clamped to `[1e-7, 1 − 1e-7]`.
pub fn soft_cross_entropy(y: &[f64], p: &[f64]) -> Result<f64> {
    if y.len() != p.len() {
        return Err(Error::Config(format!("{} targets but {} predictions", y.len(), p.len())));
    }
    Ok(y.iter()
        .zip(p)
        .map(|(&y, &p)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum())
}
