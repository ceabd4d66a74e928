use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SideSplit, Source, TextInstance};
use crate::error::{Error, Result};
use crate::geometry::{perspective_from_left_edge, Homography, Point};

/// Vertices per side of a generated instance.
pub const SYNTHETIC_PER_SIDE: usize = 32;

/// A sine-bent text line of constant height, optionally seen in perspective.
///
/// The centreline is `y = A sin(2π periods x / L + φ)` over `x ∈ [0, L]` with
/// `A = amplitude_frac · text_height` and `L = aspect · text_height`. The
/// phase `φ` is drawn from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub amplitude_frac: f64,
    pub periods: f64,
    pub text_height: f64,
    pub aspect: f64,
    pub perspective_angle_deg: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            amplitude_frac: 0.3,
            periods: 1.5,
            text_height: 32.0,
            aspect: 8.0,
            perspective_angle_deg: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.amplitude_frac) {
            return Err(Error::Config(format!("amplitude_frac {} outside [0, 0.5]", self.amplitude_frac)));
        }
        if !(0.0..90.0).contains(&self.perspective_angle_deg) {
            return Err(Error::Config(format!("angle {} outside [0, 90)", self.perspective_angle_deg)));
        }
        if !(self.text_height > 0.0 && self.aspect > 0.0 && self.periods >= 0.0) {
            return Err(Error::Config("text height, aspect and periods must be positive".into()));
        }
        Ok(())
    }
}

/// A generated instance with its ground-truth sides and centreline, all in
/// image coordinates after the perspective warp.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub instance: TextInstance,
    pub split: SideSplit,
    pub centerline: Vec<Point>,
    pub image_size: (f64, f64),
    pub homography: Homography,
}

struct Sinusoid {
    amp: f64,
    omega: f64,
    phase: f64,
}

impl Sinusoid {
    fn y(&self, x: f64) -> f64 {
        self.amp * (self.omega * x + self.phase).sin()
    }
    fn dy(&self, x: f64) -> f64 {
        self.amp * self.omega * (self.omega * x + self.phase).cos()
    }
    fn ddy(&self, x: f64) -> f64 {
        -self.amp * self.omega * self.omega * (self.omega * x + self.phase).sin()
    }
    /// Unit normal pointing towards smaller `y` (the top side).
    fn normal(&self, x: f64) -> Point {
        let s = self.dy(x);
        Point::new(s, -1.0) * (1.0 / (1.0 + s * s).sqrt())
    }
    fn curvature(&self, x: f64) -> f64 {
        let s = self.dy(x);
        self.ddy(x).abs() / (1.0 + s * s).powf(1.5)
    }
}

/// Builds one instance from `spec`.
///
/// Both sides are offsets of the centreline by half the text height along its
/// true normal, so the height stays constant on curves. An offset that folds
/// over itself (curvature radius at most half the height) is rejected.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = spec.text_height;
    let len = spec.aspect * h;
    let wave = Sinusoid {
        amp: spec.amplitude_frac * h,
        omega: 2.0 * std::f64::consts::PI * spec.periods / len,
        phase: rng.random_range(0.0..2.0 * std::f64::consts::PI),
    };
    let max_k = (0..=1024)
        .map(|i| wave.curvature(len * i as f64 / 1024.0))
        .fold(0.0, f64::max);
    if max_k * h / 2.0 >= 1.0 {
        return Err(Error::DegenerateShape(format!(
            "offset folds over: curvature radius {:.3} is not above half the height {:.3}",
            1.0 / max_k,
            h / 2.0
        )));
    }

    let n = SYNTHETIC_PER_SIDE;
    let xs: Vec<f64> = (0..n).map(|i| len * i as f64 / (n - 1) as f64).collect();
    let centre: Vec<Point> = xs.iter().map(|&x| Point::new(x, wave.y(x))).collect();
    let top: Vec<Point> = xs.iter().zip(&centre).map(|(&x, &c)| c + wave.normal(x) * (h / 2.0)).collect();
    let bottom: Vec<Point> = xs.iter().zip(&centre).map(|(&x, &c)| c - wave.normal(x) * (h / 2.0)).collect();

    // place on a canvas with a one-height margin
    let all = top.iter().chain(&bottom);
    let (min_x, min_y) = all.clone().fold((f64::INFINITY, f64::INFINITY), |a, p| (a.0.min(p.x), a.1.min(p.y)));
    let (max_x, max_y) = all.fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| (a.0.max(p.x), a.1.max(p.y)));
    let shift = Point::new(h - min_x, h - min_y);
    let image_size = (max_x - min_x + 2.0 * h, max_y - min_y + 2.0 * h);
    let hom = perspective_from_left_edge(spec.perspective_angle_deg, image_size.0, image_size.1, image_size.0)?;
    let warp = |p: &Point| hom.apply(*p + shift);
    let top: Vec<Point> = top.iter().map(warp).collect();
    let bottom: Vec<Point> = bottom.iter().map(warp).collect();
    let centerline = centre.iter().map(warp).collect();

    let mut points = top.clone();
    points.extend(bottom.iter().rev());
    let instance = TextInstance::new(format!("synth_{}", spec.seed), points, None, Source::Synthetic)?;
    Ok(SyntheticInstance {
        instance,
        split: SideSplit::new(top, bottom)?,
        centerline,
        image_size,
        homography: hom,
    })
}

/// A reproducible corpus of sine-bent instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub amplitude_frac: f64,
    pub periods: f64,
    pub perspective_angle_deg: f64,
    pub seed: u64,
    /// Range for the per-instance text height in pixels.
    pub height_range: (f64, f64),
    /// Range for the per-instance length-to-height ratio.
    pub aspect_range: (f64, f64),
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 200,
            amplitude_frac: 0.3,
            periods: 1.5,
            perspective_angle_deg: 0.0,
            seed: 42,
            height_range: (20.0, 48.0),
            aspect_range: (5.0, 10.0),
        }
    }
}

impl CorpusSpec {
    /// Instance `i` uses seed `seed + i` for its height, aspect and phase,
    /// so the pre-warp shapes do not depend on the perspective angle.
    pub fn instance_spec(&self, i: usize) -> SyntheticSpec {
        let seed = self.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_C0DE);
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        SyntheticSpec {
            amplitude_frac: self.amplitude_frac,
            periods: self.periods,
            text_height: draw(&mut rng, self.height_range),
            aspect: draw(&mut rng, self.aspect_range),
            perspective_angle_deg: self.perspective_angle_deg,
            seed,
        }
    }
}

pub fn synthetic_corpus(spec: &CorpusSpec) -> Result<Vec<SyntheticInstance>> {
    (0..spec.count)
        .into_par_iter()
        .map(|i| generate_synthetic(&spec.instance_spec(i)))
        .collect()
}
