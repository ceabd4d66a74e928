use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Largest accepted condition number of the fiducial system matrix.
pub const MAX_SYSTEM_CONDITION: f64 = 1e12;
pub const DEFAULT_K: usize = 8;

/// Placement pattern of the non-corner fiducials on the unit rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// All points on the top and bottom edges.
    Edge,
    /// Columns alternating between the midline and both edges.
    #[default]
    Cross,
    /// Corners plus points on the horizontal midline.
    Center,
}

impl Distribution {
    pub const ALL: [Distribution; 3] = [Distribution::Edge, Distribution::Cross, Distribution::Center];

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Edge => "edge",
            Distribution::Cross => "cross",
            Distribution::Center => "center",
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edge" => Ok(Distribution::Edge),
            "cross" => Ok(Distribution::Cross),
            "center" | "centre" => Ok(Distribution::Center),
            other => Err(Error::Config(format!("unknown fiducial distribution '{other}'"))),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The `k` fixed points on the unit rectangle `[0,1]²` that anchor the
/// radial part of the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct FiducialConfig {
    distribution: Distribution,
    fiducials: Vec<Point>,
}

impl FiducialConfig {
    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn k(&self) -> usize {
        self.fiducials.len()
    }

    /// Number of columns of a parameter matrix for this configuration.
    pub fn param_cols(&self) -> usize {
        self.fiducials.len() + 3
    }

    pub fn fiducials(&self) -> &[Point] {
        &self.fiducials
    }
}

/// Thin-plate radial basis `r(d) = d² ln d`, with `r(0) = 0`.
pub fn radial(d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d * d * d.ln()
    }
}

/// Same as [`radial`] but from a squared distance, avoiding the square root.
pub(crate) fn radial_sq(d2: f64) -> f64 {
    if d2 == 0.0 {
        0.0
    } else {
        0.5 * d2 * d2.ln()
    }
}

fn corners() -> [Point; 4] {
    [
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ]
}

/// Interior columns of the cross layout: midline, both edges, midline, ...
/// If the final edge column would overshoot by one point it becomes a
/// midline column instead.
fn cross_interior(m: usize) -> Vec<Point> {
    let mut cols: Vec<bool> = Vec::new(); // true = edge column (2 points)
    let mut used = 0;
    while used < m {
        let edge = cols.len() % 2 == 1 && used + 2 <= m;
        used += if edge { 2 } else { 1 };
        cols.push(edge);
    }
    let n = cols.len();
    let mut pts = Vec::with_capacity(m);
    for (j, edge) in cols.into_iter().enumerate() {
        let x = (j + 1) as f64 / (n + 1) as f64;
        if edge {
            pts.push(Point::new(x, 0.0));
            pts.push(Point::new(x, 1.0));
        } else {
            pts.push(Point::new(x, 0.5));
        }
    }
    pts
}

/// Builds the fiducial layout for `distribution` with `k` points. `k` must
/// be even and at least 4; the four rectangle corners are always included.
pub fn make_fiducials(distribution: Distribution, k: usize) -> Result<FiducialConfig> {
    if k < 4 || k % 2 != 0 {
        return Err(Error::Config(format!(
            "number of fiducials must be even and at least 4, got {k}"
        )));
    }
    let fiducials = match distribution {
        Distribution::Edge => {
            let per = k / 2;
            let xs: Vec<f64> = (0..per).map(|i| i as f64 / (per - 1) as f64).collect();
            xs.iter()
                .map(|&x| Point::new(x, 0.0))
                .chain(xs.iter().map(|&x| Point::new(x, 1.0)))
                .collect()
        }
        Distribution::Center => {
            let m = k - 4;
            let mut pts = corners().to_vec();
            pts.extend((1..=m).map(|i| Point::new(i as f64 / (m + 1) as f64, 0.5)));
            pts
        }
        Distribution::Cross => {
            let mut pts = corners().to_vec();
            pts.extend(cross_interior(k - 4));
            pts
        }
    };
    let cfg = FiducialConfig { distribution, fiducials };
    let cond = system_condition(&cfg);
    if !(cond < MAX_SYSTEM_CONDITION) {
        return Err(Error::Config(format!(
            "fiducial layout {distribution}/{k} is ill-conditioned (condition {cond:.3e})"
        )));
    }
    Ok(cfg)
}

/// Condition number of the `(k+3)×(k+3)` interpolation matrix
/// `[[R, P], [Pᵀ, 0]]` with `R_ij = r(|f_i - f_j|)` and `P_i = [1, x_i, y_i]`.
pub fn system_condition(cfg: &FiducialConfig) -> f64 {
    let k = cfg.k();
    let f = cfg.fiducials();
    let mut m = DMatrix::<f64>::zeros(k + 3, k + 3);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = radial(f[i].dist(f[j]));
        }
        let row = [1.0, f[i].x, f[i].y];
        for (c, v) in row.into_iter().enumerate() {
            m[(i, k + c)] = v;
            m[(k + c, i)] = v;
        }
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
