use nalgebra::{DMatrix, Matrix2xX};

use super::{ba_loss, corner_loss, BorderMask};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::tps::{BasisGrid, TpsParams, DEFAULT_BOUNDARY_COLS};

pub const DEFAULT_STEPS: usize = 200;

/// Gradient descent on `L_BA + L_cor` over the parameter matrix.
#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    pub steps: usize,
    /// Initial step size; decays linearly to a tenth of this value.
    pub learning_rate: f64,
    /// Measure steps in decoded-outline space: the parameter gradient is
    /// multiplied by `(Φ Φᵀ / n + εI)⁻¹`, `Φ` being the outline basis.
    pub precondition: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { steps: DEFAULT_STEPS, learning_rate: 4.0, precondition: true }
    }
}

#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub params: TpsParams,
    /// Loss before each step and after the last.
    pub losses: Vec<f64>,
    pub initial_distance: f64,
    pub final_distance: f64,
}

/// Alignment of a decoded boundary to one annotated instance.
#[derive(Debug, Clone)]
pub struct AlignmentProblem {
    // basis column of every outline point, outline order
    phi: DMatrix<f64>,
    corner_idx: [usize; 4],
    pub mask: BorderMask,
    pub gt_corners: [Point; 4],
    pub gt_boundary: Polygon,
}

/// Mean distance from each point to the closed polygon boundary.
pub fn mean_boundary_distance(points: &[Point], gt: &Polygon) -> f64 {
    points.iter().map(|&p| gt.boundary_distance(p)).sum::<f64>() / points.len() as f64
}

impl AlignmentProblem {
    /// Uses the default 66-point outline of `params`' configuration.
    pub fn new(
        params: &TpsParams,
        mask: BorderMask,
        gt_corners: [Point; 4],
        gt_boundary: Polygon,
    ) -> Result<Self> {
        let cols = DEFAULT_BOUNDARY_COLS;
        let grid = BasisGrid::new(params.config(), 2, cols)?;
        let lattice = grid.phi();
        let col = |j: usize| lattice.column(j).into_owned();
        let mut columns: Vec<_> = (0..cols).map(col).collect();
        columns.push((col(cols - 1) + col(2 * cols - 1)) * 0.5);
        columns.extend((cols..2 * cols).rev().map(col));
        columns.push((col(cols) + col(0)) * 0.5);
        let phi = DMatrix::from_columns(&columns);
        let corner_idx = [0, cols - 1, cols + 1, 2 * cols];
        Ok(Self { phi, corner_idx, mask, gt_corners, gt_boundary })
    }

    fn point(&self, t: &Matrix2xX<f64>, j: usize) -> Point {
        let p = t * self.phi.column(j);
        Point::new(p[0], p[1])
    }

    /// Decoded outline points for a parameter matrix.
    pub fn boundary(&self, t: &Matrix2xX<f64>) -> Vec<Point> {
        let pts = t * &self.phi;
        pts.column_iter().map(|c| Point::new(c[0], c[1])).collect()
    }

    /// Loss and its gradient with respect to every entry of `t`.
    pub fn loss_and_grad(&self, t: &Matrix2xX<f64>) -> Result<(f64, Matrix2xX<f64>)> {
        if t.ncols() != self.phi.nrows() {
            return Err(Error::Config("parameter matrix does not match the basis".into()));
        }
        let pts = self.boundary(t);
        let ba = ba_loss(&self.mask, &pts)?;
        let corners = self.corner_idx.map(|j| self.point(t, j));
        let cor = corner_loss(&corners, &self.gt_corners);
        let mut grad = Matrix2xX::zeros(t.ncols());
        let contributions = ba.grads.iter().enumerate().chain(self.corner_idx.iter().copied().zip(cor.grads.iter()));
        for (j, g) in contributions {
            let phi = self.phi.column(j);
            for c in 0..t.ncols() {
                grad[(0, c)] += g.x * phi[c];
                grad[(1, c)] += g.y * phi[c];
            }
        }
        Ok((ba.loss + cor.loss, grad))
    }

    /// Per-column standard deviations that move each decoded outline point
    /// by `sigma_px` RMS when every entry of column `j` gets independent
    /// Gaussian noise of deviation `scales[j]`.
    pub fn noise_scales(&self, sigma_px: f64) -> Vec<f64> {
        let n_params = self.phi.nrows() as f64;
        self.phi
            .row_iter()
            .map(|row| sigma_px / (row.norm_squared() / row.len() as f64 * n_params).sqrt())
            .collect()
    }

    fn preconditioner(&self) -> Result<DMatrix<f64>> {
        let n = self.phi.ncols() as f64;
        let mut g = &self.phi * self.phi.transpose() / n;
        let eps = 1e-6 * g.diagonal().max();
        for i in 0..g.nrows() {
            g[(i, i)] += eps;
        }
        g.try_inverse().ok_or_else(|| Error::Config("outline basis is singular".into()))
    }

    pub fn descend(&self, start: &TpsParams, opts: DescentOptions) -> Result<DescentTrace> {
        let mut t = start.matrix().clone();
        let precond = if opts.precondition { Some(self.preconditioner()?) } else { None };
        let initial_distance = mean_boundary_distance(&self.boundary(&t), &self.gt_boundary);
        let mut losses = Vec::with_capacity(opts.steps + 1);
        for step in 0..opts.steps {
            let (loss, grad) = self.loss_and_grad(&t)?;
            losses.push(loss);
            let frac = step as f64 / opts.steps.max(1) as f64;
            let lr = opts.learning_rate * (1.0 - 0.9 * frac);
            match &precond {
                Some(p) => t -= grad * p * lr,
                None => t -= grad * lr,
            }
        }
        losses.push(self.loss_and_grad(&t)?.0);
        let final_distance = mean_boundary_distance(&self.boundary(&t), &self.gt_boundary);
        Ok(DescentTrace {
            params: TpsParams::new(start.config().clone(), t)?,
            losses,
            initial_distance,
            final_distance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, make_correspondences, text_height, SyntheticSpec};
    use crate::losses::make_border_mask;
    use crate::tps::{fit, make_fiducials, Distribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution as _, Normal};

    fn problem(seed: u64) -> (AlignmentProblem, TpsParams) {
        let spec = SyntheticSpec { text_height: 16.0, seed, ..Default::default() };
        let s = generate_synthetic(&spec).unwrap();
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let fitted = fit(&cfg, &make_correspondences(&s.split, 32).unwrap(), 1e-8).unwrap().params;
        let (w, h) = (s.image_size.0.ceil() as usize, s.image_size.1.ceil() as usize);
        let height = text_height(&s.split).unwrap();
        let mask = make_border_mask(&s.instance.polygon, height, w, h, 0.6, 0.8).unwrap();
        let p = AlignmentProblem::new(&fitted, mask, s.split.corners(), s.instance.polygon.clone()).unwrap();
        (p, fitted)
    }

    #[test]
    fn noise_scales_give_requested_rms() {
        let (p, fitted) = problem(1);
        let scales = p.noise_scales(3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = p.boundary(fitted.matrix());
        let mut sq = 0.0;
        let trials = 400;
        for _ in 0..trials {
            let mut t = fitted.matrix().clone();
            for (j, s) in scales.iter().enumerate() {
                let n = Normal::new(0.0, *s).unwrap();
                t[(0, j)] += n.sample(&mut rng);
                t[(1, j)] += n.sample(&mut rng);
            }
            let moved = p.boundary(&t);
            sq += base.iter().zip(&moved).map(|(a, b)| a.dist(*b).powi(2)).sum::<f64>() / base.len() as f64;
        }
        // per-axis deviation of 3 px gives a squared displacement of 2 · 9
        let rms = (sq / trials as f64 / 2.0).sqrt();
        assert!((rms - 3.0).abs() < 0.3, "rms {rms}");
    }

    #[test]
    fn descent_recovers_perturbed_fit() {
        let (p, fitted) = problem(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = fitted.matrix().clone();
        for (j, s) in p.noise_scales(3.0).iter().enumerate() {
            let n = Normal::new(0.0, *s).unwrap();
            t[(0, j)] += n.sample(&mut rng);
            t[(1, j)] += n.sample(&mut rng);
        }
        let start = TpsParams::new(fitted.config().clone(), t).unwrap();
        let trace = p.descend(&start, DescentOptions::default()).unwrap();
        assert_eq!(trace.losses.len(), DEFAULT_STEPS + 1);
        assert!(trace.losses.last().unwrap() < &trace.losses[0]);
        assert!(trace.final_distance < 0.5 * trace.initial_distance, "{trace:?}");
    }

    #[test]
    fn gradient_matches_finite_difference_in_params() {
        let (p, fitted) = problem(2);
        let mut t = fitted.matrix().clone();
        t[(0, 0)] += 1.3;
        t[(1, 4)] -= 0.7;
        let (_, g) = p.loss_and_grad(&t).unwrap();
        let h = 1e-6;
        for (r, c) in [(0, 0), (1, 0), (0, 1), (1, 2), (0, 5), (1, 9)] {
            let mut plus = t.clone();
            let mut minus = t.clone();
            plus[(r, c)] += h;
            minus[(r, c)] -= h;
            let numeric = (p.loss_and_grad(&plus).unwrap().0 - p.loss_and_grad(&minus).unwrap().0) / (2.0 * h);
            assert!((numeric - g[(r, c)]).abs() <= 1e-4 * numeric.abs().max(1e-3), "{r},{c}: {numeric} vs {}", g[(r, c)]);
        }
    }
}
