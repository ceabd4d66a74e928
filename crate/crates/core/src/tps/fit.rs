use nalgebra::{DMatrix, Matrix2xX};
use serde::{Deserialize, Serialize};

use super::fiducials::FiducialConfig;
use super::params::{fill_basis, TpsParams};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub const DEFAULT_REGULARIZATION: f64 = 1e-8;
/// Above this (design-matrix) condition number a fit is rejected.
pub const MAX_FIT_CONDITION: f64 = 1e12;
/// Normal equations are used while their condition stays below this.
pub const NORMAL_EQUATIONS_LIMIT: f64 = 1e10;
const REFINEMENT_STEPS: usize = 2;

/// Paired locations: `source[j]` on the unit rectangle corresponds to
/// `target[j]` in the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondences {
    pub source: Vec<Point>,
    pub target: Vec<Point>,
}

impl Correspondences {
    pub fn new(source: Vec<Point>, target: Vec<Point>) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::Config(format!(
                "{} source points but {} targets",
                source.len(),
                target.len()
            )));
        }
        Ok(Self { source, target })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.source.iter().copied().zip(self.target.iter().copied())
    }
}

/// Which factorization produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Cholesky,
    PivotedQr,
}

#[derive(Debug, Clone)]
pub struct TpsFit {
    pub params: TpsParams,
    /// Root-mean-square distance between fitted and target points.
    pub rms_residual: f64,
    pub max_residual: f64,
    /// Condition number of the (regularized) design matrix.
    pub condition: f64,
    pub solver: Solver,
}

/// Least-squares fit of the parameter matrix to the correspondences,
/// minimizing `Σ‖T φ(s_j) − t_j‖² + λ ‖w‖²` where the ridge term touches
/// only the local weights.
pub fn fit(cfg: &FiducialConfig, corr: &Correspondences, regularization: f64) -> Result<TpsFit> {
    let n = cfg.param_cols();
    let k = cfg.k();
    let m = corr.len();
    if m < n {
        return Err(Error::Config(format!(
            "need at least {n} correspondences for k = {k}, got {m}"
        )));
    }
    if !(regularization >= 0.0 && regularization.is_finite()) {
        return Err(Error::Config(format!("regularization must be non-negative, got {regularization}")));
    }
    if corr.iter().any(|(s, t)| !s.is_finite() || !t.is_finite()) {
        return Err(Error::Config("non-finite correspondence".into()));
    }

    let rows = if regularization > 0.0 { m + k } else { m };
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut b = DMatrix::<f64>::zeros(rows, 2);
    let mut buf = Vec::with_capacity(n);
    for (j, (s, t)) in corr.iter().enumerate() {
        fill_basis(cfg, s, &mut buf);
        for (c, v) in buf.iter().enumerate() {
            a[(j, c)] = *v;
        }
        b[(j, 0)] = t.x;
        b[(j, 1)] = t.y;
    }
    if regularization > 0.0 {
        let s = regularization.sqrt();
        for i in 0..k {
            a[(m + i, 3 + i)] = s;
        }
    }

    let sv = a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_FIT_CONDITION) {
        return Err(Error::SingularFit { condition, limit: MAX_FIT_CONDITION });
    }

    let normal = a.transpose() * &a;
    let rhs = a.transpose() * &b;
    let (solution, solver) = match (condition * condition <= NORMAL_EQUATIONS_LIMIT)
        .then(|| normal.cholesky())
        .flatten()
    {
        Some(chol) => {
            // iterative refinement against the unsquared system
            let mut x = chol.solve(&rhs);
            for _ in 0..REFINEMENT_STEPS {
                let r = &b - &a * &x;
                x += chol.solve(&(a.transpose() * r));
            }
            (x, Solver::Cholesky)
        }
        None => (solve_pivoted_qr(&a, &b)?, Solver::PivotedQr),
    };

    // solution is n×2; parameters are its transpose
    let t = Matrix2xX::from_fn(n, |r, c| solution[(c, r)]);
    let params = TpsParams::new(cfg.clone(), t)?;

    let mut sq = 0.0;
    let mut max = 0.0f64;
    for (j, (_, target)) in corr.iter().enumerate() {
        let row = a.row(j);
        let fitted = Point::new(
            (0..n).map(|c| row[c] * params.matrix()[(0, c)]).sum(),
            (0..n).map(|c| row[c] * params.matrix()[(1, c)]).sum(),
        );
        let d = fitted.dist(target);
        sq += d * d;
        max = max.max(d);
    }
    Ok(TpsFit {
        params,
        rms_residual: (sq / m as f64).sqrt(),
        max_residual: max,
        condition,
        solver,
    })
}

/// Least squares via `A P = Q R`: `x = P R⁻¹ Qᵀ b`.
fn solve_pivoted_qr(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.ncols();
    let qr = a.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let qtb = q.transpose() * b;
    let mut x = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::SingularFit { condition: f64::INFINITY, limit: MAX_FIT_CONDITION })?;
    qr.p().inv_permute_rows(&mut x);
    debug_assert_eq!(x.nrows(), n);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tps::{decode, make_fiducials, Distribution};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn boundary_layout(per_side: usize) -> Vec<Point> {
        let mut s = Vec::new();
        for y in [0.0, 1.0] {
            for j in 0..per_side {
                s.push(Point::new(j as f64 / (per_side - 1) as f64, y));
            }
        }
        s
    }

    fn random_params(cfg: &FiducialConfig, rng: &mut ChaCha8Rng) -> TpsParams {
        let n = cfg.param_cols();
        let t = Matrix2xX::from_fn(n, |r, c| match c {
            0 => rng.random_range(-50.0..50.0),
            1 => if r == 0 { rng.random_range(50.0..150.0) } else { rng.random_range(-10.0..10.0) },
            2 => if r == 1 { rng.random_range(10.0..40.0) } else { rng.random_range(-10.0..10.0) },
            _ => rng.random_range(-0.2..0.2),
        });
        TpsParams::new(cfg.clone(), t).unwrap()
    }

    #[test]
    fn exact_warp_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in Distribution::ALL {
            let cfg = make_fiducials(d, 8).unwrap();
            let truth = random_params(&cfg, &mut rng);
            let src = boundary_layout(32);
            let tgt = src.iter().map(|&p| truth.apply(p)).collect();
            let f = fit(&cfg, &Correspondences::new(src, tgt).unwrap(), 0.0).unwrap();
            assert!(f.max_residual < 1e-8, "{d}: residual {}", f.max_residual);
            let err = (f.params.matrix() - truth.matrix()).amax();
            assert!(err < 1e-6, "{d}: parameter error {err}, cond {}", f.condition);
        }
    }

    #[test]
    fn affine_target_gives_zero_weights() {
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let src = boundary_layout(16);
        let map = |p: Point| Point::new(12.0 + 80.0 * p.x - 5.0 * p.y, 40.0 + 9.0 * p.x + 25.0 * p.y);
        let tgt = src.iter().map(|&p| map(p)).collect();
        let f = fit(&cfg, &Correspondences::new(src, tgt).unwrap(), DEFAULT_REGULARIZATION).unwrap();
        assert!(f.params.max_local_weight() < 1e-6);
        let t = f.params.matrix();
        for (got, exp) in [(t[(0, 0)], 12.0), (t[(0, 1)], 80.0), (t[(0, 2)], -5.0), (t[(1, 0)], 40.0), (t[(1, 1)], 9.0), (t[(1, 2)], 25.0)] {
            assert!((got - exp).abs() < 1e-6);
        }
    }

    #[test]
    fn square_system_interpolates() {
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src: Vec<Point> = (0..11)
            .map(|_| Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        let tgt: Vec<Point> = (0..11)
            .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..30.0)))
            .collect();
        let f = fit(&cfg, &Correspondences::new(src, tgt).unwrap(), 0.0).unwrap();
        assert!(f.max_residual < 1e-9, "residual {}", f.max_residual);
    }

    #[test]
    fn too_few_or_degenerate_correspondences() {
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let src: Vec<Point> = (0..10).map(|i| Point::new(i as f64 / 9.0, 0.0)).collect();
        let corr = Correspondences::new(src.clone(), src).unwrap();
        assert!(matches!(fit(&cfg, &corr, 0.0), Err(Error::Config(_))));
        // all sources on a single line: the y column is zero
        let src: Vec<Point> = (0..20).map(|i| Point::new(i as f64 / 19.0, 0.0)).collect();
        let corr = Correspondences::new(src.clone(), src).unwrap();
        assert!(matches!(fit(&cfg, &corr, 0.0), Err(Error::SingularFit { .. })));
    }

    #[test]
    fn both_solvers_agree() {
        let cfg = make_fiducials(Distribution::Cross, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src: Vec<Point> = (0..40)
            .map(|_| Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        let tgt: Vec<Point> = src.iter().map(|p| Point::new(p.x * 3.0 + p.y * p.y, p.y - p.x * p.x)).collect();
        let mut a = DMatrix::zeros(40, 11);
        let mut b = DMatrix::zeros(40, 2);
        let mut buf = Vec::new();
        for j in 0..40 {
            fill_basis(&cfg, src[j], &mut buf);
            for c in 0..11 {
                a[(j, c)] = buf[c];
            }
            b[(j, 0)] = tgt[j].x;
            b[(j, 1)] = tgt[j].y;
        }
        let qr = solve_pivoted_qr(&a, &b).unwrap();
        let f = fit(&cfg, &Correspondences::new(src, tgt).unwrap(), 0.0).unwrap();
        for r in 0..2 {
            for c in 0..11 {
                assert!((f.params.matrix()[(r, c)] - qr[(c, r)]).abs() < 1e-7);
            }
        }
        let _ = decode(&f.params, 2, 2).unwrap();
    }
}
