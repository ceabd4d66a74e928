use super::{bilinear_sample, BorderMask};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Decoded boundary points with the relaxed-mask value sampled at each.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySamples {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaLoss {
    pub loss: f64,
    /// Gradient of the loss with respect to each boundary point.
    pub grads: Vec<Point>,
    pub samples: BoundarySamples,
}

/// Border alignment loss `(1/|B|) Σ (1 − M'(p))` over boundary points `B`,
/// sampled bilinearly from the relaxed mask.
pub fn ba_loss(mask: &BorderMask, points: &[Point]) -> Result<BaLoss> {
    if points.is_empty() {
        return Err(Error::Config("border alignment loss needs at least one point".into()));
    }
    let inv = 1.0 / points.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(points.len());
    let mut values = Vec::with_capacity(points.len());
    for &p in points {
        let (v, g) = bilinear_sample(&mask.relaxed, p);
        loss += 1.0 - v;
        values.push(v);
        grads.push(g * -inv);
    }
    Ok(BaLoss {
        loss: loss * inv,
        grads,
        samples: BoundarySamples { points: points.to_vec(), values },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerLoss {
    pub loss: f64,
    pub grads: [Point; 4],
}

/// Mean Euclidean distance of four corners `(tl, tr, br, bl)` to their
/// targets. The gradient at an exactly coincident corner is zero.
pub fn corner_loss(pred: &[Point; 4], gt: &[Point; 4]) -> CornerLoss {
    let mut loss = 0.0;
    let mut grads = [Point::default(); 4];
    for i in 0..4 {
        let diff = pred[i] - gt[i];
        let d = diff.norm();
        loss += d;
        if d > 0.0 {
            grads[i] = diff * (0.25 / d);
        }
    }
    CornerLoss { loss: 0.25 * loss, grads }
}

/// Everything needed to score one instance in [`reg_loss`].
#[derive(Debug, Clone)]
pub struct RegInstance<'a> {
    /// Decoded boundary points.
    pub boundary: &'a [Point],
    /// Decoded corners `(tl, tr, br, bl)`.
    pub corners: [Point; 4],
    pub mask: &'a BorderMask,
    pub gt_corners: [Point; 4],
    /// Area of the ground-truth instance.
    pub area: f64,
}

/// Sum in ascending order so the total does not depend on input order.
pub(crate) fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Area-normalized regression loss averaged over instances:
/// `(1/N) Σ (L_BA + L_cor) / |Ω|`.
pub fn reg_loss(instances: &[RegInstance<'_>]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::Config("regression loss needs at least one instance".into()));
    }
    let mut terms = Vec::with_capacity(instances.len());
    for inst in instances {
        if !(inst.area > 0.0) {
            return Err(Error::DegenerateShape(format!("instance area {} is not positive", inst.area)));
        }
        let ba = ba_loss(inst.mask, inst.boundary)?.loss;
        let cor = corner_loss(&inst.corners, &inst.gt_corners).loss;
        terms.push((ba + cor) / inst.area);
    }
    Ok(sorted_sum(terms) / instances.len() as f64)
}
