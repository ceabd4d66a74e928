//! Rasterized IoU and tightness-aware IoU (TIoU) scoring of fitted shapes.
//!
//! TIoU here uses multiplicative penalties on paired shapes: with
//! completeness `Ct = |P ∩ G| / |G|` and compactness `Cp = |P ∩ G| / |P|`,
//! the recall term is `IoU · Ct` and the precision term `IoU · Cp`.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bezier::{bezier_decode, bezier_fit, DEFAULT_DEGREE};
use crate::dataio::{make_correspondences, split_sides, TextInstance, DEFAULT_PER_SIDE};
use crate::error::{Error, Result};
use crate::geometry::{rasterized_overlap, Overlap, Polygon, DEFAULT_RESOLUTION};
use crate::tps::{decode_boundary, fit, FiducialConfig, DEFAULT_BOUNDARY_COLS, DEFAULT_REGULARIZATION};

fn overlap(pred: &Polygon, gt: &Polygon, resolution: usize) -> Result<Overlap> {
    let o = rasterized_overlap(pred, gt, resolution)?;
    if o.area_a == 0.0 && o.area_b == 0.0 {
        return Err(Error::DegenerateShape("both shapes have zero rasterized area".into()));
    }
    Ok(o)
}

pub fn iou(pred: &Polygon, gt: &Polygon, resolution: usize) -> Result<f64> {
    let o = overlap(pred, gt, resolution)?;
    Ok(o.intersection / o.union)
}

/// `(IoU · Ct, IoU · Cp)` for a prediction paired with its ground truth.
pub fn tiou(pred: &Polygon, gt: &Polygon, resolution: usize) -> Result<(f64, f64)> {
    let o = overlap(pred, gt, resolution)?;
    if o.area_b == 0.0 {
        return Err(Error::DegenerateShape("ground truth has zero rasterized area".into()));
    }
    Ok(terms(&o))
}

fn terms(o: &Overlap) -> (f64, f64) {
    let iou = o.intersection / o.union;
    let ct = o.intersection / o.area_b;
    let cp = if o.area_a > 0.0 { o.intersection / o.area_a } else { 0.0 };
    (iou * ct, iou * cp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub iou: f64,
    pub tiou_r_term: f64,
    pub tiou_p_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    #[serde(flatten)]
    pub score: InstanceScore,
    /// RMS distance of the fitted curve to the correspondences, when fitted.
    pub rms_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Aggregate {
    pub iou_mean: f64,
    pub tiou_recall: f64,
    pub tiou_precision: f64,
    pub tiou_hmean: f64,
    /// Fraction of instances with IoU ≥ 0.5.
    pub iou_at_50: f64,
    /// Fraction of instances with IoU ≥ 0.7.
    pub iou_at_70: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub per_instance: Vec<InstanceRecord>,
    pub aggregate: Aggregate,
    pub resolution: usize,
    pub failures: Vec<Failure>,
}

/// Harmonic mean, zero when either input is zero.
pub fn hmean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn sorted_mean(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Macro-averages instance scores; every instance weighs the same.
pub fn aggregate(scores: &[InstanceScore]) -> Aggregate {
    let col = |f: fn(&InstanceScore) -> f64| sorted_mean(scores.iter().map(f).collect());
    let rate = |thr: f64| sorted_mean(scores.iter().map(|s| (s.iou >= thr) as u8 as f64).collect());
    let tiou_recall = col(|s| s.tiou_r_term);
    let tiou_precision = col(|s| s.tiou_p_term);
    Aggregate {
        iou_mean: col(|s| s.iou),
        tiou_recall,
        tiou_precision,
        tiou_hmean: hmean(tiou_recall, tiou_precision),
        iou_at_50: rate(0.5),
        iou_at_70: rate(0.7),
    }
}

impl FitReport {
    fn build(method: String, resolution: usize, results: Vec<(String, Result<(InstanceScore, Option<f64>)>)>) -> Result<Self> {
        let mut per_instance = Vec::new();
        let mut failures = Vec::new();
        for (id, r) in results {
            match r {
                Ok((score, rms_residual)) => per_instance.push(InstanceRecord { id, score, rms_residual }),
                Err(e @ (Error::Io(_) | Error::Json(_) | Error::Config(_))) => return Err(e),
                Err(e) => failures.push(Failure { id, reason: e.to_string() }),
            }
        }
        let scores: Vec<InstanceScore> = per_instance.iter().map(|r| r.score).collect();
        Ok(FitReport { method, aggregate: aggregate(&scores), per_instance, resolution, failures })
    }

    /// Mean RMS fitting residual over instances that report one.
    pub fn mean_residual(&self) -> Option<f64> {
        let v: Vec<f64> = self.per_instance.iter().filter_map(|r| r.rms_residual).collect();
        (!v.is_empty()).then(|| sorted_mean(v))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned one-row-per-method table.
    pub fn table(reports: &[&FitReport]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>5} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "method", "n", "fail", "IoU", "IoU@0.5", "IoU@0.7", "TIoU-R", "TIoU-P", "TIoU-H"
        );
        for r in reports {
            let a = &r.aggregate;
            let _ = writeln!(
                s,
                "{:<16} {:>5} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                r.method,
                r.per_instance.len(),
                r.failures.len(),
                a.iou_mean,
                a.iou_at_50,
                a.iou_at_70,
                a.tiou_recall,
                a.tiou_precision,
                a.tiou_hmean
            );
        }
        s
    }
}

fn score(pred: &Polygon, gt: &Polygon, resolution: usize) -> Result<InstanceScore> {
    let o = overlap(pred, gt, resolution)?;
    let (tiou_r_term, tiou_p_term) = terms(&o);
    Ok(InstanceScore { iou: o.intersection / o.union, tiou_r_term, tiou_p_term })
}

/// Scores predictions already paired with their ground truth by id.
pub fn evaluate_pairs(method: &str, pairs: &[(String, Polygon, Polygon)], resolution: usize) -> Result<FitReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let results = pairs
        .par_iter()
        .map(|(id, pred, gt)| (id.clone(), score(pred, gt, resolution).map(|s| (s, None))))
        .collect();
    FitReport::build(method.to_string(), resolution, results)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Tps(FiducialConfig),
    /// Cubic by default, i.e. 8 control points for the two sides.
    Bezier { degree: usize },
}

impl Representation {
    pub fn bezier() -> Self {
        Representation::Bezier { degree: DEFAULT_DEGREE }
    }

    pub fn name(&self) -> String {
        match self {
            Representation::Tps(cfg) => format!("tps-{}-k{}", cfg.distribution().name(), cfg.k()),
            Representation::Bezier { degree } => format!("bezier-{}", 2 * (degree + 1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub per_side: usize,
    pub regularization: f64,
    pub resolution: usize,
    /// Boundary samples per long side of the decoded shape.
    pub decode_cols: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            per_side: DEFAULT_PER_SIDE,
            regularization: DEFAULT_REGULARIZATION,
            resolution: DEFAULT_RESOLUTION,
            decode_cols: DEFAULT_BOUNDARY_COLS,
        }
    }
}

/// A decoded fit of one instance and its correspondence residual.
#[derive(Debug, Clone)]
pub struct FittedShape {
    pub boundary: Polygon,
    pub rms_residual: f64,
    pub max_residual: f64,
}

/// Splits, resamples, fits and decodes one annotation.
pub fn fit_instance(inst: &TextInstance, rep: &Representation, opts: &FitOptions) -> Result<FittedShape> {
    let split = split_sides(inst)?;
    let corr = make_correspondences(&split, opts.per_side)?;
    match rep {
        Representation::Tps(cfg) => {
            let f = fit(cfg, &corr, opts.regularization)?;
            Ok(FittedShape {
                boundary: decode_boundary(&f.params, opts.decode_cols)?,
                rms_residual: f.rms_residual,
                max_residual: f.max_residual,
            })
        }
        Representation::Bezier { degree } => {
            let f = bezier_fit(&corr, *degree)?;
            Ok(FittedShape {
                boundary: bezier_decode(&f.params, opts.decode_cols)?,
                rms_residual: f.rms_residual,
                max_residual: f.max_residual,
            })
        }
    }
}

/// Fits every instance with `rep` and scores the decoded shape against its
/// own annotation. Instances whose fit fails are listed in `failures` and
/// left out of the means.
pub fn fit_evaluate(corpus: &[TextInstance], rep: &Representation, opts: &FitOptions) -> Result<FitReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let results = corpus
        .par_iter()
        .map(|inst| {
            let r = fit_instance(inst, rep, opts).and_then(|f| {
                score(&f.boundary, &inst.polygon, opts.resolution).map(|s| (s, Some(f.rms_residual)))
            });
            (inst.id.clone(), r)
        })
        .collect();
    FitReport::build(rep.name(), opts.resolution, results)
}
