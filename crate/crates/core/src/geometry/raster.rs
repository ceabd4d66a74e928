use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bounds, Polygon};
use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION: usize = 512;
pub const MIN_RESOLUTION: usize = 8;

/// Areas estimated by [`rasterized_overlap`], in squared input units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub area_a: f64,
    pub area_b: f64,
    pub intersection: f64,
    pub union: f64,
}

impl Overlap {
    /// Intersection over union; `None` when the union is empty.
    pub fn iou(&self) -> Option<f64> {
        (self.union > 0.0).then(|| self.intersection / self.union)
    }
}

/// Cell-index spans `[start, end]` covered by a polygon on one scanline.
fn row_spans(poly: &Polygon, y: f64, x0: f64, cell: f64, nx: usize, spans: &mut Vec<(usize, usize)>) {
    spans.clear();
    let mut xs: Vec<f64> = Vec::new();
    let push = |lo: f64, hi: f64, spans: &mut Vec<(usize, usize)>| {
        let start = ((lo - x0) / cell - 0.5).ceil().max(0.0);
        let end = ((hi - x0) / cell - 0.5).floor();
        if end < 0.0 || start > end {
            return;
        }
        let end = (end as usize).min(nx - 1);
        let start = start as usize;
        if start <= end {
            spans.push((start, end));
        }
    };
    for (a, b) in poly.edges() {
        if a.y == y && b.y == y {
            push(a.x.min(b.x), a.x.max(b.x), spans);
        } else if (a.y <= y) != (b.y <= y) {
            xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
    }
    xs.sort_by(f64::total_cmp);
    for pair in xs.chunks_exact(2) {
        push(pair[0], pair[1], spans);
    }
}

fn fill(mask: &mut [bool], spans: &[(usize, usize)]) {
    mask.iter_mut().for_each(|m| *m = false);
    for &(s, e) in spans {
        mask[s..=e].iter_mut().for_each(|m| *m = true);
    }
}

/// Estimates the areas of `a`, `b`, their intersection and union by sampling
/// cell centres of a regular grid over the joint bounding box.
///
/// `resolution` is the number of cells along the longer side of that box.
/// Counting is done with integers per row so the result does not depend on
/// how rows are scheduled across threads.
pub fn rasterized_overlap(a: &Polygon, b: &Polygon, resolution: usize) -> Result<Overlap> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Config(format!(
            "raster resolution {resolution} is below the minimum of {MIN_RESOLUTION}"
        )));
    }
    let (lo_a, hi_a) = a.bounds();
    let (lo_b, hi_b) = b.bounds();
    let (lo, hi) = bounds(&[lo_a, hi_a, lo_b, hi_b]);
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let side = w.max(h);
    if !(side > 0.0) {
        return Err(Error::DegenerateShape("joint bounding box is empty".into()));
    }
    let cell = side / resolution as f64;
    let nx = ((w / cell).ceil() as usize).max(1);
    let ny = ((h / cell).ceil() as usize).max(1);

    let (ca, cb, ci) = (0..ny)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), vec![false; nx], vec![false; nx]),
            |(spans_a, spans_b, mask_a, mask_b), row| {
                let y = lo.y + (row as f64 + 0.5) * cell;
                row_spans(a, y, lo.x, cell, nx, spans_a);
                row_spans(b, y, lo.x, cell, nx, spans_b);
                fill(mask_a, spans_a);
                fill(mask_b, spans_b);
                let mut counts = (0u64, 0u64, 0u64);
                for (&ia, &ib) in mask_a.iter().zip(mask_b.iter()) {
                    counts.0 += ia as u64;
                    counts.1 += ib as u64;
                    counts.2 += (ia && ib) as u64;
                }
                counts
            },
        )
        .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));

    let cell_area = cell * cell;
    let (area_a, area_b, intersection) = (
        ca as f64 * cell_area,
        cb as f64 * cell_area,
        ci as f64 * cell_area,
    );
    Ok(Overlap {
        area_a,
        area_b,
        intersection,
        union: area_a + area_b - intersection,
    })
}

/// Samples a polygon's indicator on an integer-centred raster of the given
/// dimensions: cell `(col, row)` is centred at `(col, row)`.
pub(crate) fn rasterize_indicator(poly: &Polygon, width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; width * height];
    let mut spans = Vec::new();
    for row in 0..height {
        // centres sit at integer coordinates: shift the origin by half a cell
        row_spans(poly, row as f64, -0.5, 1.0, width, &mut spans);
        for &(s, e) in &spans {
            out[row * width + s..=row * width + e].iter_mut().for_each(|m| *m = true);
        }
    }
    out
}
