use super::TextInstance;
use crate::error::{Error, Result};
use crate::geometry::{perspective_from_left_edge, Homography, Point};

/// Smallest canvas anchored at the origin that holds every instance.
pub fn corpus_canvas(instances: &[TextInstance]) -> Result<(f64, f64)> {
    if instances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (w, h) = instances
        .iter()
        .map(|i| i.polygon.bounds().1)
        .fold((0.0f64, 0.0f64), |(w, h), p| (w.max(p.x), h.max(p.y)));
    Ok((w.max(1.0), h.max(1.0)))
}

/// Perspective of a `canvas` rotated by `angle_deg` about its left edge,
/// with the focal length equal to the canvas width.
pub fn canvas_perspective(angle_deg: f64, canvas: (f64, f64)) -> Result<Homography> {
    perspective_from_left_edge(angle_deg, canvas.0, canvas.1, canvas.0)
}

/// Applies the canvas perspective to every instance. Ids gain a
/// `_p{angle}` suffix unless the angle is 0.
pub fn augment_perspective(instances: &[TextInstance], angle_deg: f64, canvas: (f64, f64)) -> Result<Vec<TextInstance>> {
    let hom = canvas_perspective(angle_deg, canvas)?;
    instances
        .iter()
        .map(|inst| {
            let pts: Vec<Point> = inst.polygon.points().iter().map(|&p| hom.apply(p)).collect();
            let id = if angle_deg == 0.0 { inst.id.clone() } else { format!("{}_p{angle_deg}", inst.id) };
            TextInstance::new(id, pts, inst.transcript.clone(), inst.source)
        })
        .collect()
}
