use std::fmt::Write;

use base64::Engine;
use image::{GrayImage, ImageFormat};

use super::{quantize_raster, TextInstance};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::losses::Raster;

/// One instance and whatever should be drawn over it.
#[derive(Debug, Clone, Default)]
pub struct SvgItem<'a> {
    pub instance: Option<&'a TextInstance>,
    /// Fitted boundary, drawn as a red polyline.
    pub fitted: Option<Vec<Point>>,
    /// Control points or fiducial images, drawn as blue dots.
    pub control_points: Vec<Point>,
    /// Grayscale raster drawn underneath, cell `(c, r)` centred at `(c, r)`.
    pub mask: Option<&'a Raster>,
}

impl<'a> SvgItem<'a> {
    pub fn new(instance: &'a TextInstance) -> Self {
        Self { instance: Some(instance), ..Default::default() }
    }
}

/// Encodes a raster as an 8-bit grayscale PNG with the PGM quantization.
pub fn raster_png(r: &Raster) -> Result<Vec<u8>> {
    let img = GrayImage::from_raw(r.width() as u32, r.height() as u32, quantize_raster(r))
        .ok_or_else(|| Error::Image("raster size does not match its data".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))?;
    Ok(out.into_inner())
}

fn points_attr(pts: &[Point]) -> String {
    let mut s = String::new();
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.3},{:.3}", p.x, p.y);
    }
    s
}

/// Standalone SVG 1.1 document: ground truth in green, fitted boundaries in
/// red, control points in blue.
pub fn render_svg(items: &[SvgItem<'_>], width: f64, height: f64) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let b64 = base64::engine::general_purpose::STANDARD;
    for item in items {
        if let Some(m) = item.mask {
            let png = b64.encode(raster_png(m)?);
            let _ = writeln!(
                s,
                r#"  <image x="-0.5" y="-0.5" width="{}" height="{}" image-rendering="pixelated" href="data:image/png;base64,{png}"/>"#,
                m.width(),
                m.height()
            );
        }
        if let Some(inst) = item.instance {
            let _ = writeln!(
                s,
                r#"  <polygon class="gt" data-id="{}" points="{}" fill="none" stroke="green" stroke-width="1"/>"#,
                escape(&inst.id),
                points_attr(inst.polygon.points())
            );
        }
        if let Some(fit) = &item.fitted {
            let _ = writeln!(
                s,
                r#"  <polyline class="fit" points="{}" fill="none" stroke="red" stroke-width="1"/>"#,
                points_attr(fit)
            );
        }
        for p in &item.control_points {
            let _ = writeln!(s, r#"  <circle class="ctrl" cx="{:.3}" cy="{:.3}" r="2" fill="blue"/>"#, p.x, p.y);
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{decode_pgm, encode_pgm, Source};

    fn rect() -> TextInstance {
        let pts = vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(10.0, 4.0), Point::new(0.0, 4.0)];
        TextInstance::new("r<1>", pts, None, Source::Generic).unwrap()
    }

    #[test]
    fn plain_rectangle() {
        let r = rect();
        let svg = render_svg(&[SvgItem::new(&r)], 20.0, 10.0).unwrap();
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("stroke=\"green\""));
        assert!(svg.contains("r&lt;1&gt;"));
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn fitted_overlay() {
        let r = rect();
        let fit: Vec<Point> = (0..66).map(|i| Point::new(i as f64, 1.0)).collect();
        let item = SvgItem { fitted: Some(fit), control_points: vec![Point::new(1.0, 1.0)], ..SvgItem::new(&r) };
        let svg = render_svg(&[item], 20.0, 10.0).unwrap();
        let line = svg.lines().find(|l| l.contains("<polyline")).unwrap();
        assert!(line.contains("stroke=\"red\""));
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 66);
        assert_eq!(svg.matches("fill=\"blue\"").count(), 1);
    }

    #[test]
    fn embedded_mask_matches_pgm() {
        let vals: Vec<f64> = (0..48).map(|i| i as f64 / 47.0).collect();
        let m = Raster::new(8, 6, vals).unwrap();
        let r = rect();
        let svg = render_svg(&[SvgItem { mask: Some(&m), ..SvgItem::new(&r) }], 8.0, 6.0).unwrap();
        let b64 = svg.split("base64,").nth(1).unwrap().split('"').next().unwrap();
        let png = base64::engine::general_purpose::STANDARD.decode(b64).unwrap();
        let img = image::load_from_memory_with_format(&png, ImageFormat::Png).unwrap().into_luma8();
        let pgm = decode_pgm(&encode_pgm(&m)).unwrap();
        let from_pgm: Vec<u8> = pgm.values().iter().map(|v| (v * 255.0).round() as u8).collect();
        assert_eq!(img.into_raw(), from_pgm);
    }
}
