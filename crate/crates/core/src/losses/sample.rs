use super::Raster;
use crate::geometry::Point;

/// Clamps one coordinate into `[0, n-1]` and picks the interpolation cell.
/// Returns `(lower index, fraction, inside)`. Exact integer coordinates use
/// the cell to their right, except on the last node.
fn locate(v: f64, n: usize) -> (usize, f64, bool) {
    let max = (n - 1) as f64;
    if n == 1 {
        return (0, 0.0, false);
    }
    let inside = (0.0..=max).contains(&v);
    let c = v.clamp(0.0, max);
    let i = (c.floor() as usize).min(n - 2);
    (i, c - i as f64, inside)
}

/// Bilinear interpolation of `raster` at `p` together with the analytic
/// gradient of the interpolant.
///
/// Cell `(col, row)` sits at `(col, row)`. Coordinates outside
/// `[0, w-1] × [0, h-1]` are clamped to the border and the gradient along
/// each clamped axis is zero.
pub fn bilinear_sample(raster: &Raster, p: Point) -> (f64, Point) {
    let (x0, fx, in_x) = locate(p.x, raster.width());
    let (y0, fy, in_y) = locate(p.y, raster.height());
    let x1 = (x0 + 1).min(raster.width() - 1);
    let y1 = (y0 + 1).min(raster.height() - 1);
    let v00 = raster.get(x0, y0);
    let v10 = raster.get(x1, y0);
    let v01 = raster.get(x0, y1);
    let v11 = raster.get(x1, y1);
    let value = (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 + fx * fy * v11;
    let gx = if in_x { (1.0 - fy) * (v10 - v00) + fy * (v11 - v01) } else { 0.0 };
    let gy = if in_y { (1.0 - fx) * (v01 - v00) + fx * (v11 - v10) } else { 0.0 };
    (value, Point::new(gx, gy))
}
