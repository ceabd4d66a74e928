use nalgebra::{DMatrix, Matrix2x3, Matrix2xX};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::fiducials::{make_fiducials, radial_sq, Distribution, FiducialConfig};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

/// Samples per long side of the default decoded boundary, which has
/// 32 + 1 + 32 + 1 = 66 points.
pub const DEFAULT_BOUNDARY_COLS: usize = 32;

/// `φ(x, y) = [1, x, y, r(d_1), …, r(d_k)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEvaluation(pub Vec<f64>);

impl BasisEvaluation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Evaluates the basis vector at `p` (coordinates on the unit rectangle).
pub fn eval_basis(cfg: &FiducialConfig, p: Point) -> BasisEvaluation {
    let mut phi = Vec::with_capacity(cfg.param_cols());
    fill_basis(cfg, p, &mut phi);
    BasisEvaluation(phi)
}

pub(crate) fn fill_basis(cfg: &FiducialConfig, p: Point, out: &mut Vec<f64>) {
    out.clear();
    out.extend([1.0, p.x, p.y]);
    out.extend(cfg.fiducials().iter().map(|f| {
        let (dx, dy) = (p.x - f.x, p.y - f.y);
        radial_sq(dx * dx + dy * dy)
    }));
}

/// The `2×(k+3)` parameter matrix encoding one text shape. Row 0 maps to
/// image x, row 1 to image y; columns are `[c, a1, a2, w_1 … w_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TpsParams {
    t: Matrix2xX<f64>,
    config: FiducialConfig,
}

impl TpsParams {
    pub fn new(config: FiducialConfig, t: Matrix2xX<f64>) -> Result<Self> {
        if t.ncols() != config.param_cols() {
            return Err(Error::Config(format!(
                "parameter matrix has {} columns, configuration needs {}",
                t.ncols(),
                config.param_cols()
            )));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("parameter matrix has non-finite entries".into()));
        }
        Ok(Self { t, config })
    }

    /// Pure affine map `p ↦ offset + linear · p`, zero local weights.
    pub fn affine(config: FiducialConfig, offset: Point, linear: [[f64; 2]; 2]) -> Self {
        let mut t = Matrix2xX::zeros(config.param_cols());
        t[(0, 0)] = offset.x;
        t[(1, 0)] = offset.y;
        t[(0, 1)] = linear[0][0];
        t[(0, 2)] = linear[0][1];
        t[(1, 1)] = linear[1][0];
        t[(1, 2)] = linear[1][1];
        Self { t, config }
    }

    pub fn matrix(&self) -> &Matrix2xX<f64> {
        &self.t
    }

    pub fn config(&self) -> &FiducialConfig {
        &self.config
    }

    /// Maps one point of the unit rectangle to image coordinates.
    pub fn apply(&self, p: Point) -> Point {
        let phi = eval_basis(&self.config, p);
        self.apply_basis(phi.as_slice())
    }

    pub(crate) fn apply_basis(&self, phi: &[f64]) -> Point {
        let (mut x, mut y) = (0.0, 0.0);
        for (j, v) in phi.iter().enumerate() {
            x += self.t[(0, j)] * v;
            y += self.t[(1, j)] * v;
        }
        Point::new(x, y)
    }

    /// Images of the fiducial points; these play the role of control points.
    pub fn control_points(&self) -> Vec<Point> {
        self.config.fiducials().iter().map(|&f| self.apply(f)).collect()
    }

    /// Largest absolute local weight.
    pub fn max_local_weight(&self) -> f64 {
        self.t.columns(3, self.config.k()).amax()
    }
}

/// Splits parameters into the global affine block `[c | a1 | a2]` and the
/// local radial weights.
pub fn decompose(params: &TpsParams) -> (Matrix2x3<f64>, Matrix2xX<f64>) {
    let t = params.matrix();
    let affine = t.fixed_columns::<3>(0).into_owned();
    let local = t.columns(3, params.config().k()).into_owned();
    (affine, local)
}

/// Evaluates the affine and local parts separately and sums them.
pub fn decode_decomposed(params: &TpsParams, p: Point) -> Point {
    let (affine, local) = decompose(params);
    let ax = affine[(0, 0)] + affine[(0, 1)] * p.x + affine[(0, 2)] * p.y;
    let ay = affine[(1, 0)] + affine[(1, 1)] * p.x + affine[(1, 2)] * p.y;
    let (mut lx, mut ly) = (0.0, 0.0);
    for (i, f) in params.config().fiducials().iter().enumerate() {
        let r = super::fiducials::radial(p.dist(*f));
        lx += local[(0, i)] * r;
        ly += local[(1, i)] * r;
    }
    Point::new(ax + lx, ay + ly)
}

/// A `rows × cols` array of points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGrid {
    rows: usize,
    cols: usize,
    points: Vec<Point>,
}

impl ShapeGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn at(&self, row: usize, col: usize) -> Point {
        self.points[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[Point] {
        &self.points[row * self.cols..(row + 1) * self.cols]
    }

    /// Perimeter traversal: top row left→right, right column downwards,
    /// bottom row right→left, left column upwards. Corners appear once.
    pub fn boundary(&self) -> Vec<Point> {
        let (r, c) = (self.rows, self.cols);
        let mut out = Vec::with_capacity(2 * (r + c) - 4);
        out.extend_from_slice(self.row(0));
        out.extend((1..r - 1).map(|i| self.at(i, c - 1)));
        out.extend(self.row(r - 1).iter().rev());
        out.extend((1..r - 1).rev().map(|i| self.at(i, 0)));
        out
    }

    pub fn boundary_polygon(&self) -> Result<Polygon> {
        Polygon::new(self.boundary())
    }

    /// The four corners in `(tl, tr, br, bl)` order.
    pub fn corners(&self) -> [Point; 4] {
        let (r, c) = (self.rows, self.cols);
        [self.at(0, 0), self.at(0, c - 1), self.at(r - 1, c - 1), self.at(r - 1, 0)]
    }
}

/// Precomputed basis over a uniform lattice on the unit rectangle; decoding
/// any parameter matrix over it is a single matrix product.
#[derive(Debug, Clone)]
pub struct BasisGrid {
    rows: usize,
    cols: usize,
    config: FiducialConfig,
    lattice: Vec<Point>,
    phi: DMatrix<f64>,
}

impl BasisGrid {
    pub fn new(config: &FiducialConfig, rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Config(format!("grid must be at least 2×2, got {rows}×{cols}")));
        }
        let lattice: Vec<Point> = (0..rows)
            .flat_map(|i| {
                (0..cols).map(move |j| {
                    Point::new(j as f64 / (cols - 1) as f64, i as f64 / (rows - 1) as f64)
                })
            })
            .collect();
        let n = config.param_cols();
        let mut phi = DMatrix::zeros(n, lattice.len());
        let mut buf = Vec::with_capacity(n);
        for (j, &p) in lattice.iter().enumerate() {
            fill_basis(config, p, &mut buf);
            phi.column_mut(j).copy_from_slice(&buf);
        }
        Ok(Self { rows, cols, config: config.clone(), lattice, phi })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Lattice points on the unit rectangle, row-major.
    pub fn lattice(&self) -> &[Point] {
        &self.lattice
    }

    /// Basis matrix, one column per lattice point.
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn decode(&self, params: &TpsParams) -> Result<ShapeGrid> {
        if params.config() != &self.config {
            return Err(Error::Config("parameters use a different fiducial configuration".into()));
        }
        let out = params.matrix() * &self.phi;
        let points = out.column_iter().map(|c| Point::new(c[0], c[1])).collect();
        Ok(ShapeGrid { rows: self.rows, cols: self.cols, points })
    }
}

/// Decodes parameters over a `rows × cols` lattice on the unit rectangle.
pub fn decode(params: &TpsParams, rows: usize, cols: usize) -> Result<ShapeGrid> {
    BasisGrid::new(params.config(), rows, cols)?.decode(params)
}

/// Text outline from the decoded top and bottom rows: the top row left to
/// right, the midpoint of the right short edge, the bottom row right to left
/// and the midpoint of the left short edge. Short edges are straight.
pub fn outline_from_rows(top: &[Point], bottom: &[Point]) -> Vec<Point> {
    let (tl, tr) = (top[0], top[top.len() - 1]);
    let (bl, br) = (bottom[0], bottom[bottom.len() - 1]);
    let mut out = Vec::with_capacity(top.len() + bottom.len() + 2);
    out.extend_from_slice(top);
    out.push(tr.lerp(br, 0.5));
    out.extend(bottom.iter().rev());
    out.push(bl.lerp(tl, 0.5));
    out
}

/// Closed text outline decoded with `cols` samples per long side; see
/// [`outline_from_rows`].
pub fn decode_boundary(params: &TpsParams, cols: usize) -> Result<Polygon> {
    let g = decode(params, 2, cols)?;
    Polygon::new(outline_from_rows(g.row(0), g.row(1)))
}

/// Sampling grid for rectifying the text: pixel `(i, j)` of an
/// `out_h × out_w` crop reads the source image at `grid.at(i, j)`.
pub fn rectification_grid(params: &TpsParams, out_h: usize, out_w: usize) -> Result<ShapeGrid> {
    decode(params, out_h, out_w)
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    k: usize,
    distribution: Distribution,
    t: Vec<Vec<f64>>,
}

impl Serialize for TpsParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let t = (0..2).map(|r| self.t.row(r).iter().copied().collect()).collect();
        ParamsJson { k: self.config.k(), distribution: self.config.distribution(), t }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TpsParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ParamsJson::deserialize(d)?;
        let config = make_fiducials(raw.distribution, raw.k).map_err(D::Error::custom)?;
        if raw.t.len() != 2 || raw.t.iter().any(|r| r.len() != config.param_cols()) {
            return Err(D::Error::custom(format!(
                "\"t\" must be 2 rows of {} values",
                config.param_cols()
            )));
        }
        let t = Matrix2xX::from_fn(config.param_cols(), |r, c| raw.t[r][c]);
        TpsParams::new(config, t).map_err(D::Error::custom)
    }
}
