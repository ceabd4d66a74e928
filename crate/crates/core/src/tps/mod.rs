//! Thin-plate-spline text shapes.
//!
//! A shape is the image of the unit rectangle `[0,1]²` under
//! `(x', y')ᵀ = T φ(x, y)` where `φ = [1, x, y, r(d_1) … r(d_k)]` and
//! `r(d) = d² ln d` measures distance to `k` fixed fiducial points. `T` is a
//! `2×(k+3)` matrix: an affine block followed by `k` local weights.

mod fiducials;
mod fit;
mod params;

pub use fiducials::{
    make_fiducials, radial, system_condition, Distribution, FiducialConfig, DEFAULT_K,
    MAX_SYSTEM_CONDITION,
};
pub use fit::{
    fit, Correspondences, Solver, TpsFit, DEFAULT_REGULARIZATION, MAX_FIT_CONDITION,
    NORMAL_EQUATIONS_LIMIT,
};
pub use params::{
    decode, decode_boundary, decode_decomposed, outline_from_rows, decompose, eval_basis, rectification_grid,
    BasisEvaluation, BasisGrid, ShapeGrid, TpsParams, DEFAULT_BOUNDARY_COLS,
};
pub(crate) use params::fill_basis;
