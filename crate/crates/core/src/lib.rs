//! Thin-plate-spline representation of arbitrary-shape text regions.
//!
//! The crate fits, decodes and rectifies text shapes expressed as a small
//! parameter matrix, provides the border alignment and corner losses with
//! analytic gradients, Gaussian text-centre maps, a cubic Bezier baseline,
//! and rasterized IoU / TIoU scoring. See the guide in `book/` for a
//! narrative walk-through.

pub mod bezier;
pub mod dataio;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod tps;

pub use error::{Error, Result};
pub use geometry::{Point, Polygon};
pub use tps::{Distribution, FiducialConfig, TpsParams};

// Compiles and runs the guide's code blocks with the doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/representation.md")]
    mod representation {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/bezier.md")]
    mod bezier {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/gtc.md")]
    mod gtc {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
