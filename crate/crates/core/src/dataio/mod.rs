//! Annotation ingestion, side splitting, correspondence generation, the
//! synthetic sine-bent corpus, perspective augmentation, and PGM / SVG
//! export.

mod annotations;
mod augment;
mod pgm;
mod sides;
mod svg;
mod synthetic;

pub use annotations::{
    parse_annotations, parse_ctw1500, parse_generic_json, to_generic_json, Format, ParsedCorpus, Source,
    TextInstance, CTW1500_POINTS,
};
pub use augment::{augment_perspective, canvas_perspective, corpus_canvas};
pub use pgm::{decode_pgm, encode_pgm, quantize, quantize_raster, write_pgm};
pub use sides::{
    make_correspondences, split_sides, text_height, SideSplit, DEFAULT_PER_SIDE, EXHAUSTIVE_CORNER_LIMIT,
};
pub use svg::{raster_png, render_svg, SvgItem};
pub use synthetic::{
    generate_synthetic, synthetic_corpus, CorpusSpec, SyntheticInstance, SyntheticSpec, SYNTHETIC_PER_SIDE,
};
