//! Local Binary Patterns Histogram recognition.
//!
//! A face is described by thresholding every interior pixel's 3x3 ring
//! against its centre, histogramming the resulting 8-bit codes over a grid of
//! cells, and concatenating the per-cell histograms. Recognition is a
//! nearest-neighbour search under the chi-square distance; the distance is
//! reported as the match confidence, so lower is better.

mod codec;
mod descriptor;
mod model;

pub use codec::{load_model, save_model, CodecError, FORMAT_VERSION, MAGIC};
pub use descriptor::{chi_square, grid_histogram, lbp_code_image, FeatureVector, LbpParams};
pub use model::{train, MatchResult, Mode, ModelEntry, RecognizerModel};

use crate::image::ImageError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LbphError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("image {width}x{height} yields an empty {grid_x}x{grid_y} grid cell")]
    EmptyCell {
        width: usize,
        height: usize,
        grid_x: usize,
        grid_y: usize,
    },
    #[error("feature lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("recognizer has no entries")]
    NotTrained,
    #[error(transparent)]
    Image(#[from] ImageError),
}
