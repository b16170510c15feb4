//! Non-neural machinery for a two-stage tabletop instance segmentation
//! pipeline operating on organized RGB-D data.
//!
//! The first stage turns a dense per-pixel prediction (semantic class
//! probabilities plus a field of 2D unit vectors pointing at object centers)
//! into instance masks by Hough voting, then cleans each mask with
//! morphological opening, closing, and closest-connected-component selection.
//! The second stage is a mask refinement network that consumes 224x224
//! RGB+mask crops; this crate prepares its training data (mask augmentation)
//! and its inference crops, but the networks themselves live elsewhere and
//! plug in through [`predictor::DensePredictor`].
//!
//! Everything here is deterministic: randomized components take an explicit
//! seed and draw from a fixed counter-based generator ([`rng`]).
//!
//! Conventions shared by all modules:
//! - rasters are row-major, pixel (0, 0) is the top-left corner, a pixel is
//!   addressed as (row, col);
//! - direction vectors are stored as (delta_row, delta_col), normalized;
//! - pixels that carry no meaningful direction (background, table, a pixel
//!   exactly at its instance centroid) use [`types::FIXED_DIRECTION`], which
//!   points toward the top of the image.

pub mod augment;
pub mod config;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod morphology;
pub mod pipeline;
pub mod predictor;
pub mod rng;
pub mod scenegen;
pub mod selfcheck;
pub mod types;
pub mod voting;

pub use types::{
    BinaryMask, DepthMap, DirectionField, Error, ImageGrid, InstanceLabelMap,
    OrganizedPointCloud, Result, RgbRaster, SemanticLabels, SemanticProbs,
};
