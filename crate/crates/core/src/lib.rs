//! Pixel-wise segmentation toolkit for historical document images.
//!
//! A single encoder/decoder network produces per-pixel class probabilities;
//! small chains of standard operators (thresholding, morphology, connected
//! components, vectorisation) turn them into task outputs such as page
//! quadrilaterals, baselines, layout masks or bounding boxes.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod data;
pub mod error;
pub mod eval;
pub mod netgraph;
pub mod pipelines;
pub mod postproc;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
