//! Post-processing operators that turn probability maps into masks,
//! components and shapes.
//!
//! All operators are pure functions of their inputs.

pub mod components;
pub mod filter;
pub mod geometry;
pub mod grid;
pub mod morphology;
pub mod threshold;

pub use components::{
    filter_small_components, label_components, largest_component, Component, Components, Connectivity,
};
pub use filter::{gaussian_filter, gaussian_kernel};
pub use geometry::{
    enforce_enclosure, extract_extreme_quad, filter_small_boxes, min_enclosing_box, polygon_area,
    simplify_path, vectorize_polyline, AxisAlignedBox, Point, PolyLine, Quad, DEFAULT_POLYLINE_EPSILON,
};
pub use grid::{BinaryMask, Grid, LabelMap, ProbabilityChannel, ProbabilityMap};
pub use morphology::{close, dilate, erode, morph, open, ElementShape, MorphOp, StructuringElement};
pub use threshold::{hysteresis_threshold, threshold_fixed, threshold_otsu, OTSU_BINS};
