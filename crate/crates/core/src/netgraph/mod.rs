//! Encoder/decoder architecture: graph construction, parameter accounting,
//! weight storage and execution.

mod config;
mod graph;
pub mod ops;
mod network;
mod params;
mod report;
mod weights;

pub use config::{ArchConfig, OutputMode};
pub use graph::{
    build_graph, LayerId, LayerKind, LayerSpec, NetworkGraph, Norm, ParamKind, ParamSpec, Role, SkipLink,
    ENCODER_STRIDE, RESNET50_STAGES,
};
pub use network::{Gradients, Network, StatUpdate, Tape};
pub use ops::RenormSettings;
pub use params::{count_parameters, ParamReport};
pub use report::architecture_report;
pub use weights::WeightStore;

use crate::error::Result;

/// Symbolic output shape for an NHWC input shape.
pub fn forward_shape(graph: &NetworkGraph, input: (usize, usize, usize, usize)) -> Result<(usize, usize, usize, usize)> {
    graph.forward_shape(input)
}
