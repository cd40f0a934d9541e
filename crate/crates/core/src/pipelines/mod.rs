//! Task definitions wiring the network to post-processing chains and
//! metrics: train, predict and evaluate.

mod chain;
mod evaluate;
mod output;
mod predict;
mod task;
mod train;

pub use chain::{apply_chain, check_chain, ChainContext, ChainOutput, PostOp, Stage};
pub use evaluate::run_evaluate;
pub use output::{mask_file_name, resize_mask, GeometryFile, Prediction, Shape, ShapeRecord, GEOMETRY_SCHEMA};
pub use predict::{
    background_map, collect_images, page_region, postprocess, predict_image, run_predict, NetworkSource, PageModel,
    PredictOptions, ProbabilitySource,
};
pub use task::{builtin_task, ArchOverrides, TaskConfig, TaskKind, BUILTIN_TASKS};
pub use train::{epoch_checkpoint_name, run_train, TrainOptions, TrainOutcome};
