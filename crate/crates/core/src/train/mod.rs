//! Optimisation: losses, L2 regularisation, learning-rate schedule, Adam
//! and the epoch loop.

mod checkpoint;
mod config;
mod fit;
mod loss;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, sidecar_path, CheckpointMeta};
pub use config::{lr_schedule, AdamParams, LossMode, TrainConfig, LR_RANGE};
pub use fit::{fit, fit_with, EpochRecord, FitOptions, History, StepRecord};
pub use loss::pixel_loss;
pub use optim::{add_l2_gradient, l2_penalty, trainable_kernels, Adam};
