//! Annotations to training tensors and back: class maps, baseline
//! rendering, resizing, patching, augmentation and the training feed.

pub mod augment;
pub mod baselines;
pub mod classmap;
pub mod dataset;
pub mod feed;
pub mod image;
pub mod patches;
pub mod resize;
pub mod synthetic;

pub use augment::{augment, AugmentParams, Transform};
pub use baselines::{load_baselines, render_baselines, BaselinePath, BASELINE_RADIUS};
pub use classmap::{decode_labels, decode_mask, encode_mask, ClassEntry, ClassMap, CompositeColor, Labels, IGNORE};
pub use dataset::{load_labels, load_samples, Dataset, DatasetItem, LabelSource, Sample, IMAGE_EXTENSIONS};
pub use feed::{run_epoch, Batch, FeedConfig};
pub use image::{FloatImage, IMAGENET_MEAN};
pub use patches::{extract_patches, patch_origins, stitch_predictions, Patch, PatchSpec};
pub use resize::{budget_size, resize_to_pixel_budget};
pub use synthetic::{synthetic_pages, SyntheticPage};
