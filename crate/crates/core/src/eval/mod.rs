//! IoU-family metrics and evaluation reports.

mod metrics;
mod report;

pub use metrics::{box_iou, detection_prf, mask_iou, mean_iou, prf, quad_iou, Detection, DetectionMatch, Overlap};
pub use report::{
    detection_report, pooled_prf, segmentation_report, BoxPair, ImageScores, MaskPair, MetricsReport, ThresholdRow,
    DETECTION_THRESHOLDS,
};
