//! Dataset-level reports: `{per_image, per_class, aggregate}` JSON plus a
//! CSV summary.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{detection_prf, mask_iou, mean_iou, prf, Overlap};
use crate::error::{Error, Result};
use crate::postproc::{AxisAlignedBox, BinaryMask, Grid};

/// IoU thresholds reported for box detection.
pub const DETECTION_THRESHOLDS: [f64; 3] = [0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub stem: String,
    pub scores: BTreeMap<String, f64>,
}

/// Precision / recall / F at one IoU threshold, pooled over all images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub iou_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    /// How `aggregate` was reduced from the per-image scores.
    pub aggregation: String,
    pub per_image: Vec<ImageScores>,
    pub per_class: BTreeMap<String, f64>,
    pub aggregate: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thresholds: Vec<ThresholdRow>,
}

impl MetricsReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// `metric,value` rows for the aggregate, then one row per threshold.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let to_err = |e: csv::Error| Error::Task(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(to_err)?;
        w.write_record(["metric", "value"]).map_err(to_err)?;
        for (k, v) in &self.aggregate {
            w.write_record([k.as_str(), &v.to_string()]).map_err(to_err)?;
        }
        for (class, v) in &self.per_class {
            w.write_record([format!("iou/{class}"), v.to_string()]).map_err(to_err)?;
        }
        for r in &self.thresholds {
            let t = r.iou_threshold;
            w.write_record([format!("precision@{t}"), r.precision.to_string()]).map_err(to_err)?;
            w.write_record([format!("recall@{t}"), r.recall.to_string()]).map_err(to_err)?;
            w.write_record([format!("f_measure@{t}"), r.f_measure.to_string()]).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One image: predicted and reference masks, one per class.
pub struct MaskPair {
    pub stem: String,
    pub predicted: Vec<BinaryMask>,
    pub truth: Vec<BinaryMask>,
}

/// Mask IoU per class, averaged over classes per image, then over images.
pub fn segmentation_report(task: &str, class_names: &[String], images: &[MaskPair]) -> Result<MetricsReport> {
    if images.is_empty() {
        return Err(Error::Empty("no images to evaluate".into()));
    }
    let mut per_image = Vec::with_capacity(images.len());
    let mut image_means = Vec::with_capacity(images.len());
    let mut class_values: Vec<Vec<f64>> = vec![Vec::new(); class_names.len()];
    for img in images {
        if img.predicted.len() != class_names.len() || img.truth.len() != class_names.len() {
            return Err(Error::Shape(format!(
                "{}: expected {} class masks, got {} predicted / {} reference",
                img.stem,
                class_names.len(),
                img.predicted.len(),
                img.truth.len()
            )));
        }
        let mut scores = BTreeMap::new();
        let mut ious = Vec::with_capacity(class_names.len());
        for (c, name) in class_names.iter().enumerate() {
            let v = mask_iou(&img.predicted[c], &img.truth[c])
                .map_err(|e| Error::Shape(format!("{}: {e}", img.stem)))?;
            scores.insert(format!("iou/{name}"), v);
            class_values[c].push(v);
            ious.push(v);
        }
        let m = mean_iou(&ious)?;
        scores.insert("miou".into(), m);
        image_means.push(m);
        per_image.push(ImageScores {
            stem: img.stem.clone(),
            scores,
        });
    }
    let per_class = class_names
        .iter()
        .zip(&class_values)
        .map(|(n, v)| Ok((n.clone(), mean_iou(v)?)))
        .collect::<Result<_>>()?;
    let mut aggregate = BTreeMap::new();
    aggregate.insert("miou".into(), mean_iou(&image_means)?);
    Ok(MetricsReport {
        task: task.into(),
        aggregation: "per-class IoU, mean over classes, then mean over images".into(),
        per_image,
        per_class,
        aggregate,
        thresholds: Vec::new(),
    })
}

/// One image: predicted and reference boxes plus the image size.
pub struct BoxPair {
    pub stem: String,
    pub width: usize,
    pub height: usize,
    pub predicted: Vec<AxisAlignedBox>,
    pub truth: Vec<AxisAlignedBox>,
}

fn union_mask(boxes: &[AxisAlignedBox], w: usize, h: usize) -> BinaryMask {
    let mut m = Grid::new(w, h, false);
    for b in boxes {
        m = m.or(&b.rasterize(w, h)).expect("same size");
    }
    m
}

/// Pooled P/R/F at each threshold plus mIoU of the per-image union-of-boxes
/// masks.
pub fn detection_report(task: &str, images: &[BoxPair], thresholds: &[f64]) -> Result<MetricsReport> {
    if images.is_empty() {
        return Err(Error::Empty("no images to evaluate".into()));
    }
    let mut per_image = Vec::with_capacity(images.len());
    let mut ious = Vec::with_capacity(images.len());
    let mut matched = vec![0usize; thresholds.len()];
    let (mut n_pred, mut n_truth) = (0usize, 0usize);
    for img in images {
        let mut scores = BTreeMap::new();
        let iou = mask_iou(
            &union_mask(&img.predicted, img.width, img.height),
            &union_mask(&img.truth, img.width, img.height),
        )?;
        scores.insert("iou".into(), iou);
        ious.push(iou);
        for (k, &t) in thresholds.iter().enumerate() {
            let d = detection_prf(&img.predicted, &img.truth, t)?;
            matched[k] += d.matches.pairs.len();
            scores.insert(format!("matched@{t}"), d.matches.pairs.len() as f64);
        }
        n_pred += img.predicted.len();
        n_truth += img.truth.len();
        scores.insert("predicted".into(), img.predicted.len() as f64);
        scores.insert("truth".into(), img.truth.len() as f64);
        per_image.push(ImageScores {
            stem: img.stem.clone(),
            scores,
        });
    }
    let rows: Vec<ThresholdRow> = thresholds
        .iter()
        .zip(&matched)
        .map(|(&t, &m)| {
            let (precision, recall, f_measure) = prf(m, n_pred, n_truth);
            ThresholdRow {
                iou_threshold: t,
                precision,
                recall,
                f_measure,
            }
        })
        .collect();
    let mut aggregate = BTreeMap::new();
    aggregate.insert("miou".into(), mean_iou(&ious)?);
    Ok(MetricsReport {
        task: task.into(),
        aggregation: "P/R/F pooled over all boxes; mIoU of union-of-boxes masks averaged over images".into(),
        per_image,
        per_class: BTreeMap::new(),
        aggregate,
        thresholds: rows,
    })
}

/// Pooled detection scores for any shape type at a single threshold.
pub fn pooled_prf<S: Overlap>(images: &[(Vec<S>, Vec<S>)], iou_threshold: f64) -> Result<ThresholdRow> {
    let (mut m, mut p, mut t) = (0, 0, 0);
    for (pred, truth) in images {
        m += detection_prf(pred, truth, iou_threshold)?.matches.pairs.len();
        p += pred.len();
        t += truth.len();
    }
    let (precision, recall, f_measure) = prf(m, p, t);
    Ok(ThresholdRow {
        iou_threshold,
        precision,
        recall,
        f_measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: i64, y0: i64, x1: i64, y1: i64) -> AxisAlignedBox {
        AxisAlignedBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn segmentation_aggregates_classes_then_images() {
        let full = Grid::new(4, 4, true);
        let empty = Grid::new(4, 4, false);
        let half = bx(0, 0, 2, 4).rasterize(4, 4);
        let images = vec![
            MaskPair {
                stem: "a".into(),
                predicted: vec![full.clone(), half.clone()],
                truth: vec![full.clone(), full.clone()],
            },
            MaskPair {
                stem: "b".into(),
                predicted: vec![full.clone(), empty.clone()],
                truth: vec![full.clone(), empty.clone()],
            },
        ];
        let names = vec!["bg".to_string(), "fg".to_string()];
        let r = segmentation_report("page", &names, &images).unwrap();
        assert_eq!(r.per_image[0].scores["miou"], 0.75);
        assert_eq!(r.per_image[1].scores["miou"], 1.0);
        assert_eq!(r.aggregate["miou"], 0.875);
        assert_eq!(r.per_class["fg"], 0.75);
        assert!(segmentation_report("page", &names, &[]).is_err());
    }

    #[test]
    fn detection_report_rows() {
        let gt = vec![bx(0, 0, 10, 10), bx(20, 20, 30, 30)];
        let perfect = detection_report(
            "ornament",
            &[BoxPair {
                stem: "x".into(),
                width: 40,
                height: 40,
                predicted: gt.clone(),
                truth: gt.clone(),
            }],
            &DETECTION_THRESHOLDS,
        )
        .unwrap();
        assert_eq!(perfect.thresholds.len(), 3);
        assert!(perfect.thresholds.iter().all(|r| r.f_measure == 1.0));
        assert_eq!(perfect.aggregate["miou"], 1.0);

        let none = detection_report(
            "ornament",
            &[BoxPair {
                stem: "x".into(),
                width: 40,
                height: 40,
                predicted: vec![],
                truth: gt,
            }],
            &DETECTION_THRESHOLDS,
        )
        .unwrap();
        assert!(none.thresholds.iter().all(|r| r.recall == 0.0));
        assert_eq!(none.aggregate["miou"], 0.0);
    }

    #[test]
    fn files_round_trip() {
        let gt = vec![bx(0, 0, 10, 10)];
        let r = detection_report(
            "ornament",
            &[BoxPair {
                stem: "x".into(),
                width: 20,
                height: 20,
                predicted: gt.clone(),
                truth: gt,
            }],
            &DETECTION_THRESHOLDS,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_json(dir.path().join("m.json")).unwrap();
        r.write_csv(dir.path().join("m.csv")).unwrap();
        let back: MetricsReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(back, r);
        let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
        assert!(csv.contains("precision@0.7,1"));
    }
}
