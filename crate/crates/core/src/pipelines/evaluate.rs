//! Scoring a prediction directory against ground truth.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::output::{mask_file_name, GeometryFile};
use super::task::{TaskConfig, TaskKind};
use crate::data::encode_mask;
use crate::error::{Error, Result};
use crate::eval::{detection_report, segmentation_report, BoxPair, MaskPair, MetricsReport, DETECTION_THRESHOLDS};
use crate::postproc::{label_components, AxisAlignedBox, BinaryMask, Connectivity};

fn files_with_ext(dir: &Path, ext: &str) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_owned(), path);
            }
        }
    }
    Ok(out)
}

fn load_gray_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?.to_luma8();
    Ok(BinaryMask::from_gray(&img))
}

/// Ground-truth boxes: a geometry document or a bare `[[x0,y0,x1,y1], ...]`.
#[derive(Deserialize)]
#[serde(untagged)]
enum BoxTruth {
    Geometry(GeometryFile),
    Boxes(Vec<AxisAlignedBox>),
}

fn unmatched_error(missing_pred: &[String], missing_truth: &[String]) -> Error {
    let mut msg = String::from("predictions and ground truth do not match:");
    if !missing_pred.is_empty() {
        msg += &format!(" no prediction for [{}];", missing_pred.join(", "));
    }
    if !missing_truth.is_empty() {
        msg += &format!(" no ground truth for [{}];", missing_truth.join(", "));
    }
    Error::Dataset(msg)
}

/// Scores `pred_dir` (as written by `run_predict`) against `truth_dir`.
///
/// Region tasks (page, layout, photo, custom) compare `<stem>_<class>.png`
/// masks with colour annotations `<stem>.png`; ornament compares boxes in
/// `<stem>.json` with boxes from `<stem>.json` or from the components of a
/// colour annotation. Every stem must appear on both sides; mismatches are
/// listed in the error.
pub fn run_evaluate(task: &TaskConfig, pred_dir: impl AsRef<Path>, truth_dir: impl AsRef<Path>) -> Result<MetricsReport> {
    task.validate()?;
    let (pred_dir, truth_dir) = (pred_dir.as_ref(), truth_dir.as_ref());
    let preds = files_with_ext(pred_dir, "json")?;
    let truth_png = files_with_ext(truth_dir, "png")?;
    let truth_json = files_with_ext(truth_dir, "json")?;
    let names = task.class_names();
    let targets = task.target_indices()?;

    match task.name {
        TaskKind::Baseline => Err(Error::Task(
            "baseline scoring is done with the external competition tool; use the predicted polylines".into(),
        )),
        TaskKind::Ornament => {
            let mut truth: BTreeMap<&String, &PathBuf> = truth_png.iter().collect();
            truth.extend(truth_json.iter());
            let missing_pred: Vec<String> = truth.keys().filter(|s| !preds.contains_key(**s)).map(|s| s.to_string()).collect();
            let missing_truth: Vec<String> = preds.keys().filter(|s| !truth.contains_key(s)).cloned().collect();
            if !missing_pred.is_empty() || !missing_truth.is_empty() {
                return Err(unmatched_error(&missing_pred, &missing_truth));
            }
            let mut pairs = Vec::new();
            for (stem, pred_path) in &preds {
                let pred = GeometryFile::load(pred_path)?;
                let tpath = truth[stem];
                let is_json = tpath.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
                for &c in &targets {
                    let class = &names[c];
                    let gt = if is_json {
                        let text = std::fs::read_to_string(tpath).map_err(|e| Error::io(tpath, e))?;
                        match serde_json::from_str::<BoxTruth>(&text)
                            .map_err(|e| Error::Dataset(format!("{}: {e}", tpath.display())))?
                        {
                            BoxTruth::Geometry(g) => g.boxes_of(class),
                            BoxTruth::Boxes(b) => b,
                        }
                    } else {
                        let img = image::open(tpath).map_err(|e| Error::image(tpath, e))?.to_rgb8();
                        let labels = encode_mask(&img, &task.classmap)
                            .map_err(|e| Error::Dataset(format!("{}: {e}", tpath.display())))?;
                        label_components(&labels.class_mask(c), Connectivity::Eight)
                            .components
                            .iter()
                            .map(|k| k.bbox)
                            .collect()
                    };
                    pairs.push(BoxPair {
                        stem: if targets.len() == 1 { stem.clone() } else { format!("{stem}/{class}") },
                        width: pred.width,
                        height: pred.height,
                        predicted: pred.boxes_of(class),
                        truth: gt,
                    });
                }
            }
            detection_report(task.name.as_str(), &pairs, &DETECTION_THRESHOLDS)
        }
        _ => {
            let mut missing_pred: Vec<String> = Vec::new();
            for stem in truth_png.keys() {
                if !preds.contains_key(stem) {
                    missing_pred.push(stem.clone());
                    continue;
                }
                for &c in &targets {
                    let f = mask_file_name(stem, &names[c]);
                    if !pred_dir.join(&f).is_file() {
                        missing_pred.push(f);
                    }
                }
            }
            let missing_truth: Vec<String> = preds.keys().filter(|s| !truth_png.contains_key(*s)).cloned().collect();
            if !missing_pred.is_empty() || !missing_truth.is_empty() {
                return Err(unmatched_error(&missing_pred, &missing_truth));
            }
            let mut pairs = Vec::new();
            for (stem, tpath) in &truth_png {
                let img = image::open(tpath).map_err(|e| Error::image(tpath, e))?.to_rgb8();
                let labels = encode_mask(&img, &task.classmap)
                    .map_err(|e| Error::Dataset(format!("{}: {e}", tpath.display())))?;
                let mut predicted = Vec::new();
                let mut truth = Vec::new();
                for &c in &targets {
                    predicted.push(load_gray_mask(&pred_dir.join(mask_file_name(stem, &names[c])))?);
                    truth.push(labels.class_mask(c));
                }
                pairs.push(MaskPair {
                    stem: stem.clone(),
                    predicted,
                    truth,
                });
            }
            let target_names: Vec<String> = targets.iter().map(|&c| names[c].clone()).collect();
            segmentation_report(task.name.as_str(), &target_names, &pairs)
        }
    }
}
