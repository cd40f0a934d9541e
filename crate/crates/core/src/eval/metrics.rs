//! Intersection-over-union family and detection precision/recall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postproc::geometry::{polygon_area, signed_area2, Point};
use crate::postproc::{AxisAlignedBox, BinaryMask, Quad};

/// `|a ∩ b| / |a ∪ b|`; two empty masks score 1.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.same_dims(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

pub fn box_iou(a: &AxisAlignedBox, b: &AxisAlignedBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    let union = a.area() + b.area() - inter;
    if union <= 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        let z = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if z != 0.0 {
            if sign != 0.0 && z.signum() != sign {
                return false;
            }
            sign = z.signum();
        }
    }
    true
}

/// Sutherland–Hodgman clip of `subject` by the convex polygon `clip`.
fn clip_polygon(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let orient = signed_area2(clip).signum();
    let inside = |p: Point, a: Point, b: Point| orient * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) >= 0.0;
    let intersect = |p: Point, q: Point, a: Point, b: Point| -> Point {
        let (r, s) = ([q[0] - p[0], q[1] - p[1]], [b[0] - a[0], b[1] - a[1]]);
        let denom = r[0] * s[1] - r[1] * s[0];
        let t = ((a[0] - p[0]) * s[1] - (a[1] - p[1]) * s[0]) / denom;
        [p[0] + t * r[0], p[1] + t * r[1]]
    };
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            match (inside(p, a, b), inside(q, a, b)) {
                (true, true) => out.push(q),
                (true, false) => out.push(intersect(p, q, a, b)),
                (false, true) => {
                    out.push(intersect(p, q, a, b));
                    out.push(q);
                }
                (false, false) => {}
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

/// Pixel-centre IoU over the joint bounding box; used for non-convex quads.
fn raster_iou(a: &Quad, b: &Quad) -> f64 {
    let pts = a.corners().iter().chain(b.corners());
    let (mut x1, mut y1) = (0.0f64, 0.0f64);
    for p in pts {
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let (w, h) = (x1.ceil() as usize + 1, y1.ceil() as usize + 1);
    mask_iou(&a.rasterize(w, h), &b.rasterize(w, h)).unwrap_or(0.0)
}

/// Polygon IoU of two quadrilaterals.
pub fn quad_iou(a: &Quad, b: &Quad) -> f64 {
    if !is_convex(a.corners()) || !is_convex(b.corners()) {
        return raster_iou(a, b);
    }
    let inter = polygon_area(&clip_polygon(a.corners(), b.corners()));
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn mean_iou(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("mean IoU of an empty list".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Shapes that can be compared by IoU.
pub trait Overlap {
    fn iou(&self, other: &Self) -> f64;
}

impl Overlap for AxisAlignedBox {
    fn iou(&self, other: &Self) -> f64 {
        box_iou(self, other)
    }
}

impl Overlap for Quad {
    fn iou(&self, other: &Self) -> f64 {
        quad_iou(self, other)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionMatch {
    /// `(prediction, ground truth, IoU)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_ground_truth: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub matches: DetectionMatch,
}

/// Precision, recall and F from matched / predicted / ground-truth counts.
pub fn prf(matched: usize, predicted: usize, truth: usize) -> (f64, f64, f64) {
    let p = if predicted == 0 { 0.0 } else { matched as f64 / predicted as f64 };
    let r = if truth == 0 { 0.0 } else { matched as f64 / truth as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// One-to-one greedy matching by descending IoU; pairs below
/// `iou_threshold` never match.
pub fn detection_prf<S: Overlap>(predictions: &[S], truth: &[S], iou_threshold: f64) -> Result<Detection> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidParam(format!("IoU threshold {iou_threshold} outside (0, 1]")));
    }
    let mut candidates = Vec::new();
    for (i, p) in predictions.iter().enumerate() {
        for (j, g) in truth.iter().enumerate() {
            let v = p.iou(g);
            if v >= iou_threshold {
                candidates.push((i, j, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_p = vec![false; predictions.len()];
    let mut used_g = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (i, j, v) in candidates {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            pairs.push((i, j, v));
        }
    }
    let (precision, recall, f_measure) = prf(pairs.len(), predictions.len(), truth.len());
    Ok(Detection {
        precision,
        recall,
        f_measure,
        matches: DetectionMatch {
            pairs,
            unmatched_predictions: (0..predictions.len()).filter(|&i| !used_p[i]).collect(),
            unmatched_ground_truth: (0..truth.len()).filter(|&j| !used_g[j]).collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::Grid;

    fn bx(x0: i64, y0: i64, x1: i64, y1: i64) -> AxisAlignedBox {
        AxisAlignedBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn mask_iou_cases() {
        let a = bx(0, 0, 4, 4).rasterize(8, 4);
        let b = bx(2, 0, 6, 4).rasterize(8, 4);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert!((mask_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(mask_iou(&a, &bx(4, 0, 8, 4).rasterize(8, 4)).unwrap(), 0.0);
        let empty = Grid::new(8, 4, false);
        assert_eq!(mask_iou(&empty, &empty).unwrap(), 1.0);
        assert!(mask_iou(&a, &Grid::new(3, 3, false)).is_err());
    }

    #[test]
    fn box_iou_cases() {
        assert!((box_iou(&bx(0, 0, 10, 10), &bx(5, 0, 15, 10)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(box_iou(&bx(0, 0, 10, 10), &bx(0, 0, 10, 10)), 1.0);
        assert_eq!(box_iou(&bx(0, 0, 10, 10), &bx(10, 0, 20, 10)), 0.0);
    }

    #[test]
    fn quad_iou_matches_box_iou_for_rectangles() {
        let q = |b: AxisAlignedBox| Quad::new(b.corners()).unwrap();
        let (a, b) = (bx(0, 0, 10, 10), bx(5, 2, 15, 12));
        assert!((quad_iou(&q(a), &q(b)) - box_iou(&a, &b)).abs() < 1e-12);
        let diamond = Quad::new([[5.0, 0.0], [10.0, 5.0], [5.0, 10.0], [0.0, 5.0]]).unwrap();
        assert!((quad_iou(&diamond, &q(a)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_iou_cases() {
        assert_eq!(mean_iou(&[1.0]).unwrap(), 1.0);
        assert!((mean_iou(&[0.2, 0.4, 0.6]).unwrap() - 0.4).abs() < 1e-12);
        assert!(mean_iou(&[]).is_err());
    }

    #[test]
    fn detection_fixture() {
        // IoUs 0.9 and 0.6 against two of three ground-truth boxes.
        let gt = vec![bx(0, 0, 100, 100), bx(200, 0, 300, 100), bx(400, 0, 500, 100)];
        let preds = vec![bx(0, 0, 90, 100), bx(200, 0, 260, 100)];
        assert!((box_iou(&preds[0], &gt[0]) - 0.9).abs() < 1e-12);
        assert!((box_iou(&preds[1], &gt[1]) - 0.6).abs() < 1e-12);
        let d = detection_prf(&preds, &gt, 0.7).unwrap();
        assert_eq!(d.matches.pairs.len(), 1);
        assert_eq!(d.precision, 0.5);
        assert!((d.recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((d.f_measure - 0.4).abs() < 1e-12);
    }

    #[test]
    fn detection_edge_cases() {
        let gt = vec![bx(0, 0, 10, 10)];
        let none: Vec<AxisAlignedBox> = vec![];
        let d = detection_prf(&none, &gt, 0.5).unwrap();
        assert_eq!((d.precision, d.recall, d.f_measure), (0.0, 0.0, 0.0));
        let d = detection_prf(&gt, &gt, 1.0).unwrap();
        assert_eq!((d.precision, d.recall, d.f_measure), (1.0, 1.0, 1.0));
        assert!(detection_prf(&gt, &gt, 0.0).is_err());
    }
}
