//! Ornament detection and its box-level evaluation at several IoU
//! thresholds.

use docseg::data::FloatImage;
use docseg::eval::{detection_report, BoxPair, DETECTION_THRESHOLDS};
use docseg::pipelines::{builtin_task, predict_image};
use docseg::postproc::{AxisAlignedBox, ProbabilityMap};

fn main() -> docseg::Result<()> {
    let task = builtin_task("ornament")?;
    let (w, h) = (800, 1000);
    let b = |x0, y0, x1, y1| AxisAlignedBox::new(x0, y0, x1, y1).expect("valid box");
    let truth = vec![b(100, 80, 300, 240), b(500, 600, 700, 760), b(380, 880, 420, 920)];
    // The network "sees" slightly shifted, blurry versions of the ornaments.
    let blobs = [(105.0, 85.0, 305.0, 250.0), (490.0, 590.0, 690.0, 740.0), (650.0, 100.0, 655.0, 105.0)];
    let source = |img: &FloatImage| -> docseg::Result<ProbabilityMap> {
        let (iw, ih) = (img.width(), img.height());
        let (sx, sy) = (w as f64 / iw as f64, h as f64 / ih as f64);
        let mut data = Vec::with_capacity(iw * ih * 2);
        for y in 0..ih {
            for x in 0..iw {
                let (ox, oy) = ((x as f64 + 0.5) * sx, (y as f64 + 0.5) * sy);
                let inside = |&(x0, y0, x1, y1): &(f64, f64, f64, f64)| {
                    let d = (x0 - ox).max(ox - x1).max(y0 - oy).max(oy - y1);
                    1.0 / (1.0 + (d / 4.0).exp())
                };
                let p = blobs.iter().map(inside).fold(0.0, f64::max) as f32;
                data.extend([1.0 - p, p]);
            }
        }
        ProbabilityMap::new(iw, ih, 2, data)
    };
    let prediction = predict_image(&task, &source, &FloatImage::new(w, h, 3), "plate", None)?;
    let predicted = prediction.geometry.boxes_of("ornament");
    for p in &predicted {
        println!("box [{}, {}, {}, {}]", p.x_min, p.y_min, p.x_max, p.y_max);
    }
    let report = detection_report(
        "ornament",
        &[BoxPair { stem: "plate".into(), width: w, height: h, predicted, truth }],
        &DETECTION_THRESHOLDS,
    )?;
    println!("{:>5} {:>9} {:>7} {:>7}", "IoU", "precision", "recall", "F");
    for row in &report.thresholds {
        println!("{:>5.1} {:>9.3} {:>7.3} {:>7.3}", row.iou_threshold, row.precision, row.recall, row.f_measure);
    }
    Ok(())
}
