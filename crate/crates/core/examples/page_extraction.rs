//! Page extraction on a synthetic scan larger than the page task's pixel
//! budget: the chain runs at working size and the quad is mapped back.
//!
//! A brightness heuristic stands in for a trained network, so the example
//! runs instantly. Swap in `NetworkSource::from_checkpoint` for real use.

use docseg::data::{synthetic_pages, FloatImage};
use docseg::eval::quad_iou;
use docseg::pipelines::{builtin_task, predict_image, Shape};
use docseg::postproc::{extract_extreme_quad, ProbabilityMap};

fn bright_paper(image: &FloatImage) -> docseg::Result<ProbabilityMap> {
    let mut data = Vec::with_capacity(image.width() * image.height() * 2);
    for px in image.data().chunks(3) {
        let lum = (px[0] + px[1] + px[2]) / 3.0;
        let p = 1.0 / (1.0 + (-(lum - 150.0) / 12.0).exp());
        data.extend([1.0 - p, p]);
    }
    ProbabilityMap::new(image.width(), image.height(), 2, data)
}

fn main() -> docseg::Result<()> {
    let task = builtin_task("page")?;
    for page in synthetic_pages(3, 1200, 900, 7) {
        let sample = &page.sample;
        let prediction = predict_image(&task, &bright_paper, &sample.image, &sample.stem, None)?;
        let truth = extract_extreme_quad(&sample.labels.class_mask(1))?;
        for record in &prediction.geometry.shapes {
            if let Shape::Quad(q) = &record.shape {
                let corners: Vec<String> = q.corners().iter().map(|p| format!("({:.1}, {:.1})", p[0], p[1])).collect();
                println!("{}: {}  IoU vs truth {:.4}", sample.stem, corners.join(" "), quad_iou(q, &truth));
            }
        }
    }
    Ok(())
}
