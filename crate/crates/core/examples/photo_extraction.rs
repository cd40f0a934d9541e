//! Photo extraction: a photograph mounted on cardboard. The chain takes the
//! per-pixel argmax, keeps the largest component per class, boxes it and
//! clips the photo box to the cardboard box.

use docseg::data::FloatImage;
use docseg::pipelines::{builtin_task, predict_image, Shape};
use docseg::postproc::ProbabilityMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> docseg::Result<()> {
    let task = builtin_task("photo")?;
    let (w, h) = (900, 1200);
    let source = |img: &FloatImage| -> docseg::Result<ProbabilityMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (iw, ih) = (img.width(), img.height());
        let (fx, fy) = (iw as f64 / w as f64, ih as f64 / h as f64);
        let within = |x: usize, y: usize, b: [f64; 4]| {
            let (x, y) = (x as f64 / fx, y as f64 / fy);
            x >= b[0] && x < b[2] && y >= b[1] && y < b[3]
        };
        let mut data = Vec::with_capacity(iw * ih * 3);
        for y in 0..ih {
            for x in 0..iw {
                let mut p = if within(x, y, [180.0, 260.0, 720.0, 900.0]) {
                    [0.05, 0.15, 0.8]
                } else if within(x, y, [100.0, 150.0, 800.0, 1050.0]) {
                    [0.1, 0.8, 0.1]
                } else {
                    [0.8, 0.1, 0.1]
                };
                // Sprinkle noise so the opening and largest-component steps have work to do.
                if rng.gen_bool(0.01) {
                    p.rotate_left(1);
                }
                data.extend(p);
            }
        }
        ProbabilityMap::new(iw, ih, 3, data)
    };
    let prediction = predict_image(&task, &source, &FloatImage::new(w, h, 3), "mount", None)?;
    for record in &prediction.geometry.shapes {
        if let Shape::Box(b) = &record.shape {
            println!("{:<10} [{}, {}, {}, {}]", record.class, b.x_min, b.y_min, b.x_max, b.y_max);
        }
    }
    println!("{}", serde_json::to_string_pretty(&prediction.geometry).expect("serialisable"));
    Ok(())
}
