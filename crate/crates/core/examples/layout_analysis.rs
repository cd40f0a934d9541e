//! Multi-label layout analysis restricted to a page region.
//!
//! Comments and decorations may overlap; every class is thresholded
//! independently, small specks are dropped and everything outside the page
//! mask is cleared.

use docseg::data::FloatImage;
use docseg::pipelines::{builtin_task, predict_image};
use docseg::postproc::{AxisAlignedBox, ProbabilityMap};

fn main() -> docseg::Result<()> {
    let task = builtin_task("layout")?;
    let (w, h) = (600, 800);
    let region = |x0, y0, x1, y1| AxisAlignedBox::new(x0, y0, x1, y1).expect("valid box");
    // (class index, region) – background is channel 0.
    let drawn = [
        (3, region(80, 100, 480, 650)),  // main text
        (1, region(490, 120, 590, 500)), // marginal comment, partly off-page
        (2, region(80, 40, 200, 95)),    // decorated initial
        (1, region(420, 600, 520, 700)), // comment overlapping the text
        (2, region(300, 300, 304, 304)), // speck: filtered out
    ];
    let source = |img: &FloatImage| -> docseg::Result<ProbabilityMap> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut p = [0.0f32; 4];
                for (c, b) in &drawn {
                    if x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max {
                        p[*c] = 0.9;
                    }
                }
                p[0] = if p[1..].iter().any(|&v| v > 0.0) { 0.1 } else { 0.9 };
                data.extend(p);
            }
        }
        ProbabilityMap::new(w as usize, h as usize, 4, data)
    };
    let image = FloatImage::new(w, h, 3);
    let page = region(60, 30, 560, 760).rasterize(w, h);

    let free = predict_image(&task, &source, &image, "folio", None)?;
    let masked = predict_image(&task, &source, &image, "folio", Some(&page))?;
    println!("{:<12} {:>10} {:>12}", "class", "pixels", "within page");
    for ((name, a), (_, b)) in free.masks.iter().zip(&masked.masks) {
        println!("{name:<12} {:>10} {:>12}", a.count(), b.count());
    }
    Ok(())
}
