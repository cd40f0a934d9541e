//! Segmentation metrics: per-class IoU averaged per image, then over the
//! collection, with JSON and CSV reports.
//!
//! Usage: `cargo run --example evaluate -- [output-dir]`

use docseg::data::synthetic_pages;
use docseg::eval::{segmentation_report, MaskPair};
use docseg::postproc::AxisAlignedBox;
use docseg::Error;

fn main() -> docseg::Result<()> {
    let pages = synthetic_pages(4, 320, 240, 11);
    let pairs: Vec<MaskPair> = pages
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // A prediction that misses a strip of the page, wider for later images.
            let b = p.page;
            let cut = AxisAlignedBox::new(b.x_min, b.y_min, b.x_max - 4 * i as i64, b.y_max).expect("valid box");
            let fg = cut.rasterize(320, 240);
            let truth = p.sample.labels.class_mask(1);
            MaskPair {
                stem: p.sample.stem.clone(),
                predicted: vec![fg.complement(), fg],
                truth: vec![truth.complement(), truth],
            }
        })
        .collect();
    let report = segmentation_report("page", &["background".into(), "page".into()], &pairs)?;
    for img in &report.per_image {
        println!("{}  {:?}", img.stem, img.scores);
    }
    println!("aggregate {:?}", report.aggregate);
    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.clone().into(), source })?;
        report.write_json(format!("{dir}/metrics.json"))?;
        report.write_csv(format!("{dir}/metrics.csv"))?;
        println!("wrote {dir}/metrics.json and {dir}/metrics.csv");
    }
    Ok(())
}
