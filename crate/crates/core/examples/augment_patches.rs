//! Training-time data handling: joint augmentation of image and labels,
//! tiling into overlapping patches and seamless stitching of per-patch
//! outputs.

use docseg::data::{augment, extract_patches, stitch_predictions, synthetic_pages, AugmentParams, PatchSpec, IGNORE};
use docseg::postproc::ProbabilityMap;

fn main() -> docseg::Result<()> {
    let page = &synthetic_pages(1, 700, 500, 3)[0].sample;
    let params = AugmentParams { seed: 9, ..Default::default() };
    let (image, labels) = augment(&page.image, &page.labels, &params)?;
    let ignored = labels.bits.data().iter().filter(|&&b| b == IGNORE).count();
    println!(
        "augmented {}x{}: {} page pixels (was {}), {} pixels ignored",
        image.width(),
        image.height(),
        labels.class_mask(1).count(),
        page.labels.class_mask(1).count(),
        ignored
    );

    let spec = PatchSpec::square(300, 75)?;
    let patches = extract_patches(&image, Some(&labels), &spec)?;
    let origins: Vec<_> = patches.iter().map(|p| p.origin).collect();
    println!("{} patches of 300x300, origins {origins:?}", patches.len());

    // Stitching the patches' own (rescaled) pixels back must reproduce the image exactly.
    let unit = |v: &f32| v / 255.0;
    let maps = patches
        .iter()
        .map(|p| {
            let data = p.image.data().iter().map(unit).collect();
            Ok((ProbabilityMap::new(p.image.width(), p.image.height(), 3, data)?, p.origin))
        })
        .collect::<docseg::Result<Vec<_>>>()?;
    let stitched = stitch_predictions(&maps, image.width(), image.height())?;
    let expected: Vec<f32> = image.data().iter().map(unit).collect();
    println!("stitched copy identical: {}", stitched.data() == &expected[..]);
    Ok(())
}
