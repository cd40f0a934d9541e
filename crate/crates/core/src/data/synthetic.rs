//! Seeded synthetic "page" fixtures: a noisy background texture with one
//! filled rectangle labelled as class 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::classmap::Labels;
use super::dataset::Sample;
use super::image::FloatImage;
use crate::postproc::AxisAlignedBox;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPage {
    pub sample: Sample,
    /// The filled rectangle (class 1), half-open pixel bounds.
    pub page: AxisAlignedBox,
}

/// `n` pages of `width`×`height`. The rectangle covers 35–75 % of each side
/// and is a flat bright colour with mild noise; the background is coarse
/// dark random texture.
pub fn synthetic_pages(n: usize, width: usize, height: usize, seed: u64) -> Vec<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let rw = (width as f64 * rng.gen_range(0.35..0.75)) as i64;
            let rh = (height as f64 * rng.gen_range(0.35..0.75)) as i64;
            let x0 = rng.gen_range(0..=width as i64 - rw);
            let y0 = rng.gen_range(0..=height as i64 - rh);
            let page = AxisAlignedBox::new(x0, y0, x0 + rw, y0 + rh).expect("non-empty rectangle");
            let paper: [f32; 3] = [rng.gen_range(200.0..240.0), rng.gen_range(190.0..230.0), rng.gen_range(160.0..210.0)];
            // Background: 4×4 blocks of random colour plus per-pixel noise.
            let bw = width.div_ceil(4);
            let blocks: Vec<[f32; 3]> = (0..bw * height.div_ceil(4))
                .map(|_| [rng.gen_range(0.0..140.0), rng.gen_range(0.0..140.0), rng.gen_range(0.0..140.0)])
                .collect();
            let mut image = FloatImage::new(width, height, 3);
            for y in 0..height {
                for x in 0..width {
                    let inside = (x as i64) >= page.x_min
                        && (x as i64) < page.x_max
                        && (y as i64) >= page.y_min
                        && (y as i64) < page.y_max;
                    let base = if inside { paper } else { blocks[(y / 4) * bw + x / 4] };
                    let px = image.pixel_mut(x, y);
                    for c in 0..3 {
                        px[c] = (base[c] + rng.gen_range(-12.0..12.0)).clamp(0.0, 255.0);
                    }
                }
            }
            let labels = Labels::from_mask(&page.rasterize(width, height));
            SyntheticPage {
                sample: Sample {
                    stem: format!("synthetic_{i:03}"),
                    image,
                    labels,
                },
                page,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let a = synthetic_pages(3, 64, 48, 7);
        assert_eq!(a, synthetic_pages(3, 64, 48, 7));
        for p in &a {
            let fg = p.sample.labels.class_mask(1).count();
            assert_eq!(fg as i64, p.page.area());
            assert_eq!(p.sample.labels.n_classes, 2);
        }
    }
}
