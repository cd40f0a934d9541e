//! Data-pipeline invariants: colour coding, resizing, tiling, augmentation.

use docseg::data::{
    budget_size, decode_mask, encode_mask, extract_patches, resize_to_pixel_budget, stitch_predictions, ClassMap,
    FloatImage, Labels, PatchSpec, Transform, IGNORE,
};
use docseg::postproc::{Grid, ProbabilityMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn palette(n: usize) -> ClassMap {
    ClassMap::exclusive((0..n).map(|k| (format!("class{k}"), [(k * 37) as u8, (255 - k * 11) as u8, (k * 5) as u8])))
        .unwrap()
}

/// Labels made of a few large axis-aligned blobs on a background.
fn blob_labels(seed: u64, w: usize, h: usize, n_classes: usize) -> Labels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rects: Vec<(usize, usize, usize, usize, u32)> = (0..4)
        .map(|_| {
            let (x0, y0) = (rng.gen_range(0..w / 2), rng.gen_range(0..h / 2));
            let (x1, y1) = (rng.gen_range(x0 + w / 8..w), rng.gen_range(y0 + h / 8..h));
            (x0, y0, x1, y1, rng.gen_range(1..n_classes as u32))
        })
        .collect();
    let idx = Grid::from_fn(w, h, |x, y| {
        rects
            .iter()
            .rev()
            .find(|r| x >= r.0 && x < r.2 && y >= r.1 && y < r.3)
            .map_or(0, |r| r.4)
    });
    Labels::from_indices(&idx, n_classes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn colour_coding_round_trips(seed in any::<u64>(), n in 2usize..7, w in 1usize..30, h in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classmap = palette(n);
        let idx = Grid::from_fn(w, h, |_, _| rng.gen_range(0..n as u32));
        let img = decode_mask(&idx, &classmap).unwrap();
        let labels = encode_mask(&img, &classmap).unwrap();
        prop_assert_eq!(labels.indices(), idx);
        prop_assert_eq!(decode_mask(&labels.indices(), &classmap).unwrap(), img);
    }

    #[test]
    fn budget_resize_stays_within_five_percent(w in 100usize..8000, aspect in 0.05f64..20.0, budget in 100_000usize..2_000_000) {
        let h = ((w as f64 / aspect).round() as usize).max(1);
        let (ow, oh) = budget_size(w, h, budget).unwrap();
        if w * h <= budget {
            prop_assert_eq!((ow, oh), (w, h));
        } else {
            prop_assert!(ow * oh <= budget);
            prop_assert!(ow * oh * 100 >= budget * 95, "{}x{} -> {}x{} for {}", w, h, ow, oh, budget);
        }
    }

    #[test]
    fn budget_never_exceeded(w in 1usize..100_000, h in 1usize..100_000, budget in 1usize..10_000) {
        let (ow, oh) = budget_size(w, h, budget).unwrap();
        prop_assert!(ow >= 1 && oh >= 1);
        if w * h > budget {
            prop_assert!(ow * oh <= budget);
        }
    }

    #[test]
    fn stitching_undoes_tiling(seed in any::<u64>(), w in 10usize..90, h in 10usize..90, size in 12usize..40, margin_frac in 0.0f64..0.45) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let image = FloatImage::from_fn(w, h, 2, |_, _, _| rng.gen_range(0.0..1.0));
        let spec = PatchSpec { size: (size, size + 3), margin: (margin_frac * size as f64) as usize };
        prop_assume!(spec.validate().is_ok());
        // Any per-pixel function applied uniformly to every patch.
        let f = |v: f32| v * v;
        let patches = extract_patches(&image, None, &spec).unwrap();
        let maps: Vec<_> = patches
            .iter()
            .map(|p| {
                let data = p.image.data().iter().map(|&v| f(v)).collect();
                (ProbabilityMap::new(p.image.width(), p.image.height(), 2, data).unwrap(), p.origin)
            })
            .collect();
        let stitched = stitch_predictions(&maps, w, h).unwrap();
        let expected: Vec<f32> = image.data().iter().map(|&v| f(v)).collect();
        prop_assert_eq!(stitched.data(), &expected[..]);
    }

    #[test]
    fn inverse_warp_restores_most_labels(seed in any::<u64>(), rotation in -0.3f64..0.3, scale in 0.8f64..1.25, mirror in any::<bool>()) {
        let labels = blob_labels(seed, 64, 48, 4);
        let fwd = Transform { rotation, scale, mirror };
        // The inverse of mirror∘rotate∘scale about the centre.
        let back = Transform { rotation: if mirror { rotation } else { -rotation }, scale: 1.0 / scale, mirror };
        let round = back.warp_labels(&fwd.warp_labels(&labels));
        let (mut valid, mut agree) = (0usize, 0usize);
        for (a, b) in labels.bits.data().iter().zip(round.bits.data()) {
            if *b != IGNORE {
                valid += 1;
                agree += (a == b) as usize;
            }
        }
        prop_assert!(valid > 0);
        prop_assert!(agree as f64 >= 0.95 * valid as f64, "{}/{} pixels agree", agree, valid);
    }

    #[test]
    fn warping_creates_no_new_classes(seed in any::<u64>(), rotation in -3.1f64..3.1, scale in 0.5f64..2.0, mirror in any::<bool>()) {
        let labels = blob_labels(seed, 40, 40, 5);
        let warped = Transform { rotation, scale, mirror }.warp_labels(&labels);
        let before: std::collections::BTreeSet<u64> = labels.bits.data().iter().copied().collect();
        for b in warped.bits.data() {
            prop_assert!(*b == IGNORE || before.contains(b));
        }
    }
}

#[test]
fn budget_resize_keeps_labels_aligned() {
    let labels = blob_labels(9, 1200, 900, 3);
    let image = FloatImage::from_fn(1200, 900, 3, |x, _, _| x as f32 / 1200.0);
    let (img, lab) = resize_to_pixel_budget(&image, Some(&labels), 600_000).unwrap();
    let lab = lab.unwrap();
    assert_eq!((img.width(), img.height()), (lab.width(), lab.height()));
    assert!(img.width() * img.height() <= 600_000);
    // Nearest-neighbour labels keep the alphabet.
    assert!(lab.bits.data().iter().all(|b| labels.bits.data().contains(b)));
}
