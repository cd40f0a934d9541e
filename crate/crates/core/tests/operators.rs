//! Post-processing operators against brute-force oracles.

mod common;

use docseg::data::{render_baselines, BaselinePath};
use docseg::postproc::geometry::dense_centerline;
use docseg::postproc::{
    close, dilate, erode, extract_extreme_quad, hysteresis_threshold, label_components, open, threshold_fixed, threshold_otsu,
    vectorize_polyline, Connectivity, ElementShape, Grid, Quad, StructuringElement,
};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn otsu_matches_brute_force(seed in any::<u64>(), w in 4usize..40, h in 4usize..40) {
        let map = random_map(seed, w, h);
        match (threshold_otsu(&map), otsu_oracle(&map)) {
            (Ok((t, mask)), Some(k)) => {
                prop_assert_eq!(t, k as f32 / 256.0);
                prop_assert_eq!(mask, map.map(|&v| v >= t));
            }
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "implementation {:?} vs oracle {:?}", a.map(|r| r.0), b),
        }
    }

    #[test]
    fn hysteresis_matches_flood_fill(seed in any::<u64>(), w in 2usize..40, h in 2usize..40,
                                     low in 0.0f32..0.5, gap in 0.0f32..0.5, four in any::<bool>()) {
        let map = random_map(seed, w, h);
        let high = low + gap;
        let conn = if four { Connectivity::Four } else { Connectivity::Eight };
        prop_assert_eq!(hysteresis_threshold(&map, low, high, conn).unwrap(), hysteresis_oracle(&map, low, high, four));
    }

    #[test]
    fn components_match_bfs(seed in any::<u64>(), w in 1usize..40, h in 1usize..40,
                            density in 0.1f64..0.8, four in any::<bool>()) {
        let mask = random_mask(seed, w, h, density);
        let conn = if four { Connectivity::Four } else { Connectivity::Eight };
        let cc = label_components(&mask, conn);
        let oracle = components_oracle(&mask, four);
        prop_assert_eq!(&cc.labels, &oracle);
        for c in &cc.components {
            prop_assert_eq!(c.size, oracle.data().iter().filter(|&&l| l == c.label).count());
        }
    }

    #[test]
    fn morphology_matches_minkowski(seed in any::<u64>(), r in 1usize..4, disk in any::<bool>(), density in 0.2f64..0.8) {
        let shape = if disk { ElementShape::Disk } else { ElementShape::Square };
        let se = StructuringElement::new(shape, r).unwrap();
        let offs = element_offsets(shape, r as i64);
        let m = random_mask(seed, 32, 32, density);

        let d = minkowski(&m, &offs, true);
        let e = minkowski(&m, &offs, false);
        prop_assert_eq!(dilate(&m, &se).unwrap(), d);
        prop_assert_eq!(erode(&m, &se).unwrap(), e.clone());
        prop_assert_eq!(open(&m, &se).unwrap(), minkowski(&e, &offs, true));
        let padded = pad(&m, r);
        let closed = crop(&minkowski(&minkowski(&padded, &offs, true), &offs, false), r, 32, 32);
        prop_assert_eq!(close(&m, &se).unwrap(), closed);
    }

    #[test]
    fn opening_and_closing_are_idempotent(seed in any::<u64>(), r in 1usize..4, disk in any::<bool>(), density in 0.2f64..0.8) {
        let shape = if disk { ElementShape::Disk } else { ElementShape::Square };
        let se = StructuringElement::new(shape, r).unwrap();
        let m = random_mask(seed, 32, 32, density);
        let o = open(&m, &se).unwrap();
        let c = close(&m, &se).unwrap();
        prop_assert_eq!(open(&o, &se).unwrap(), o.clone());
        prop_assert_eq!(close(&c, &se).unwrap(), c.clone());
        prop_assert!(o.is_subset_of(&m));
        prop_assert!(m.is_subset_of(&c));
    }

    #[test]
    fn rendered_baselines_match_distance(seed in any::<u64>(), radius in 0u32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (48usize, 40usize);
        let line: BaselinePath = (0..rng.gen_range(2..5))
            .map(|_| [rng.gen_range(-5..53i64), rng.gen_range(-5..45i64)])
            .collect();
        let mask = render_baselines(std::slice::from_ref(&line), w, h, radius);
        if radius == 0 {
            // One-pixel lines: every drawn pixel is within half a diagonal.
            for (x, y) in mask.foreground() {
                prop_assert!(seg_dist2(&line, x as i64, y as i64) <= 0.5 + 1e-9);
            }
        } else {
            let r2 = (radius * radius) as f64;
            for y in 0..h {
                for x in 0..w {
                    let d2 = seg_dist2(&line, x as i64, y as i64);
                    prop_assert_eq!(*mask.get(x, y), d2 <= r2 + 1e-9, "pixel ({}, {}) d2 {}", x, y, d2);
                }
            }
        }
    }

    #[test]
    fn equal_hysteresis_thresholds_reduce_to_fixed(seed in any::<u64>(), t in 0.0f32..=1.0, four in any::<bool>()) {
        let map = random_map(seed, 24, 24);
        let conn = if four { Connectivity::Four } else { Connectivity::Eight };
        prop_assert_eq!(hysteresis_threshold(&map, t, t, conn).unwrap(), threshold_fixed(&map, t).unwrap());
    }

    #[test]
    fn extreme_quad_vertices_are_foreground(seed in any::<u64>(), density in 0.05f64..0.6) {
        let mask = random_mask(seed, 20, 16, density);
        // Collinear or single-pixel foregrounds give degenerate quads, which are rejected.
        if let Ok(q) = extract_extreme_quad(&mask) {
            for p in q.corners() {
                prop_assert_eq!(p[0].fract(), 0.0);
                prop_assert!(*mask.get(p[0] as usize, p[1] as usize));
            }
        }
    }

    #[test]
    fn extreme_quad_of_rotated_rectangle(angle in -0.6f64..0.6, hw in 10.0f64..25.0, hh in 6.0f64..18.0) {
        let (c, s) = (angle.cos(), angle.sin());
        let (cx, cy) = (40.0, 40.0);
        let mask = Grid::from_fn(80, 80, |x, y| {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            (dx * c + dy * s).abs() <= hw && (-dx * s + dy * c).abs() <= hh
        });
        let q = extract_extreme_quad(&mask).unwrap();
        let truth: Vec<[f64; 2]> = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .iter()
            .map(|&(u, v)| [cx + u * c - v * s, cy + u * s + v * c])
            .collect();
        // Extreme points drift along edges that run close to a diagonal, so
        // corner accuracy is only checked for page-like skew.
        for p in q.corners().iter().filter(|_| angle.abs() < 0.35) {
            let d = truth.iter().map(|t| ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt()).fold(f64::MAX, f64::min);
            prop_assert!(d < 2.5, "corner {:?} is {} px from the rectangle corners", p, d);
        }
        // Quad vertices are pixel centres: compare with the rectangle traced
        // through the outermost centres, half a pixel inside the boundary.
        let inner: Vec<[f64; 2]> = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .iter()
            .map(|&(u, v)| (u - 0.5 * u.signum(), v - 0.5 * v.signum()))
            .map(|(u, v)| [cx + u * c - v * s, cy + u * s + v * c])
            .collect();
        let true_quad = Quad::new([inner[0], inner[1], inner[2], inner[3]]).unwrap();
        prop_assert!(docseg::eval::quad_iou(&q, &true_quad) > 0.85);
    }

    #[test]
    fn simplified_sine_band_stays_within_epsilon(amp in 2.0f64..10.0, period in 20.0f64..60.0, eps in 0.5f64..4.0) {
        let w = 120usize;
        let mut pixels = Vec::new();
        for x in 0..w {
            let yc = 20.0 + amp * (2.0 * std::f64::consts::PI * x as f64 / period).sin();
            for y in (yc.round() as i64 - 1)..=(yc.round() as i64 + 1) {
                pixels.push((x, y as usize));
            }
        }
        let dense = dense_centerline(&pixels).unwrap();
        let line = vectorize_polyline(&pixels, eps).unwrap();
        prop_assert_eq!(line.vertices().first(), dense.first());
        prop_assert_eq!(line.vertices().last(), dense.last());
        for p in &dense {
            prop_assert!(line.distance_to(*p) <= eps + 1e-9);
        }
        prop_assert!(line.len() < dense.len());
    }
}

/// Squared distance from a pixel centre to a polyline (exact formula).
fn seg_dist2(line: &[[i64; 2]], px: i64, py: i64) -> f64 {
    let mut best = f64::MAX;
    let segs: Vec<([i64; 2], [i64; 2])> = if line.len() == 1 {
        vec![(line[0], line[0])]
    } else {
        line.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (a, b) in segs {
        let (vx, vy) = ((b[0] - a[0]) as f64, (b[1] - a[1]) as f64);
        let (wx, wy) = ((px - a[0]) as f64, (py - a[1]) as f64);
        let len2 = vx * vx + vy * vy;
        let t = if len2 == 0.0 { 0.0 } else { ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0) };
        let (dx, dy) = (wx - t * vx, wy - t * vy);
        best = best.min(dx * dx + dy * dy);
    }
    best
}

#[test]
fn otsu_separates_two_levels() {
    let map = Grid::from_fn(10, 10, |x, _| if x < 5 { 0.1f32 } else { 0.9 });
    let (t, mask) = threshold_otsu(&map).unwrap();
    assert!(t > 0.1 && t <= 0.9);
    assert_eq!(mask.count(), 50);
}
