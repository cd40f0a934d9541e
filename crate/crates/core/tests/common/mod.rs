//! Brute-force oracles shared by the operator and acceptance suites.
#![allow(dead_code)]

use std::collections::VecDeque;

use docseg::postproc::{BinaryMask, ElementShape, Grid, ProbabilityChannel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bimodal random map with some spatial structure.
pub fn random_map(seed: u64, w: usize, h: usize) -> ProbabilityChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy, r) = (rng.gen_range(0..w) as f64, rng.gen_range(0..h) as f64, rng.gen_range(2.0..10.0));
    let (lo, hi) = (rng.gen_range(0.0..0.4f32), rng.gen_range(0.5..1.0f32));
    Grid::from_fn(w, h, |x, y| {
        let inside = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt() < r;
        let base = if inside { hi } else { lo };
        (base + rng.gen_range(-0.2..0.2f32)).clamp(0.0, 1.0)
    })
}

pub fn random_mask(seed: u64, w: usize, h: usize, density: f64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grid::from_fn(w, h, |_, _| rng.gen_bool(density))
}

/// Textbook Otsu: maximise `w0 w1 (mu0 - mu1)^2` over bin edges.
pub fn otsu_oracle(map: &ProbabilityChannel) -> Option<usize> {
    let bins: Vec<usize> = map.data().iter().map(|&v| ((v * 256.0).floor() as usize).min(255)).collect();
    let n = bins.len() as f64;
    let mut best: Option<(usize, f64)> = None;
    for k in 1..256 {
        let (lo, hi): (Vec<usize>, Vec<usize>) = bins.iter().partition(|&&b| b < k);
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
        let score = (lo.len() as f64 / n) * (hi.len() as f64 / n) * (mean(&lo) - mean(&hi)).powi(2);
        if best.is_none_or(|(_, b)| score > b * (1.0 + 1e-12)) {
            best = Some((k, score));
        }
    }
    best.map(|(k, _)| k)
}

pub fn hysteresis_oracle(map: &ProbabilityChannel, low: f32, high: f32, four: bool) -> BinaryMask {
    let (w, h) = map.dims();
    let mut out = Grid::new(w, h, false);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if *map.get(x, y) >= high {
                out.set(x, y, true);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if (dx == 0 && dy == 0) || (four && dx != 0 && dy != 0) {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !*out.get(nx, ny) && *map.get(nx, ny) >= low {
                    out.set(nx, ny, true);
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    out
}

/// BFS labelling in raster order of first pixel.
pub fn components_oracle(mask: &BinaryMask, four: bool) -> Grid<u32> {
    let (w, h) = mask.dims();
    let mut labels = Grid::new(w, h, 0u32);
    let mut next = 0;
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) || *labels.get(x, y) != 0 {
                continue;
            }
            next += 1;
            labels.set(x, y, next);
            let mut queue = VecDeque::from([(x, y)]);
            while let Some((cx, cy)) = queue.pop_front() {
                for (dx, dy) in [(-1i64, -1i64), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                    if four && dx != 0 && dy != 0 {
                        continue;
                    }
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if *mask.get(nx, ny) && *labels.get(nx, ny) == 0 {
                        labels.set(nx, ny, next);
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
    }
    labels
}

pub fn element_offsets(shape: ElementShape, r: i64) -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if shape == ElementShape::Square || dx * dx + dy * dy <= r * r {
                v.push((dx, dy));
            }
        }
    }
    v
}

/// Minkowski dilation/erosion on a canvas of size `(w, h)` whose origin is
/// offset by `pad`; outside the canvas is background.
pub fn minkowski(mask: &BinaryMask, offs: &[(i64, i64)], dilation: bool) -> BinaryMask {
    let (w, h) = mask.dims();
    let at = |x: i64, y: i64| x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && *mask.get(x as usize, y as usize);
    Grid::from_fn(w, h, |x, y| {
        let (x, y) = (x as i64, y as i64);
        if dilation {
            offs.iter().any(|&(dx, dy)| at(x - dx, y - dy))
        } else {
            offs.iter().all(|&(dx, dy)| at(x + dx, y + dy))
        }
    })
}

pub fn pad(mask: &BinaryMask, r: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    Grid::from_fn(w + 2 * r, h + 2 * r, |x, y| {
        x >= r && y >= r && x < w + r && y < h + r && *mask.get(x - r, y - r)
    })
}

pub fn crop(mask: &BinaryMask, r: usize, w: usize, h: usize) -> BinaryMask {
    Grid::from_fn(w, h, |x, y| *mask.get(x + r, y + r))
}
