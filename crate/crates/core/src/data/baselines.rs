//! Baseline annotations: integer polylines rendered as thick masks.

use std::path::Path;

use crate::error::{Error, Result};
use crate::postproc::{BinaryMask, Grid};

/// One annotated text line as `[x, y]` vertices.
pub type BaselinePath = Vec<[i64; 2]>;

/// Default half-width of rendered baselines in pixels.
pub const BASELINE_RADIUS: u32 = 5;

/// Reads `[[[x, y], ...], ...]`.
pub fn load_baselines(path: impl AsRef<Path>) -> Result<Vec<BaselinePath>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `|P - seg(A, B)|^2 <= r^2`, evaluated exactly in integers.
fn within(p: [i64; 2], a: [i64; 2], b: [i64; 2], r2: i128) -> bool {
    let (abx, aby) = ((b[0] - a[0]) as i128, (b[1] - a[1]) as i128);
    let (apx, apy) = ((p[0] - a[0]) as i128, (p[1] - a[1]) as i128);
    let len2 = abx * abx + aby * aby;
    let dot = apx * abx + apy * aby;
    if len2 == 0 || dot <= 0 {
        return apx * apx + apy * apy <= r2;
    }
    if dot >= len2 {
        let (bpx, bpy) = ((p[0] - b[0]) as i128, (p[1] - b[1]) as i128);
        return bpx * bpx + bpy * bpy <= r2;
    }
    let cross = abx * apy - aby * apx;
    cross * cross <= r2 * len2
}

fn draw_line(mask: &mut BinaryMask, a: [i64; 2], b: [i64; 2]) {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let (dx, dy) = ((b[0] - a[0]).abs(), -(b[1] - a[1]).abs());
    let (sx, sy) = (if a[0] < b[0] { 1 } else { -1 }, if a[1] < b[1] { 1 } else { -1 });
    let (mut x, mut y, mut err) = (a[0], a[1], dx + dy);
    loop {
        if x >= 0 && y >= 0 && x < w && y < h {
            mask.set(x as usize, y as usize, true);
        }
        if x == b[0] && y == b[1] {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Marks every pixel within `radius` (Euclidean, inclusive) of a baseline
/// segment. Radius 0 draws one-pixel-wide Bresenham lines.
pub fn render_baselines(lines: &[BaselinePath], width: usize, height: usize, radius: u32) -> BinaryMask {
    let mut mask = Grid::new(width, height, false);
    let r = radius as i64;
    let r2 = (r * r) as i128;
    for line in lines {
        let segments: Vec<([i64; 2], [i64; 2])> = match line.len() {
            0 => continue,
            1 => vec![(line[0], line[0])],
            _ => line.windows(2).map(|s| (s[0], s[1])).collect(),
        };
        for (a, b) in segments {
            if radius == 0 {
                draw_line(&mut mask, a, b);
                continue;
            }
            let x0 = (a[0].min(b[0]) - r).max(0);
            let x1 = (a[0].max(b[0]) + r).min(width as i64 - 1);
            let y0 = (a[1].min(b[1]) - r).max(0);
            let y1 = (a[1].max(b[1]) + r).min(height as i64 - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if within([x, y], a, b, r2) {
                        mask.set(x as usize, y as usize, true);
                    }
                }
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_segment_band() {
        let m = render_baselines(&[vec![[10, 50], [90, 50]]], 100, 100, 5);
        assert!(*m.get(50, 50));
        assert!(*m.get(50, 55));
        assert!(!*m.get(50, 56));
        // Rounded caps.
        assert!(*m.get(5, 50) && !*m.get(4, 50));
        assert!(!*m.get(6, 46));
        assert_eq!((0..100).filter(|&y| *m.get(50, y)).count(), 11);
    }

    #[test]
    fn empty_input_is_blank() {
        assert_eq!(render_baselines(&[], 8, 8, 5).count(), 0);
    }

    #[test]
    fn zero_radius_draws_thin_line() {
        let m = render_baselines(&[vec![[0, 0], [7, 3]]], 8, 8, 0);
        assert_eq!(m.count(), 8);
        assert!(*m.get(0, 0) && *m.get(7, 3));
    }

    #[test]
    fn out_of_bounds_vertices_are_clipped() {
        let m = render_baselines(&[vec![[-20, 2], [30, 2]]], 10, 5, 1);
        assert_eq!(m.count(), 30);
    }
}
