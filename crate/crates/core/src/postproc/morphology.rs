//! Binary morphology with square or disk structuring elements.
//!
//! Pixels outside the image count as background. Closing is evaluated on a
//! canvas padded by the element radius, so it never removes foreground.

use serde::{Deserialize, Serialize};

use super::grid::{BinaryMask, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementShape {
    Square,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuringElement {
    pub shape: ElementShape,
    pub radius: usize,
}

impl Default for StructuringElement {
    /// 3×3 square.
    fn default() -> Self {
        StructuringElement {
            shape: ElementShape::Square,
            radius: 1,
        }
    }
}

impl StructuringElement {
    pub fn new(shape: ElementShape, radius: usize) -> Result<Self> {
        let s = StructuringElement { shape, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn square(radius: usize) -> Result<Self> {
        Self::new(ElementShape::Square, radius)
    }

    pub fn disk(radius: usize) -> Result<Self> {
        Self::new(ElementShape::Disk, radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(Error::InvalidParam("structuring element radius must be >= 1".into()));
        }
        Ok(())
    }

    /// Offsets `(dx, dy)` covered by the element.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if self.shape == ElementShape::Square || dx * dx + dy * dy <= r * r {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphOp {
    Erode,
    Dilate,
    Open,
    Close,
}

/// 1-D running min/max over a window of radius `r`; outside is `false`.
fn sweep_line(line: &[bool], r: usize, dilate: bool, out: &mut [bool]) {
    let n = line.len();
    // Prefix counts of foreground pixels.
    let mut prefix = vec![0usize; n + 1];
    for (i, &v) in line.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v as usize;
    }
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(n);
        let count = prefix[hi] - prefix[lo];
        *o = if dilate { count > 0 } else { count == 2 * r + 1 };
    }
}

fn square(mask: &BinaryMask, r: usize, dilate: bool) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut rows = vec![false; w * h];
    for y in 0..h {
        sweep_line(&mask.data()[y * w..(y + 1) * w], r, dilate, &mut rows[y * w..(y + 1) * w]);
    }
    let mut out = vec![false; w * h];
    let mut col = vec![false; h];
    let mut res = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        sweep_line(&col, r, dilate, &mut res);
        for y in 0..h {
            out[y * w + x] = res[y];
        }
    }
    Grid::from_vec(w, h, out).expect("same dims")
}

fn generic(mask: &BinaryMask, selem: &StructuringElement, dilate: bool) -> BinaryMask {
    let (w, h) = mask.dims();
    let offsets = selem.offsets();
    Grid::from_fn(w, h, |x, y| {
        let hit = |&(dx, dy): &(i64, i64)| {
            let (sx, sy) = (x as i64 + dx, y as i64 + dy);
            sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h && *mask.get(sx as usize, sy as usize)
        };
        if dilate {
            offsets.iter().any(hit)
        } else {
            offsets.iter().all(hit)
        }
    })
}

pub fn dilate(mask: &BinaryMask, selem: &StructuringElement) -> Result<BinaryMask> {
    selem.validate()?;
    Ok(match selem.shape {
        ElementShape::Square => square(mask, selem.radius, true),
        ElementShape::Disk => generic(mask, selem, true),
    })
}

/// Foreground survives only if the whole element, placed on it, lies on
/// foreground inside the image.
pub fn erode(mask: &BinaryMask, selem: &StructuringElement) -> Result<BinaryMask> {
    selem.validate()?;
    Ok(match selem.shape {
        ElementShape::Square => square(mask, selem.radius, false),
        ElementShape::Disk => generic(mask, selem, false),
    })
}

pub fn open(mask: &BinaryMask, selem: &StructuringElement) -> Result<BinaryMask> {
    dilate(&erode(mask, selem)?, selem)
}

pub fn close(mask: &BinaryMask, selem: &StructuringElement) -> Result<BinaryMask> {
    selem.validate()?;
    let r = selem.radius;
    let (w, h) = mask.dims();
    let padded = Grid::from_fn(w + 2 * r, h + 2 * r, |x, y| {
        x >= r && y >= r && x < w + r && y < h + r && *mask.get(x - r, y - r)
    });
    let closed = erode(&dilate(&padded, selem)?, selem)?;
    Ok(Grid::from_fn(w, h, |x, y| *closed.get(x + r, y + r)))
}

pub fn morph(mask: &BinaryMask, op: MorphOp, selem: &StructuringElement) -> Result<BinaryMask> {
    match op {
        MorphOp::Erode => erode(mask, selem),
        MorphOp::Dilate => dilate(mask, selem),
        MorphOp::Open => open(mask, selem),
        MorphOp::Close => close(mask, selem),
    }
}
