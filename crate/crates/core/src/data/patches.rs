//! Overlapping tiling into fixed-size patches and its inverse.

use serde::{Deserialize, Serialize};

use super::classmap::Labels;
use super::image::FloatImage;
use crate::error::{Error, Result};
use crate::postproc::ProbabilityMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    /// `(height, width)`.
    pub size: (usize, usize),
    pub margin: usize,
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec {
            size: (300, 300),
            margin: 75,
        }
    }
}

impl PatchSpec {
    pub fn square(size: usize, margin: usize) -> Result<Self> {
        let s = PatchSpec {
            size: (size, size),
            margin,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let min = self.size.0.min(self.size.1);
        if min == 0 || 2 * self.margin >= min {
            return Err(Error::InvalidParam(format!(
                "patch margin {} must be below half the patch side {min}",
                self.margin
            )));
        }
        Ok(())
    }

    /// Distance between consecutive patch origins: `(dy, dx)`.
    pub fn stride(&self) -> (usize, usize) {
        (self.size.0 - 2 * self.margin, self.size.1 - 2 * self.margin)
    }
}

/// Start offsets along one axis; the last patch is aligned to the end.
pub fn axis_origins(len: usize, size: usize, stride: usize) -> Vec<usize> {
    if len <= size {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut o = 0;
    loop {
        out.push(o.min(len - size));
        if o + size >= len {
            break;
        }
        o += stride;
    }
    out.dedup();
    out
}

/// Patch origins `(x, y)` in raster order.
pub fn patch_origins(width: usize, height: usize, spec: &PatchSpec) -> Result<Vec<(usize, usize)>> {
    spec.validate()?;
    let (sy, sx) = spec.stride();
    let ys = axis_origins(height, spec.size.0, sy);
    let xs = axis_origins(width, spec.size.1, sx);
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: FloatImage,
    pub labels: Option<Labels>,
    pub origin: (usize, usize),
}

/// Tiles an image (and labels) into overlapping patches.
///
/// Images smaller than a patch are padded at the bottom/right with zeros;
/// padded label pixels are ignored.
pub fn extract_patches(image: &FloatImage, labels: Option<&Labels>, spec: &PatchSpec) -> Result<Vec<Patch>> {
    let (ph, pw) = spec.size;
    let (w, h) = (image.width(), image.height());
    let (cw, ch) = (w.max(pw), h.max(ph));
    let image = if (cw, ch) != (w, h) { image.pad_to(cw, ch, 0.0) } else { image.clone() };
    let labels = labels.map(|l| if (cw, ch) != (w, h) { l.pad_to(cw, ch) } else { l.clone() });
    Ok(patch_origins(cw, ch, spec)?
        .into_iter()
        .map(|(x, y)| Patch {
            image: image.crop(x, y, pw, ph),
            labels: labels.as_ref().map(|l| l.crop(x, y, pw, ph)),
            origin: (x, y),
        })
        .collect())
}

/// Reassembles per-patch probabilities into a `width × height` map.
///
/// Each pixel is taken from the patch where it lies farthest from the patch
/// border; ties go to the patch with the smaller `(y, x)` origin.
pub fn stitch_predictions(
    patches: &[(ProbabilityMap, (usize, usize))],
    width: usize,
    height: usize,
) -> Result<ProbabilityMap> {
    let channels = patches
        .first()
        .ok_or_else(|| Error::Empty("no patches to stitch".into()))?
        .0
        .channels();
    // Best (distance, origin) per pixel; patch index is resolved afterwards.
    type Claim = Option<(usize, (usize, usize), usize)>;
    let mut best: Vec<Claim> = vec![None; width * height];
    for (pi, (map, (ox, oy))) in patches.iter().enumerate() {
        if map.channels() != channels {
            return Err(Error::Shape("patches differ in channel count".into()));
        }
        let (pw, ph) = (map.width(), map.height());
        for ly in 0..ph {
            let y = oy + ly;
            if y >= height {
                break;
            }
            for lx in 0..pw {
                let x = ox + lx;
                if x >= width {
                    break;
                }
                let d = lx.min(ly).min(pw - 1 - lx).min(ph - 1 - ly);
                let slot = &mut best[y * width + x];
                let better = match *slot {
                    None => true,
                    Some((bd, (bx, by), _)) => d > bd || (d == bd && (*oy, *ox) < (by, bx)),
                };
                if better {
                    *slot = Some((d, (*ox, *oy), pi));
                }
            }
        }
    }
    let mut data = Vec::with_capacity(width * height * channels);
    for (i, slot) in best.iter().enumerate() {
        let (_, (ox, oy), pi) = slot.ok_or_else(|| {
            Error::InvalidParam(format!("pixel ({}, {}) is not covered by any patch", i % width, i / width))
        })?;
        let map = &patches[pi].0;
        let (x, y) = (i % width - ox, i / width - oy);
        for c in 0..channels {
            data.push(map.value(x, y, c));
        }
    }
    ProbabilityMap::new(width, height, channels, data)
}
