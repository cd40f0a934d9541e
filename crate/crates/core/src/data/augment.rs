//! Random rotation, scaling and mirroring applied jointly to image and labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classmap::{Labels, IGNORE};
use super::image::FloatImage;
use crate::error::{Error, Result};
use crate::postproc::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    /// Radians.
    pub rotation_range: (f64, f64),
    pub scale_range: (f64, f64),
    pub mirror: bool,
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            rotation_range: (-0.2, 0.2),
            scale_range: (0.8, 1.2),
            mirror: true,
            seed: 0,
        }
    }
}

impl AugmentParams {
    /// No-op augmentation.
    pub fn identity() -> Self {
        AugmentParams {
            rotation_range: (0.0, 0.0),
            scale_range: (1.0, 1.0),
            mirror: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (r0, r1) = self.rotation_range;
        let pi = std::f64::consts::PI;
        if !(r0 <= r1 && r0 >= -pi && r1 <= pi) {
            return Err(Error::InvalidParam(format!(
                "rotation range ({r0}, {r1}) must be ordered and within [-pi, pi]"
            )));
        }
        let (s0, s1) = self.scale_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return Err(Error::InvalidParam(format!("scale range ({s0}, {s1}) must be positive and ordered")));
        }
        Ok(())
    }

    /// Draws one transform; the same seed always gives the same draw.
    pub fn sample(&self) -> Result<Transform> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut uniform = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        let rotation = uniform(self.rotation_range);
        let scale = uniform(self.scale_range);
        let mirror = self.mirror && rng.gen_bool(0.5);
        Ok(Transform { rotation, scale, mirror })
    }
}

/// Similarity transform about the image centre: mirror (x), then rotate,
/// then scale. The canvas size is unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: f64,
    pub scale: f64,
    pub mirror: bool,
}

impl Transform {
    pub fn identity() -> Self {
        Transform {
            rotation: 0.0,
            scale: 1.0,
            mirror: false,
        }
    }

    /// Source position of output pixel `(x, y)` on a `w × h` canvas.
    pub fn source(&self, x: f64, y: f64, w: usize, h: usize) -> (f64, f64) {
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let (dx, dy) = ((x - cx) / self.scale, (y - cy) / self.scale);
        let (s, c) = (-self.rotation).sin_cos();
        let (rx, ry) = (c * dx - s * dy, s * dx + c * dy);
        let rx = if self.mirror { -rx } else { rx };
        (cx + rx, cy + ry)
    }

    /// Bilinear warp; pixels mapped from outside the canvas become `fill`.
    pub fn warp_image(&self, image: &FloatImage, fill: f32) -> FloatImage {
        let (w, h, c) = (image.width(), image.height(), image.channels());
        let mut out = FloatImage::new(w, h, c);
        let mut px = vec![0.0; c];
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = self.source(x as f64, y as f64, w, h);
                if !image.sample_bilinear(sx, sy, &mut px) {
                    px.iter_mut().for_each(|v| *v = fill);
                }
                out.pixel_mut(x, y).copy_from_slice(&px);
            }
        }
        out
    }

    /// Nearest-neighbour warp; pixels mapped from outside become ignored.
    pub fn warp_labels(&self, labels: &Labels) -> Labels {
        let (w, h) = (labels.width(), labels.height());
        let bits = Grid::from_fn(w, h, |x, y| {
            let (sx, sy) = self.source(x as f64, y as f64, w, h);
            let (nx, ny) = (sx.round(), sy.round());
            if nx < 0.0 || ny < 0.0 || nx > (w - 1) as f64 || ny > (h - 1) as f64 {
                IGNORE
            } else {
                *labels.bits.get(nx as usize, ny as usize)
            }
        });
        Labels {
            n_classes: labels.n_classes,
            multilabel: labels.multilabel,
            bits,
        }
    }
}

/// Samples a transform from `params` and applies it to both rasters.
pub fn augment(image: &FloatImage, labels: &Labels, params: &AugmentParams) -> Result<(FloatImage, Labels)> {
    if (image.width(), image.height()) != (labels.width(), labels.height()) {
        return Err(Error::Shape("image and labels differ in size".into()));
    }
    let t = params.sample()?;
    Ok((t.warp_image(image, 0.0), t.warp_labels(labels)))
}
