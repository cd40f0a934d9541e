//! Interleaved floating-point images (`0..=255` range) and resampling.

use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-channel mean subtracted from RGB inputs before the encoder.
pub const IMAGENET_MEAN: [f32; 3] = [123.68, 116.78, 103.94];

#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        FloatImage {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(FloatImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        FloatImage {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn from_rgb(img: &RgbImage) -> Self {
        FloatImage {
            width: img.width() as usize,
            height: img.height() as usize,
            channels: 3,
            data: img.as_raw().iter().map(|&v| v as f32).collect(),
        }
    }

    /// Rounds and saturates to 8 bits; needs three channels.
    pub fn to_rgb(&self) -> Result<RgbImage> {
        if self.channels != 3 {
            return Err(Error::Shape(format!("expected 3 channels, got {}", self.channels)));
        }
        let raw = self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .ok_or_else(|| Error::Shape("raw buffer size".into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::image(path, e))?;
        Ok(Self::from_rgb(&img.to_rgb8()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_rgb()?.save(path).map_err(|e| Error::image(path, e))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Bilinear sample at a continuous position (pixel centres on integers);
    /// returns `false` outside `[0, w-1] × [0, h-1]`.
    pub fn sample_bilinear(&self, sx: f64, sy: f64, out: &mut [f32]) -> bool {
        const TOL: f64 = 1e-6;
        let (wmax, hmax) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(sx >= -TOL && sy >= -TOL && sx <= wmax + TOL && sy <= hmax + TOL) {
            return false;
        }
        let (sx, sy) = (sx.clamp(0.0, wmax), sy.clamp(0.0, hmax));
        let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = ((sx - x0 as f64) as f32, (sy - y0 as f64) as f32);
        let (a, b, c, d) = (self.pixel(x0, y0), self.pixel(x1, y0), self.pixel(x0, y1), self.pixel(x1, y1));
        for k in 0..self.channels {
            let top = a[k] + (b[k] - a[k]) * fx;
            let bottom = c[k] + (d[k] - c[k]) * fx;
            out[k] = top + (bottom - top) * fy;
        }
        true
    }

    /// Bilinear resize with pixel-centre alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Self {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = FloatImage::new(width, height, self.channels);
        let mut px = vec![0.0; self.channels];
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                self.sample_bilinear(fx, fy, &mut px);
                out.pixel_mut(x, y).copy_from_slice(&px);
            }
        }
        out
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        let mut out = FloatImage::new(width, height, self.channels);
        for y in 0..height {
            let src = ((y0 + y) * self.width + x0) * self.channels;
            let dst = y * width * self.channels;
            out.data[dst..dst + width * self.channels].copy_from_slice(&self.data[src..src + width * self.channels]);
        }
        out
    }

    /// Extends to `width × height` at the bottom/right with `fill`.
    pub fn pad_to(&self, width: usize, height: usize, fill: f32) -> Self {
        let mut out = FloatImage::from_vec(width, height, self.channels, vec![fill; width * height * self.channels])
            .expect("size");
        let row = self.width * self.channels;
        for y in 0..self.height.min(height) {
            let n = row.min(width * self.channels);
            out.data[y * width * self.channels..][..n].copy_from_slice(&self.data[y * row..][..n]);
        }
        out
    }

    /// Network input: channels minus [`IMAGENET_MEAN`], shaped `[1, h, w, 3]`.
    pub fn to_input_tensor(&self) -> Result<Tensor> {
        if self.channels != 3 {
            return Err(Error::Shape(format!("network input needs 3 channels, got {}", self.channels)));
        }
        let data = self
            .data
            .chunks_exact(3)
            .flat_map(|px| [px[0] - IMAGENET_MEAN[0], px[1] - IMAGENET_MEAN[1], px[2] - IMAGENET_MEAN[2]])
            .collect();
        Tensor::from_vec(&[1, self.height, self.width, 3], data)
    }
}

/// Stacks equally sized images into one `[n, h, w, 3]` input tensor.
pub fn batch_tensor(images: &[&FloatImage]) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| Error::Empty("empty batch".into()))?;
    let (w, h) = (first.width, first.height);
    let mut data = Vec::with_capacity(images.len() * w * h * 3);
    for img in images {
        if (img.width, img.height) != (w, h) {
            return Err(Error::Shape("batch images differ in size".into()));
        }
        data.extend(img.to_input_tensor()?.into_vec());
    }
    Tensor::from_vec(&[images.len(), h, w, 3], data)
}
