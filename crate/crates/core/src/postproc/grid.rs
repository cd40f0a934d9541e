//! Raster containers for probability maps, masks and label maps.

use crate::error::{Error, Result};

/// Row-major 2-D raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// One channel of per-pixel probabilities.
pub type ProbabilityChannel = Grid<f32>;
/// Binary mask; `true` is foreground.
pub type BinaryMask = Grid<bool>;
/// Integer labels (component ids or class indices); 0 is background.
pub type LabelMap = Grid<u32>;

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Grid {
            width,
            height,
            data: vec![fill; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} grid needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Grid { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = y * self.width + x;
        self.data[i] = v;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "raster size mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

impl Grid<f32> {
    /// Checks that every value is a probability.
    pub fn probabilities(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParam(format!("probability {v} outside [0, 1]")));
        }
        Self::from_vec(width, height, data)
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max)
    }
}

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn complement(&self) -> Self {
        self.map(|v| !v)
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.same_dims(other)?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect(),
        })
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    /// Foreground pixel coordinates `(x, y)` in raster order.
    pub fn foreground(&self) -> Vec<(usize, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    /// 8-bit grey image: 255 for foreground, 0 for background.
    pub fn to_gray(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([if *self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }

    /// Non-zero pixels of a grey image are foreground.
    pub fn from_gray(img: &image::GrayImage) -> Self {
        Grid::from_fn(img.width() as usize, img.height() as usize, |x, y| {
            img.get_pixel(x as u32, y as u32).0[0] > 0
        })
    }
}

/// Per-pixel probabilities for several classes, `(h, w, c)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{width}x{height}x{channels} probability map needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParam(format!("probability {v} outside [0, 1]")));
        }
        Ok(ProbabilityMap {
            width,
            height,
            channels,
            data,
        })
    }

    /// Stacks single-channel maps of equal size.
    pub fn from_channels(channels: &[ProbabilityChannel]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::Empty("no channels".into()))?;
        let (w, h) = first.dims();
        let c = channels.len();
        let mut data = vec![0.0; w * h * c];
        for (k, ch) in channels.iter().enumerate() {
            first.same_dims(ch)?;
            for (i, &v) in ch.data().iter().enumerate() {
                data[i * c + k] = v;
            }
        }
        Self::new(w, h, c, data)
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

    pub fn value(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn channel(&self, c: usize) -> Result<ProbabilityChannel> {
        if c >= self.channels {
            return Err(Error::InvalidParam(format!(
                "channel {c} out of range for {} channels",
                self.channels
            )));
        }
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Grid::from_vec(self.width, self.height, data)
    }

    /// Class index of the most probable channel per pixel (first on ties).
    pub fn argmax(&self) -> LabelMap {
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| {
                let mut best = 0;
                for (k, &v) in px.iter().enumerate() {
                    if v > px[best] {
                        best = k;
                    }
                }
                best as u32
            })
            .collect();
        Grid {
            width: self.width,
            height: self.height,
            data,
        }
    }
}
