//! Dense row-major `f32` tensors.
//!
//! Activations are laid out NHWC (batch, height, width, channels); convolution
//! kernels are HWIO (kernel height, kernel width, input channels, output
//! channels), which is also the layout of imported weight files.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f32) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                len,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// `(n, h, w, c)` of a rank-4 tensor.
    pub fn nhwc(&self) -> (usize, usize, usize, usize) {
        assert_eq!(self.shape.len(), 4, "expected an NHWC tensor, got {:?}", self.shape);
        (self.shape[0], self.shape[1], self.shape[2], self.shape[3])
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Zero-pads an NHWC tensor spatially.
    pub fn pad_spatial(&self, top: usize, bottom: usize, left: usize, right: usize) -> Tensor {
        let (n, h, w, c) = self.nhwc();
        let (oh, ow) = (h + top + bottom, w + left + right);
        let mut out = Tensor::zeros(&[n, oh, ow, c]);
        for b in 0..n {
            for y in 0..h {
                let src = ((b * h + y) * w) * c;
                let dst = ((b * oh + y + top) * ow + left) * c;
                out.data[dst..dst + w * c].copy_from_slice(&self.data[src..src + w * c]);
            }
        }
        out
    }

    /// Crops an NHWC tensor to `[top, top + h) × [left, left + w)`.
    pub fn crop_spatial(&self, top: usize, left: usize, h: usize, w: usize) -> Tensor {
        let (n, ih, iw, c) = self.nhwc();
        assert!(top + h <= ih && left + w <= iw, "crop out of bounds");
        let mut out = Tensor::zeros(&[n, h, w, c]);
        for b in 0..n {
            for y in 0..h {
                let src = ((b * ih + y + top) * iw + left) * c;
                let dst = ((b * h + y) * w) * c;
                out.data[dst..dst + w * c].copy_from_slice(&self.data[src..src + w * c]);
            }
        }
        out
    }

    /// Concatenates NHWC tensors along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let (n, h, w, _) = parts[0].nhwc();
        for p in parts {
            let (pn, ph, pw, _) = p.nhwc();
            if (pn, ph, pw) != (n, h, w) {
                return Err(Error::Shape(format!(
                    "concat of {:?} with {:?}",
                    parts[0].shape, p.shape
                )));
            }
        }
        let total: usize = parts.iter().map(|p| p.shape[3]).sum();
        let mut out = Tensor::zeros(&[n, h, w, total]);
        for px in 0..n * h * w {
            let mut off = 0;
            for p in parts {
                let c = p.shape[3];
                out.data[px * total + off..px * total + off + c]
                    .copy_from_slice(&p.data[px * c..px * c + c]);
                off += c;
            }
        }
        Ok(out)
    }

    /// Splits the channel axis of an NHWC tensor at the given widths.
    pub fn split_channels(&self, widths: &[usize]) -> Vec<Tensor> {
        let (n, h, w, c) = self.nhwc();
        assert_eq!(widths.iter().sum::<usize>(), c);
        let mut outs: Vec<Tensor> = widths.iter().map(|&k| Tensor::zeros(&[n, h, w, k])).collect();
        for px in 0..n * h * w {
            let mut off = 0;
            for (o, &k) in outs.iter_mut().zip(widths) {
                o.data[px * k..px * k + k].copy_from_slice(&self.data[px * c + off..px * c + off + k]);
                off += k;
            }
        }
        outs
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_then_crop_is_identity() {
        let t = Tensor::from_vec(&[1, 2, 3, 2], (0..12).map(|v| v as f32).collect()).unwrap();
        let p = t.pad_spatial(1, 2, 3, 0);
        assert_eq!(p.shape(), &[1, 5, 6, 2]);
        assert_eq!(p.crop_spatial(1, 3, 2, 3), t);
    }

    #[test]
    fn concat_split_round_trip() {
        let a = Tensor::filled(&[2, 2, 2, 3], 1.0);
        let b = Tensor::filled(&[2, 2, 2, 1], 2.0);
        let c = Tensor::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[2, 2, 2, 4]);
        assert_eq!(&c.data()[..4], &[1.0, 1.0, 1.0, 2.0]);
        let parts = c.split_channels(&[3, 1]);
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 2], vec![0.0; 3]).is_err());
    }
}
