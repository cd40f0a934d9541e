//! Numeric backends for the convolution kernels.
//!
//! Everything except convolution is cheap elementwise work and lives in
//! [`crate::netgraph::ops`]. Convolutions are routed through [`Backend`] so the
//! fast GEMM path can be checked against a direct-loop reference.

mod cpu;
mod naive;

pub use cpu::CpuBackend;
pub use naive::NaiveBackend;

use crate::tensor::Tensor;

/// Gradients of a convolution with respect to its input, kernel and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub kernel: Tensor,
    pub bias: Vec<f32>,
}

/// Square-kernel "same" convolution geometry.
///
/// Padding follows the TensorFlow `SAME` convention: the output has
/// `ceil(input / stride)` samples and the total padding is split with the
/// extra pixel (if any) on the bottom/right side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn new(kernel: usize, stride: usize) -> Self {
        ConvGeometry { kernel, stride }
    }

    pub fn output_size(&self, input: usize) -> usize {
        input.div_ceil(self.stride)
    }

    pub fn pad_before(&self, input: usize) -> usize {
        let out = self.output_size(input);
        let needed = (out.saturating_sub(1)) * self.stride + self.kernel;
        needed.saturating_sub(input) / 2
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// `x`: NHWC input, `kernel`: `[k, k, c_in, c_out]`.
    fn conv2d(&self, x: &Tensor, kernel: &Tensor, bias: Option<&[f32]>, stride: usize) -> Tensor;

    /// Backpropagates `dy` (NHWC, shaped like the forward output).
    fn conv2d_backward(
        &self,
        x: &Tensor,
        kernel: &Tensor,
        stride: usize,
        dy: &Tensor,
        need_input_grad: bool,
    ) -> ConvGrads;
}

pub(crate) fn check_conv_shapes(x: &Tensor, kernel: &Tensor) -> (usize, usize, usize) {
    let (_, _, _, c) = x.nhwc();
    let ks = kernel.shape();
    assert_eq!(ks.len(), 4, "kernel must be [k, k, c_in, c_out]");
    assert_eq!(ks[0], ks[1], "only square kernels are supported");
    assert_eq!(ks[2], c, "kernel expects {} input channels, input has {}", ks[2], c);
    (ks[0], ks[2], ks[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn same_padding_matches_tensorflow() {
        let g = ConvGeometry::new(7, 2);
        assert_eq!(g.output_size(224), 112);
        assert_eq!(g.pad_before(224), 2);
        let g = ConvGeometry::new(3, 2);
        assert_eq!(g.pad_before(64), 0);
        assert_eq!(ConvGeometry::new(3, 1).pad_before(10), 1);
        assert_eq!(ConvGeometry::new(1, 2).pad_before(10), 0);
    }

    #[test]
    fn gemm_backend_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fast = CpuBackend::default();
        let slow = NaiveBackend;
        for &(k, s, c_in, c_out, h, w) in &[
            (3usize, 1usize, 5usize, 4usize, 7usize, 9usize),
            (3, 2, 3, 6, 8, 8),
            (1, 1, 6, 3, 5, 4),
            (1, 2, 4, 5, 6, 7),
            (7, 2, 3, 4, 11, 10),
        ] {
            let x = random(&[2, h, w, c_in], &mut rng);
            let kern = random(&[k, k, c_in, c_out], &mut rng);
            let bias: Vec<f32> = (0..c_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = fast.conv2d(&x, &kern, Some(&bias), s);
            let b = slow.conv2d(&x, &kern, Some(&bias), s);
            assert_eq!(a.shape(), b.shape());
            assert!(a.max_abs_diff(&b) < 1e-4, "forward k={k} s={s}");

            let dy = random(a.shape(), &mut rng);
            let ga = fast.conv2d_backward(&x, &kern, s, &dy, true);
            let gb = slow.conv2d_backward(&x, &kern, s, &dy, true);
            assert!(ga.kernel.max_abs_diff(&gb.kernel) < 1e-3, "dkernel k={k} s={s}");
            assert!(ga.input.unwrap().max_abs_diff(&gb.input.unwrap()) < 1e-4, "dx k={k} s={s}");
            for (p, q) in ga.bias.iter().zip(&gb.bias) {
                assert!((p - q).abs() < 1e-4);
            }
        }
    }
}
