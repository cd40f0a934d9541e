use super::{check_conv_shapes, Backend, ConvGeometry, ConvGrads};
use crate::tensor::Tensor;

/// Direct nested-loop convolution with `f64` accumulation.
///
/// Slow; exists as the reference the GEMM backend is tested against.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveBackend;

struct Dims {
    n: usize,
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    k: usize,
    oh: usize,
    ow: usize,
    pt: isize,
    pl: isize,
}

fn dims(x: &Tensor, kernel: &Tensor, stride: usize) -> Dims {
    let (k, c_in, c_out) = check_conv_shapes(x, kernel);
    let (n, h, w, _) = x.nhwc();
    let g = ConvGeometry::new(k, stride);
    Dims {
        n,
        h,
        w,
        c_in,
        c_out,
        k,
        oh: g.output_size(h),
        ow: g.output_size(w),
        pt: g.pad_before(h) as isize,
        pl: g.pad_before(w) as isize,
    }
}

impl Dims {
    /// Visits every (output, kernel tap, input) triple that lies inside the image.
    fn for_each_tap(&self, stride: usize, mut f: impl FnMut(usize, usize, usize)) {
        for b in 0..self.n {
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let o = (b * self.oh + oy) * self.ow + ox;
                    for ky in 0..self.k {
                        let iy = (oy * stride + ky) as isize - self.pt;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        for kx in 0..self.k {
                            let ix = (ox * stride + kx) as isize - self.pl;
                            if ix < 0 || ix >= self.w as isize {
                                continue;
                            }
                            let i = (b * self.h + iy as usize) * self.w + ix as usize;
                            f(o, ky * self.k + kx, i);
                        }
                    }
                }
            }
        }
    }
}

impl Backend for NaiveBackend {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn conv2d(&self, x: &Tensor, kernel: &Tensor, bias: Option<&[f32]>, stride: usize) -> Tensor {
        let d = dims(x, kernel, stride);
        let mut acc = vec![0.0f64; d.n * d.oh * d.ow * d.c_out];
        let (xd, kd) = (x.data(), kernel.data());
        d.for_each_tap(stride, |o, tap, i| {
            for ci in 0..d.c_in {
                let xv = xd[i * d.c_in + ci] as f64;
                for co in 0..d.c_out {
                    acc[o * d.c_out + co] += xv * kd[(tap * d.c_in + ci) * d.c_out + co] as f64;
                }
            }
        });
        if let Some(bias) = bias {
            for px in acc.chunks_exact_mut(d.c_out) {
                for (v, b) in px.iter_mut().zip(bias) {
                    *v += *b as f64;
                }
            }
        }
        Tensor::from_vec(
            &[d.n, d.oh, d.ow, d.c_out],
            acc.into_iter().map(|v| v as f32).collect(),
        )
        .expect("shape computed above")
    }

    fn conv2d_backward(
        &self,
        x: &Tensor,
        kernel: &Tensor,
        stride: usize,
        dy: &Tensor,
        need_input_grad: bool,
    ) -> ConvGrads {
        let d = dims(x, kernel, stride);
        let (xd, kd, gd) = (x.data(), kernel.data(), dy.data());
        let mut dk = vec![0.0f64; kernel.len()];
        let mut dx = vec![0.0f64; x.len()];
        d.for_each_tap(stride, |o, tap, i| {
            for ci in 0..d.c_in {
                let xv = xd[i * d.c_in + ci] as f64;
                let mut g_in = 0.0;
                for co in 0..d.c_out {
                    let g = gd[o * d.c_out + co] as f64;
                    let kidx = (tap * d.c_in + ci) * d.c_out + co;
                    dk[kidx] += xv * g;
                    g_in += kd[kidx] as f64 * g;
                }
                dx[i * d.c_in + ci] += g_in;
            }
        });
        let mut bias = vec![0.0f64; d.c_out];
        for px in gd.chunks_exact(d.c_out) {
            for (b, v) in bias.iter_mut().zip(px) {
                *b += *v as f64;
            }
        }
        let to32 = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect::<Vec<f32>>();
        ConvGrads {
            input: need_input_grad
                .then(|| Tensor::from_vec(x.shape(), to32(dx)).expect("input shape")),
            kernel: Tensor::from_vec(kernel.shape(), to32(dk)).expect("kernel shape"),
            bias: to32(bias),
        }
    }
}
