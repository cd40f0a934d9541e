use super::{check_conv_shapes, Backend, ConvGeometry, ConvGrads};
use crate::tensor::Tensor;

/// im2col + SGEMM convolution.
///
/// The column matrix is materialised in row chunks so memory stays bounded on
/// full-resolution decoder layers.
#[derive(Debug, Clone)]
pub struct CpuBackend {
    /// Upper bound on the number of `f32` values in one column chunk.
    pub chunk_values: usize,
}

impl Default for CpuBackend {
    fn default() -> Self {
        CpuBackend {
            chunk_values: 1 << 21,
        }
    }
}

/// Row-major strides of a matrix operand (`row`, `col`).
#[derive(Clone, Copy)]
struct Strides(isize, isize);

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    sa: Strides,
    b: &[f32],
    sb: Strides,
    beta: f32,
    c: &mut [f32],
    sc: Strides,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, s: Strides| {
        (rows.saturating_sub(1)) as isize * s.0 + (cols.saturating_sub(1)) as isize * s.1 + 1
    };
    assert!(k == 0 || span(m, k, sa) as usize <= a.len());
    assert!(k == 0 || span(k, n, sb) as usize <= b.len());
    assert!(span(m, n, sc) as usize <= c.len());
    // SAFETY: the asserts above bound every element the kernel touches.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0,
            sa.1,
            b.as_ptr(),
            sb.0,
            sb.1,
            beta,
            c.as_mut_ptr(),
            sc.0,
            sc.1,
        );
    }
}

struct Layout {
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    k: usize,
    stride: usize,
    oh: usize,
    ow: usize,
    pad_t: usize,
    pad_l: usize,
}

impl Layout {
    fn new(x: &Tensor, k: usize, stride: usize) -> Self {
        let (n, h, w, c) = x.nhwc();
        let g = ConvGeometry::new(k, stride);
        Layout {
            n,
            h,
            w,
            c,
            k,
            stride,
            oh: g.output_size(h),
            ow: g.output_size(w),
            pad_t: g.pad_before(h),
            pad_l: g.pad_before(w),
        }
    }

    fn rows(&self) -> usize {
        self.n * self.oh * self.ow
    }

    fn cols(&self) -> usize {
        self.k * self.k * self.c
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1
    }

    /// Fills `col` with rows `m0..m0 + rows` of the im2col matrix.
    fn im2col(&self, x: &[f32], m0: usize, rows: usize, col: &mut [f32]) {
        let kc = self.cols();
        for r in 0..rows {
            let m = m0 + r;
            let b = m / (self.oh * self.ow);
            let oy = (m / self.ow) % self.oh;
            let ox = m % self.ow;
            let row = &mut col[r * kc..(r + 1) * kc];
            for ky in 0..self.k {
                let iy = (oy * self.stride + ky) as isize - self.pad_t as isize;
                for kx in 0..self.k {
                    let ix = (ox * self.stride + kx) as isize - self.pad_l as isize;
                    let dst = &mut row[(ky * self.k + kx) * self.c..(ky * self.k + kx + 1) * self.c];
                    if iy < 0 || ix < 0 || iy >= self.h as isize || ix >= self.w as isize {
                        dst.fill(0.0);
                    } else {
                        let src = ((b * self.h + iy as usize) * self.w + ix as usize) * self.c;
                        dst.copy_from_slice(&x[src..src + self.c]);
                    }
                }
            }
        }
    }

    fn col2im_add(&self, col: &[f32], m0: usize, rows: usize, dx: &mut [f32]) {
        let kc = self.cols();
        for r in 0..rows {
            let m = m0 + r;
            let b = m / (self.oh * self.ow);
            let oy = (m / self.ow) % self.oh;
            let ox = m % self.ow;
            let row = &col[r * kc..(r + 1) * kc];
            for ky in 0..self.k {
                let iy = (oy * self.stride + ky) as isize - self.pad_t as isize;
                if iy < 0 || iy >= self.h as isize {
                    continue;
                }
                for kx in 0..self.k {
                    let ix = (ox * self.stride + kx) as isize - self.pad_l as isize;
                    if ix < 0 || ix >= self.w as isize {
                        continue;
                    }
                    let src = &row[(ky * self.k + kx) * self.c..(ky * self.k + kx + 1) * self.c];
                    let dst = ((b * self.h + iy as usize) * self.w + ix as usize) * self.c;
                    for (d, s) in dx[dst..dst + self.c].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

impl CpuBackend {
    fn chunk_rows(&self, cols: usize) -> usize {
        (self.chunk_values / cols.max(1)).max(16)
    }
}

impl Backend for CpuBackend {
    fn name(&self) -> &'static str {
        "cpu-gemm"
    }

    fn conv2d(&self, x: &Tensor, kernel: &Tensor, bias: Option<&[f32]>, stride: usize) -> Tensor {
        let (k, _, c_out) = check_conv_shapes(x, kernel);
        let lay = Layout::new(x, k, stride);
        let rows = lay.rows();
        let kc = lay.cols();
        let mut out = Tensor::zeros(&[lay.n, lay.oh, lay.ow, c_out]);
        let kern = kernel.data();
        if lay.is_pointwise() {
            gemm(
                rows,
                kc,
                c_out,
                x.data(),
                Strides(kc as isize, 1),
                kern,
                Strides(c_out as isize, 1),
                0.0,
                out.data_mut(),
                Strides(c_out as isize, 1),
            );
        } else {
            let chunk = self.chunk_rows(kc);
            let mut col = vec![0.0f32; chunk.min(rows) * kc];
            let mut m0 = 0;
            while m0 < rows {
                let mc = chunk.min(rows - m0);
                lay.im2col(x.data(), m0, mc, &mut col);
                gemm(
                    mc,
                    kc,
                    c_out,
                    &col,
                    Strides(kc as isize, 1),
                    kern,
                    Strides(c_out as isize, 1),
                    0.0,
                    &mut out.data_mut()[m0 * c_out..(m0 + mc) * c_out],
                    Strides(c_out as isize, 1),
                );
                m0 += mc;
            }
        }
        if let Some(bias) = bias {
            for px in out.data_mut().chunks_exact_mut(c_out) {
                for (v, b) in px.iter_mut().zip(bias) {
                    *v += b;
                }
            }
        }
        out
    }

    fn conv2d_backward(
        &self,
        x: &Tensor,
        kernel: &Tensor,
        stride: usize,
        dy: &Tensor,
        need_input_grad: bool,
    ) -> ConvGrads {
        let (k, c_in, c_out) = check_conv_shapes(x, kernel);
        let lay = Layout::new(x, k, stride);
        let rows = lay.rows();
        let kc = lay.cols();
        assert_eq!(dy.shape(), &[lay.n, lay.oh, lay.ow, c_out]);

        let mut bias = vec![0.0f32; c_out];
        for px in dy.data().chunks_exact(c_out) {
            for (b, v) in bias.iter_mut().zip(px) {
                *b += v;
            }
        }

        let mut dk = Tensor::zeros(kernel.shape());
        let mut dx = need_input_grad.then(|| Tensor::zeros(x.shape()));
        let kern = kernel.data();

        if lay.is_pointwise() {
            gemm(
                kc,
                rows,
                c_out,
                x.data(),
                Strides(1, kc as isize),
                dy.data(),
                Strides(c_out as isize, 1),
                0.0,
                dk.data_mut(),
                Strides(c_out as isize, 1),
            );
            if let Some(dx) = dx.as_mut() {
                gemm(
                    rows,
                    c_out,
                    c_in,
                    dy.data(),
                    Strides(c_out as isize, 1),
                    kern,
                    Strides(1, c_out as isize),
                    0.0,
                    dx.data_mut(),
                    Strides(c_in as isize, 1),
                );
            }
        } else {
            let chunk = self.chunk_rows(kc);
            let mut col = vec![0.0f32; chunk.min(rows) * kc];
            let mut m0 = 0;
            while m0 < rows {
                let mc = chunk.min(rows - m0);
                let dy_chunk = &dy.data()[m0 * c_out..(m0 + mc) * c_out];
                lay.im2col(x.data(), m0, mc, &mut col);
                gemm(
                    kc,
                    mc,
                    c_out,
                    &col,
                    Strides(1, kc as isize),
                    dy_chunk,
                    Strides(c_out as isize, 1),
                    1.0,
                    dk.data_mut(),
                    Strides(c_out as isize, 1),
                );
                if let Some(dx) = dx.as_mut() {
                    gemm(
                        mc,
                        c_out,
                        kc,
                        dy_chunk,
                        Strides(c_out as isize, 1),
                        kern,
                        Strides(1, c_out as isize),
                        0.0,
                        &mut col,
                        Strides(kc as isize, 1),
                    );
                    lay.col2im_add(&col, m0, mc, dx.data_mut());
                }
                m0 += mc;
            }
        }
        ConvGrads {
            input: dx,
            kernel: dk,
            bias,
        }
    }
}
