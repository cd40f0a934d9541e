//! Elementwise and resampling layers with their backward passes (NHWC).

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

pub const BATCH_NORM_EPSILON: f32 = 1e-5;
pub const RENORM_EPSILON: f32 = 1e-3;

/// Batch renormalisation clamps and moving-average settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenormSettings {
    pub r_min: f64,
    pub r_max: f64,
    pub d_max: f64,
    /// Decay of the moving mean / variance.
    pub momentum: f64,
}

impl Default for RenormSettings {
    fn default() -> Self {
        RenormSettings {
            r_min: 0.1,
            r_max: 100.0,
            d_max: 1.0,
            momentum: 0.99,
        }
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = v.max(0.0);
    }
    y
}

/// Gradient of ReLU given its forward output.
pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (g, &o) in dx.data_mut().iter_mut().zip(y.data()) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
    dx
}

/// Per-channel affine map `y = x * scale + shift`.
fn channel_affine(x: &Tensor, scale: &[f32], shift: &[f32]) -> Tensor {
    let c = scale.len();
    let mut y = x.clone();
    for px in y.data_mut().chunks_exact_mut(c) {
        for ((v, s), b) in px.iter_mut().zip(scale).zip(shift) {
            *v = *v * s + b;
        }
    }
    y
}

/// Batch norm with stored statistics: returns `(scale, shift)` per channel.
pub fn frozen_bn_coefficients(gamma: &[f32], beta: &[f32], mean: &[f32], var: &[f32]) -> (Vec<f32>, Vec<f32>) {
    let scale: Vec<f32> = gamma
        .iter()
        .zip(var)
        .map(|(g, v)| g / (v + BATCH_NORM_EPSILON).sqrt())
        .collect();
    let shift = beta
        .iter()
        .zip(mean)
        .zip(&scale)
        .map(|((b, m), s)| b - m * s)
        .collect();
    (scale, shift)
}

pub fn frozen_batch_norm(x: &Tensor, gamma: &[f32], beta: &[f32], mean: &[f32], var: &[f32]) -> Tensor {
    let (scale, shift) = frozen_bn_coefficients(gamma, beta, mean, var);
    channel_affine(x, &scale, &shift)
}

/// Returns `(dx, dgamma, dbeta)` for the frozen batch norm.
pub fn frozen_batch_norm_backward(
    x: &Tensor,
    dy: &Tensor,
    gamma: &[f32],
    mean: &[f32],
    var: &[f32],
    need_dx: bool,
) -> (Option<Tensor>, Vec<f32>, Vec<f32>) {
    let c = gamma.len();
    let inv: Vec<f32> = var.iter().map(|v| 1.0 / (v + BATCH_NORM_EPSILON).sqrt()).collect();
    let mut dgamma = vec![0.0f64; c];
    let mut dbeta = vec![0.0f64; c];
    for (px, g) in x.data().chunks_exact(c).zip(dy.data().chunks_exact(c)) {
        for k in 0..c {
            let xhat = (px[k] - mean[k]) * inv[k];
            dgamma[k] += (g[k] * xhat) as f64;
            dbeta[k] += g[k] as f64;
        }
    }
    let dx = need_dx.then(|| {
        let scale: Vec<f32> = gamma.iter().zip(&inv).map(|(g, i)| g * i).collect();
        channel_affine(dy, &scale, &vec![0.0; c])
    });
    (
        dx,
        dgamma.into_iter().map(|v| v as f32).collect(),
        dbeta.into_iter().map(|v| v as f32).collect(),
    )
}

/// Cached values of a training-mode batch renormalisation.
#[derive(Debug, Clone)]
pub struct RenormCache {
    /// `(x - batch_mean) / batch_std`.
    pub z: Tensor,
    pub r: Vec<f32>,
    pub d: Vec<f32>,
    pub batch_std: Vec<f32>,
    pub batch_mean: Vec<f32>,
    pub batch_var: Vec<f32>,
}

/// Training-mode batch renormalisation.
///
/// `r` and `d` are computed from the batch and moving statistics, clamped,
/// and treated as constants by the backward pass.
pub fn batch_renorm_train(
    x: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    moving_mean: &[f32],
    moving_var: &[f32],
    settings: &RenormSettings,
) -> (Tensor, RenormCache) {
    let c = gamma.len();
    let m = (x.len() / c) as f64;
    let mut sum = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for k in 0..c {
            sum[k] += px[k] as f64;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let mut sq = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for k in 0..c {
            let d = px[k] as f64 - mean[k];
            sq[k] += d * d;
        }
    }
    let var: Vec<f64> = sq.iter().map(|s| s / m).collect();
    let eps = RENORM_EPSILON as f64;
    let std: Vec<f64> = var.iter().map(|v| (v + eps).sqrt()).collect();
    let mut r = vec![0.0f32; c];
    let mut d = vec![0.0f32; c];
    for k in 0..c {
        let mstd = (moving_var[k] as f64 + eps).sqrt();
        r[k] = (std[k] / mstd).clamp(settings.r_min, settings.r_max) as f32;
        d[k] = ((mean[k] - moving_mean[k] as f64) / mstd).clamp(-settings.d_max, settings.d_max) as f32;
    }
    let mut z = x.clone();
    let mut y = x.clone();
    for (zp, yp) in z.data_mut().chunks_exact_mut(c).zip(y.data_mut().chunks_exact_mut(c)) {
        for k in 0..c {
            let zk = ((zp[k] as f64 - mean[k]) / std[k]) as f32;
            zp[k] = zk;
            yp[k] = gamma[k] * (zk * r[k] + d[k]) + beta[k];
        }
    }
    let cache = RenormCache {
        z,
        r,
        d,
        batch_std: std.iter().map(|&v| v as f32).collect(),
        batch_mean: mean.iter().map(|&v| v as f32).collect(),
        batch_var: var.iter().map(|&v| v as f32).collect(),
    };
    (y, cache)
}

/// Inference-mode batch renormalisation (moving statistics).
pub fn batch_renorm_eval(
    x: &Tensor,
    gamma: &[f32],
    beta: &[f32],
    moving_mean: &[f32],
    moving_var: &[f32],
) -> Tensor {
    let scale: Vec<f32> = gamma
        .iter()
        .zip(moving_var)
        .map(|(g, v)| g / (v + RENORM_EPSILON).sqrt())
        .collect();
    let shift: Vec<f32> = beta
        .iter()
        .zip(moving_mean)
        .zip(&scale)
        .map(|((b, m), s)| b - m * s)
        .collect();
    channel_affine(x, &scale, &shift)
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batch_renorm_backward(
    cache: &RenormCache,
    gamma: &[f32],
    dy: &Tensor,
    need_dx: bool,
) -> (Option<Tensor>, Vec<f32>, Vec<f32>) {
    let c = gamma.len();
    let m = (dy.len() / c) as f64;
    let mut dgamma = vec![0.0f64; c];
    let mut dbeta = vec![0.0f64; c];
    let mut sum_dz = vec![0.0f64; c];
    let mut sum_dz_z = vec![0.0f64; c];
    for (zp, gp) in cache.z.data().chunks_exact(c).zip(dy.data().chunks_exact(c)) {
        for k in 0..c {
            let g = gp[k] as f64;
            let z = zp[k] as f64;
            dgamma[k] += g * (z * cache.r[k] as f64 + cache.d[k] as f64);
            dbeta[k] += g;
            let dz = g * (gamma[k] * cache.r[k]) as f64;
            sum_dz[k] += dz;
            sum_dz_z[k] += dz * z;
        }
    }
    let dx = need_dx.then(|| {
        let mut dx = dy.clone();
        for (xp, zp) in dx.data_mut().chunks_exact_mut(c).zip(cache.z.data().chunks_exact(c)) {
            for k in 0..c {
                let dz = xp[k] as f64 * (gamma[k] * cache.r[k]) as f64;
                let v = (dz - sum_dz[k] / m - zp[k] as f64 * sum_dz_z[k] / m) / cache.batch_std[k] as f64;
                xp[k] = v as f32;
            }
        }
        dx
    });
    (
        dx,
        dgamma.into_iter().map(|v| v as f32).collect(),
        dbeta.into_iter().map(|v| v as f32).collect(),
    )
}

/// 3×3 stride-2 max pooling with `SAME` padding; also returns argmax indices.
pub fn max_pool_3x3_s2(x: &Tensor) -> (Tensor, Vec<u32>) {
    let (n, h, w, c) = x.nhwc();
    let g = crate::backend::ConvGeometry::new(3, 2);
    let (oh, ow) = (g.output_size(h), g.output_size(w));
    let (pt, pl) = (g.pad_before(h) as isize, g.pad_before(w) as isize);
    let mut out = Tensor::filled(&[n, oh, ow, c], f32::NEG_INFINITY);
    let mut arg = vec![0u32; n * oh * ow * c];
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o = ((b * oh + oy) * ow + ox) * c;
                for ky in 0..3 {
                    let iy = (oy * 2 + ky) as isize - pt;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let ix = (ox * 2 + kx) as isize - pl;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i = ((b * h + iy as usize) * w + ix as usize) * c;
                        for k in 0..c {
                            if xd[i + k] > od[o + k] {
                                od[o + k] = xd[i + k];
                                arg[o + k] = (i + k) as u32;
                            }
                        }
                    }
                }
            }
        }
    }
    (out, arg)
}

pub fn max_pool_backward(input_shape: &[usize], argmax: &[u32], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(dy.data()) {
        d[i as usize] += g;
    }
    dx
}

/// Source taps `[(index, weight); 2]` for each output sample of a ×2
/// upsampling along an axis of `n` input samples.
///
/// Sample centres are aligned: output `i` reads input position
/// `(i + 0.5) / 2 - 0.5`, clamped to the valid range.
fn upsample_taps(n: usize) -> Vec<[(usize, f32); 2]> {
    (0..2 * n)
        .map(|i| {
            let k = i / 2;
            let other = if i % 2 == 0 { k.saturating_sub(1) } else { (k + 1).min(n - 1) };
            [(k, 0.75), (other, 0.25)]
        })
        .collect()
}

/// Bilinear ×2 upsampling.
pub fn upsample_bilinear_2x(x: &Tensor) -> Tensor {
    let (n, h, w, c) = x.nhwc();
    let (ty, tx) = (upsample_taps(h), upsample_taps(w));
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros(&[n, oh, ow, c]);
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..n {
        for (oy, ry) in ty.iter().enumerate() {
            for (ox, rx) in tx.iter().enumerate() {
                let o = ((b * oh + oy) * ow + ox) * c;
                for &(sy, wy) in ry {
                    for &(sx, wx) in rx {
                        let i = ((b * h + sy) * w + sx) * c;
                        let wgt = wy * wx;
                        for k in 0..c {
                            od[o + k] += wgt * xd[i + k];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`upsample_bilinear_2x`].
pub fn upsample_bilinear_2x_backward(input_shape: &[usize], dy: &Tensor) -> Tensor {
    let (n, h, w, c) = (input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
    let (ty, tx) = (upsample_taps(h), upsample_taps(w));
    let (oh, ow) = (2 * h, 2 * w);
    let mut dx = Tensor::zeros(input_shape);
    let gd = dy.data();
    let dd = dx.data_mut();
    for b in 0..n {
        for (oy, ry) in ty.iter().enumerate() {
            for (ox, rx) in tx.iter().enumerate() {
                let o = ((b * oh + oy) * ow + ox) * c;
                for &(sy, wy) in ry {
                    for &(sx, wx) in rx {
                        let i = ((b * h + sy) * w + sx) * c;
                        let wgt = wy * wx;
                        for k in 0..c {
                            dd[i + k] += wgt * gd[o + k];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Softmax over the channel axis.
pub fn softmax_channels(logits: &Tensor) -> Tensor {
    let c = *logits.shape().last().expect("non-scalar");
    let mut p = logits.clone();
    for px in p.data_mut().chunks_exact_mut(c) {
        let max = px.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mut total = 0.0f64;
        for v in px.iter_mut() {
            *v = (*v - max).exp();
            total += *v as f64;
        }
        for v in px.iter_mut() {
            *v = (*v as f64 / total) as f32;
        }
    }
    p
}

pub fn sigmoid(logits: &Tensor) -> Tensor {
    let mut p = logits.clone();
    for v in p.data_mut() {
        *v = 1.0 / (1.0 + (-*v).exp());
    }
    p
}
