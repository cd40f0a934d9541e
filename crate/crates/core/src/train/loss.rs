//! Per-pixel losses on NHWC logits, accumulated in `f64`.

use super::config::LossMode;
use crate::data::{Labels, IGNORE};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean loss over labelled pixels and its gradient w.r.t. the logits.
///
/// Softmax mode averages `-Σ_k t_k log p_k` over pixels; sigmoid mode
/// averages binary cross-entropy over pixels × classes. Ignored pixels
/// contribute neither loss nor gradient.
pub fn pixel_loss(logits: &Tensor, labels: &[Labels], mode: LossMode) -> Result<(f64, Tensor)> {
    let (n, h, w, c) = logits.nhwc();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} label maps for a batch of {n}", labels.len())));
    }
    for l in labels {
        if (l.height(), l.width()) != (h, w) || l.n_classes != c {
            return Err(Error::Shape(format!(
                "labels {}x{}x{} do not match logits {h}x{w}x{c}",
                l.height(),
                l.width(),
                l.n_classes
            )));
        }
    }
    let counted: usize = labels.iter().map(|l| h * w - l.ignored()).sum();
    if counted == 0 {
        return Err(Error::Empty("every pixel in the batch is ignored".into()));
    }
    let norm = match mode {
        LossMode::SoftmaxCe => counted as f64,
        LossMode::SigmoidBce => (counted * c) as f64,
    };

    let z = logits.data();
    let mut grad = vec![0.0f32; z.len()];
    let mut total = 0.0f64;
    let mut probs = vec![0.0f64; c];
    for (b, l) in labels.iter().enumerate() {
        for (p, &bits) in l.bits.data().iter().enumerate() {
            if bits == IGNORE {
                continue;
            }
            let off = (b * h * w + p) * c;
            let zi = &z[off..off + c];
            let gi = &mut grad[off..off + c];
            match mode {
                LossMode::SoftmaxCe => {
                    let max = zi.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
                    let mut sum = 0.0;
                    for (p, &v) in probs.iter_mut().zip(zi) {
                        *p = (v as f64 - max).exp();
                        sum += *p;
                    }
                    let log_sum = sum.ln();
                    let mut t_sum = 0.0;
                    for (k, &v) in zi.iter().enumerate() {
                        let t = ((bits >> k) & 1) as f64;
                        t_sum += t;
                        if t > 0.0 {
                            total -= t * (v as f64 - max - log_sum);
                        }
                    }
                    for (k, (g, &p)) in gi.iter_mut().zip(&probs).enumerate() {
                        let t = ((bits >> k) & 1) as f64;
                        *g = ((p / sum * t_sum - t) / norm) as f32;
                    }
                }
                LossMode::SigmoidBce => {
                    for (k, (g, &v)) in gi.iter_mut().zip(zi).enumerate() {
                        let x = v as f64;
                        let t = ((bits >> k) & 1) as f64;
                        // log(1 + e^x) - t x, stable for large |x|.
                        total += x.max(0.0) - x * t + (-x.abs()).exp().ln_1p();
                        let s = 1.0 / (1.0 + (-x).exp());
                        *g = ((s - t) / norm) as f32;
                    }
                }
            }
        }
    }
    Ok((total / norm, Tensor::from_vec(logits.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::Grid;

    fn labels(idx: &[u32], w: usize, h: usize, c: usize) -> Labels {
        Labels::from_indices(&Grid::from_vec(w, h, idx.to_vec()).unwrap(), c).unwrap()
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let z = Tensor::zeros(&[1, 2, 2, 2]);
        let (l, _) = pixel_loss(&z, &[labels(&[0, 1, 1, 0], 2, 2, 2)], LossMode::SoftmaxCe).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_give_small_loss() {
        let z = Tensor::from_vec(&[1, 1, 2, 2], vec![20.0, -20.0, -20.0, 20.0]).unwrap();
        let l = labels(&[0, 1], 2, 1, 2);
        assert!(pixel_loss(&z, std::slice::from_ref(&l), LossMode::SoftmaxCe).unwrap().0 < 1e-3);
        assert!(pixel_loss(&z, &[l], LossMode::SigmoidBce).unwrap().0 < 1e-3);
    }

    #[test]
    fn ignored_pixels_are_excluded() {
        let z = Tensor::from_vec(&[1, 1, 2, 2], vec![0.0, 0.0, 5.0, -5.0]).unwrap();
        let mut l = labels(&[0, 1], 2, 1, 2);
        l.bits.set(1, 0, IGNORE);
        let (loss, g) = pixel_loss(&z, &[l.clone()], LossMode::SoftmaxCe).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(&g.data()[2..], &[0.0, 0.0]);
        l.bits.set(0, 0, IGNORE);
        assert!(matches!(pixel_loss(&z, &[l], LossMode::SoftmaxCe), Err(Error::Empty(_))));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let z = Tensor::zeros(&[1, 2, 2, 3]);
        assert!(pixel_loss(&z, &[labels(&[0; 4], 2, 2, 2)], LossMode::SoftmaxCe).is_err());
    }
}
