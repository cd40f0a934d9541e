use super::grid::{Grid, ProbabilityChannel};
use crate::error::{Error, Result};

/// Normalised 1-D Gaussian taps `k[-r..=r]` with `r = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!("sigma must be positive, got {sigma}")));
    }
    let r = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Half-sample symmetric reflection: `d c b a | a b c d | d c b a`.
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn convolve_rows(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (j, t) in taps.iter().enumerate() {
                acc += t * line[reflect(x as i64 + j as i64 - r, w)];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn transpose(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = src[y * w + x];
        }
    }
    out
}

/// Separable Gaussian blur with reflective borders.
pub fn gaussian_filter(map: &ProbabilityChannel, sigma: f64) -> Result<ProbabilityChannel> {
    let taps = gaussian_kernel(sigma)?;
    let (w, h) = map.dims();
    if map.is_empty() {
        return Ok(map.clone());
    }
    let src: Vec<f64> = map.data().iter().map(|&v| v as f64).collect();
    let rows = convolve_rows(&src, w, h, &taps);
    let cols = convolve_rows(&transpose(&rows, w, h), h, w, &taps);
    let out = transpose(&cols, h, w);
    Grid::from_vec(w, h, out.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, [2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        // Kernels wider than the image keep bouncing.
        assert_eq!(reflect(9, 2), 1);
    }

    #[test]
    fn kernel_is_normalised_and_truncated() {
        let k = gaussian_kernel(1.5).unwrap();
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(gaussian_kernel(0.0).is_err());
    }

    #[test]
    fn constant_map_is_unchanged() {
        let m = Grid::new(9, 5, 0.37f32);
        let f = gaussian_filter(&m, 2.0).unwrap();
        assert!(f.data().iter().all(|v| (v - 0.37).abs() < 1e-6));
    }
}
