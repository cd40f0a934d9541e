//! Binarisation: fixed threshold, Otsu and hysteresis.
//!
//! Every comparison is inclusive: a pixel is foreground iff `value >= t`.

use super::components::{label_components, Connectivity};
use super::grid::{BinaryMask, ProbabilityChannel};
#[cfg(test)]
use super::grid::Grid;
use crate::error::{Error, Result};

/// Number of histogram bins used by [`threshold_otsu`].
pub const OTSU_BINS: usize = 256;

fn check_unit(name: &str, t: f32) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParam(format!("{name} = {t} is outside [0, 1]")));
    }
    Ok(())
}

pub fn threshold_fixed(map: &ProbabilityChannel, t: f32) -> Result<BinaryMask> {
    check_unit("threshold", t)?;
    Ok(map.map(|&v| v >= t))
}

/// Histogram bin of a probability: `min(floor(256 v), 255)`.
#[inline]
pub fn otsu_bin(v: f32) -> usize {
    ((v * OTSU_BINS as f32) as usize).min(OTSU_BINS - 1)
}

/// Between-class separation for splitting the histogram before bin `k`.
///
/// Returns `(n1 S0 - n0 S1)^2 / (n0 n1)`, which is proportional to the
/// between-class variance, or `None` when one side is empty. Computed from
/// integer sums so candidate splits compare exactly.
pub fn otsu_separation(hist: &[u64; OTSU_BINS], k: usize) -> Option<f64> {
    let (mut n0, mut s0, mut n1, mut s1) = (0u128, 0u128, 0u128, 0u128);
    for (b, &c) in hist.iter().enumerate() {
        let (c, sb) = (c as u128, c as u128 * b as u128);
        if b < k {
            n0 += c;
            s0 += sb;
        } else {
            n1 += c;
            s1 += sb;
        }
    }
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let diff = (n1 * s0).abs_diff(n0 * s1) as f64;
    Some(diff * diff / (n0 as f64 * n1 as f64))
}

pub fn otsu_histogram(map: &ProbabilityChannel) -> [u64; OTSU_BINS] {
    let mut hist = [0u64; OTSU_BINS];
    for &v in map.data() {
        hist[otsu_bin(v)] += 1;
    }
    hist
}

/// Otsu's threshold over 256 bins of `[0, 1]`.
///
/// Candidate thresholds are the bin edges `k / 256` for `k` in `1..=255`;
/// the first maximiser wins. Fails when every value falls into one bin.
pub fn threshold_otsu(map: &ProbabilityChannel) -> Result<(f32, BinaryMask)> {
    if let Some(v) = map.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParam(format!("probability {v} outside [0, 1]")));
    }
    let hist = otsu_histogram(map);
    // Running sums make the scan linear; same arithmetic as `otsu_separation`.
    let n: u128 = hist.iter().map(|&c| c as u128).sum();
    let s: u128 = hist.iter().enumerate().map(|(b, &c)| b as u128 * c as u128).sum();
    let (mut n0, mut s0) = (0u128, 0u128);
    let mut best: Option<(usize, f64)> = None;
    for k in 1..OTSU_BINS {
        n0 += hist[k - 1] as u128;
        s0 += (k as u128 - 1) * hist[k - 1] as u128;
        let (n1, s1) = (n - n0, s - s0);
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (n1 * s0).abs_diff(n0 * s1) as f64;
        let score = diff * diff / (n0 as f64 * n1 as f64);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((k, score));
        }
    }
    let (k, _) = best.ok_or_else(|| Error::Degenerate("Otsu threshold of a constant map".into()))?;
    let t = k as f32 / OTSU_BINS as f32;
    Ok((t, threshold_fixed(map, t)?))
}

/// Keeps the connected components of `{v >= low}` that reach `high`.
pub fn hysteresis_threshold(
    map: &ProbabilityChannel,
    low: f32,
    high: f32,
    connectivity: Connectivity,
) -> Result<BinaryMask> {
    check_unit("low threshold", low)?;
    check_unit("high threshold", high)?;
    if low > high {
        return Err(Error::InvalidParam(format!(
            "low threshold {low} exceeds high threshold {high}"
        )));
    }
    let weak = map.map(|&v| v >= low);
    let cc = label_components(&weak, connectivity);
    let mut strong = vec![false; cc.components.len() + 1];
    for (&label, &v) in cc.labels.data().iter().zip(map.data()) {
        if label > 0 && v >= high {
            strong[label as usize] = true;
        }
    }
    Ok(cc.labels.map(|&l| l > 0 && strong[l as usize]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[f32]) -> ProbabilityChannel {
        Grid::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn fixed_threshold_is_inclusive() {
        let m = threshold_fixed(&row(&[0.59, 0.60, 0.61]), 0.6).unwrap();
        assert_eq!(m.data(), &[false, true, true]);
        assert_eq!(threshold_fixed(&row(&[0.5; 4]), 0.5).unwrap().count(), 4);
        assert_eq!(threshold_fixed(&row(&[0.0, 0.3]), 0.0).unwrap().count(), 2);
        assert!(threshold_fixed(&row(&[0.5]), 1.5).is_err());
    }

    #[test]
    fn otsu_splits_bimodal_map() {
        let m = row(&[0.1, 0.9, 0.1, 0.9, 0.9]);
        let (t, mask) = threshold_otsu(&m).unwrap();
        assert!(t > 0.1 && t < 0.9, "{t}");
        assert_eq!(mask.data(), &[false, true, false, true, true]);
    }

    #[test]
    fn otsu_rejects_constant_map() {
        assert!(threshold_otsu(&row(&[0.3; 10])).is_err());
        // Distinct values inside one bin are still constant after binning.
        assert!(threshold_otsu(&row(&[0.3, 0.3001])).is_err());
    }

    #[test]
    fn otsu_bin_edges() {
        assert_eq!(otsu_bin(0.0), 0);
        assert_eq!(otsu_bin(1.0), 255);
        assert_eq!(otsu_bin(0.5), 128);
        assert_eq!(otsu_bin(0.5 - 1e-6), 127);
    }

    #[test]
    fn hysteresis_drops_weak_components() {
        // Two components: one peaks at 0.35, the other at 0.45.
        let m = row(&[0.25, 0.35, 0.3, 0.0, 0.3, 0.45, 0.2]);
        let mask = hysteresis_threshold(&m, 0.2, 0.4, Connectivity::Eight).unwrap();
        assert_eq!(mask.data(), &[false, false, false, false, true, true, true]);
    }

    #[test]
    fn hysteresis_rejects_inverted_bounds() {
        assert!(hysteresis_threshold(&row(&[0.5]), 0.6, 0.4, Connectivity::Eight).is_err());
    }
}
