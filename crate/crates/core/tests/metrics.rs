//! IoU metrics and detection matching against independent oracles.

use docseg::eval::{box_iou, detection_prf, mask_iou, mean_iou, prf};
use docseg::postproc::{AxisAlignedBox, Grid};
use proptest::prelude::*;

fn arb_box(max: i64) -> impl Strategy<Value = AxisAlignedBox> {
    (0..max - 1, 0..max - 1, 1..max, 1..max).prop_map(move |(x, y, w, h)| {
        AxisAlignedBox::new(x, y, (x + w).min(max), (y + h).min(max)).unwrap()
    })
}

/// Largest one-to-one matching with IoU >= t, by exhaustive search.
fn best_matching(preds: &[AxisAlignedBox], truth: &[AxisAlignedBox], t: f64) -> usize {
    fn go(i: usize, preds: &[AxisAlignedBox], truth: &[AxisAlignedBox], used: &mut Vec<bool>, t: f64) -> usize {
        if i == preds.len() {
            return 0;
        }
        let mut best = go(i + 1, preds, truth, used, t);
        for j in 0..truth.len() {
            if !used[j] && box_iou(&preds[i], &truth[j]) >= t {
                used[j] = true;
                best = best.max(1 + go(i + 1, preds, truth, used, t));
                used[j] = false;
            }
        }
        best
    }
    go(0, preds, truth, &mut vec![false; truth.len()], t)
}

/// Disjoint ground-truth boxes, one per 20×20 cell of a 3×2 grid.
fn disjoint_truth() -> impl Strategy<Value = Vec<AxisAlignedBox>> {
    prop::collection::vec((0..8i64, 0..8i64, 6..12i64, 6..12i64), 0..=6).prop_map(|cells| {
        cells
            .iter()
            .enumerate()
            .map(|(k, &(x, y, w, h))| {
                let (ox, oy) = ((k % 3) as i64 * 20, (k / 3) as i64 * 20);
                AxisAlignedBox::new(ox + x, oy + y, ox + x + w, oy + y + h).unwrap()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn box_iou_equals_raster_iou(a in arb_box(24), b in arb_box(24)) {
        let (ma, mb) = (a.rasterize(24, 24), b.rasterize(24, 24));
        prop_assert!((box_iou(&a, &b) - mask_iou(&ma, &mb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mask_iou_symmetric_and_identity(a in prop::collection::vec(any::<bool>(), 64), b in prop::collection::vec(any::<bool>(), 64)) {
        let ma = Grid::from_vec(8, 8, a).unwrap();
        let mb = Grid::from_vec(8, 8, b).unwrap();
        let ab = mask_iou(&ma, &mb).unwrap();
        prop_assert_eq!(ab, mask_iou(&mb, &ma).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, ma == mb);
    }

    #[test]
    fn mean_iou_is_permutation_invariant(mut v in prop::collection::vec(0.0f64..1.0, 1..20), seed in any::<u64>()) {
        let m = mean_iou(&v).unwrap();
        let n = v.len();
        v.rotate_left(seed as usize % n);
        v.reverse();
        prop_assert!((mean_iou(&v).unwrap() - m).abs() < 1e-12);
    }

    #[test]
    fn greedy_matching_is_optimal_on_disjoint_truth(
        truth in disjoint_truth(),
        preds in prop::collection::vec(arb_box(60), 0..=6),
        t in 0.5f64..=0.95,
    ) {
        let d = detection_prf(&preds, &truth, t).unwrap();
        prop_assert_eq!(d.matches.pairs.len(), best_matching(&preds, &truth, t));
        prop_assert!([d.precision, d.recall, d.f_measure].iter().all(|v| (0.0..=1.0).contains(v)));
        if d.precision == 0.0 || d.recall == 0.0 {
            prop_assert_eq!(d.f_measure, 0.0);
        }
        let mut seen_p = std::collections::HashSet::new();
        let mut seen_g = std::collections::HashSet::new();
        for &(p, g, iou) in &d.matches.pairs {
            prop_assert!(seen_p.insert(p) && seen_g.insert(g));
            prop_assert!(iou >= t);
        }
        prop_assert_eq!(d.matches.pairs.len() + d.matches.unmatched_predictions.len(), preds.len());
        prop_assert_eq!(d.matches.pairs.len() + d.matches.unmatched_ground_truth.len(), truth.len());
    }
}

#[test]
fn three_truths_two_predictions_fixture() {
    let b = |x0, x1| AxisAlignedBox::new(x0, 0, x1, 100).unwrap();
    let truth = [b(0, 100), b(200, 300), b(400, 500)];
    let preds = [b(0, 90), b(200, 260)];
    let d = detection_prf(&preds, &truth, 0.7).unwrap();
    assert_eq!(best_matching(&preds, &truth, 0.7), 1);
    assert_eq!(d.matches.pairs.len(), 1);
    assert_eq!(d.precision, 0.5);
    assert!((d.recall - 1.0 / 3.0).abs() < 1e-12);
    assert!((d.f_measure - 0.4).abs() < 1e-12);
}

#[test]
fn greedy_can_lose_to_optimal_when_truth_overlaps() {
    // Two nearly identical ground-truth boxes: the first prediction grabs
    // the one the second prediction needed (IoUs 1.0, 0.818 / 0.9, 0.727).
    let b = |x0, x1| AxisAlignedBox::new(x0, 0, x1, 10).unwrap();
    let truth = [b(0, 10), b(1, 11)];
    let preds = [b(0, 10), b(0, 9)];
    let d = detection_prf(&preds, &truth, 0.75).unwrap();
    assert_eq!(best_matching(&preds, &truth, 0.75), 2);
    assert_eq!(d.matches.pairs, vec![(0, 0, 1.0)]);
}

#[test]
fn prf_conventions() {
    assert_eq!(prf(0, 0, 3), (0.0, 0.0, 0.0));
    assert_eq!(prf(2, 2, 2), (1.0, 1.0, 1.0));
    let (p, r, f) = prf(1, 2, 4);
    assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-15);
}
