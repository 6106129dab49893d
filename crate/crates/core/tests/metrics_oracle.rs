use ember::eval::{auc, confusion_matrix, derived_metrics, roc_curve, ConfusionMatrix};
use proptest::prelude::*;

fn brute_confusion(labels: &[bool], scores: &[f64], threshold: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for (&y, &s) in labels.iter().zip(scores) {
        match (y, s >= threshold) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    cm
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
fn pairwise_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Scores drawn from a coarse grid so ties are common.
fn tied_instance() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (2usize..60)
        .prop_flat_map(|n| (prop::collection::vec(any::<bool>(), n), prop::collection::vec(0u8..=10, n)))
        .prop_filter("both classes", |(l, _)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
        .prop_map(|(l, s)| (l, s.into_iter().map(|v| f64::from(v) / 10.0).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn confusion_matches_brute_force((labels, scores) in tied_instance(), t in 0u8..=11) {
        let threshold = f64::from(t) / 10.0;
        let cm = confusion_matrix(&labels, &scores, threshold).unwrap();
        prop_assert_eq!(cm, brute_confusion(&labels, &scores, threshold));
        prop_assert_eq!(cm.total(), labels.len());
    }

    #[test]
    fn auc_matches_mann_whitney((labels, scores) in tied_instance()) {
        let roc = roc_curve(&labels, &scores).unwrap();
        prop_assert!((auc(&roc) - pairwise_auc(&labels, &scores)).abs() < 1e-9);
    }

    #[test]
    fn roc_is_monotone_and_anchored((labels, scores) in tied_instance()) {
        let roc = roc_curve(&labels, &scores).unwrap();
        prop_assert_eq!(roc.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(roc.points.last().copied(), Some((1.0, 1.0)));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        for w in roc.thresholds.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn raising_the_threshold_never_adds_positives((labels, scores) in tied_instance(), a in 0u8..=10, b in 0u8..=10) {
        let (lo, hi) = (f64::from(a.min(b)) / 10.0, f64::from(a.max(b)) / 10.0);
        let low = confusion_matrix(&labels, &scores, lo).unwrap();
        let high = confusion_matrix(&labels, &scores, hi).unwrap();
        prop_assert!(high.tp <= low.tp && high.fp <= low.fp);
    }

    #[test]
    fn auc_ignores_input_order((labels, scores) in tied_instance(), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        let mut s = seed;
        for i in (1..idx.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        let l2: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        let s2: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let a = auc(&roc_curve(&labels, &scores).unwrap());
        let b = auc(&roc_curve(&l2, &s2).unwrap());
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn derived_metrics_follow_their_definitions(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        prop_assume!(tp + fp + tn + fn_ > 0);
        let cm = ConfusionMatrix { tp, fp, tn, fn_ };
        let m = derived_metrics(&cm);
        let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p = div(tp, tp + fp);
        let r = div(tp, tp + fn_);
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        prop_assert!((m.accuracy - div(tp + tn, tp + fp + tn + fn_)).abs() < 1e-12);
        prop_assert!((m.precision - p).abs() < 1e-12);
        prop_assert!((m.recall - r).abs() < 1e-12);
        prop_assert!((m.f1 - f1).abs() < 1e-12);
    }
}

#[test]
fn single_class_roc_is_an_error() {
    assert!(roc_curve(&[true, true], &[0.2, 0.9]).is_err());
    assert!(roc_curve(&[false], &[0.2]).is_err());
}
