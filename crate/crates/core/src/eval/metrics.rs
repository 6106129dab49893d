use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary outcome counts at a decision threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (fpr, tpr) pairs from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    /// `thresholds[i]` produces `points[i]`; the first is a sentinel above
    /// every score.
    pub thresholds: Vec<f64>,
}

fn check_lengths(labels: usize, scores: usize) -> Result<()> {
    if labels != scores {
        return Err(Error::Usage(format!("{labels} labels but {scores} scores")));
    }
    if labels == 0 {
        return Err(Error::Usage("no samples to evaluate".into()));
    }
    Ok(())
}

/// Counts outcomes with `true` labels as the positive class; a sample is
/// predicted positive iff its score is at least `threshold`.
pub fn confusion_matrix(labels: &[bool], scores: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    check_lengths(labels.len(), scores.len())?;
    let mut cm = ConfusionMatrix::default();
    for (&positive, &score) in labels.iter().zip(scores) {
        match (positive, score >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1. Any ratio with a zero denominator
/// is reported as 0.
pub fn derived_metrics(cm: &ConfusionMatrix) -> DerivedMetrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    DerivedMetrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
    }
}

pub fn roc_curve(labels: &[bool], scores: &[f64]) -> Result<RocCurve> {
    check_lengths(labels.len(), scores.len())?;
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Evaluation(format!("score {s} is not finite")));
    }
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        let missing = if positives == 0 { "positive" } else { "negative" };
        return Err(Error::Evaluation(format!(
            "ROC needs both classes but no {missing} samples are present"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let max = scores[order[0]];
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![max + 1.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(threshold);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the ROC points.
pub fn auc(roc: &RocCurve) -> f64 {
    roc.points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bools(v: &[u8]) -> Vec<bool> {
        v.iter().map(|x| *x == 1).collect()
    }

    #[test]
    fn four_case_confusion() {
        let cm = confusion_matrix(&bools(&[1, 1, 0, 0]), &[0.9, 0.2, 0.3, 0.8], 0.5).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 1, tn: 1, fn_: 1 });
        let m = derived_metrics(&cm);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn threshold_zero_predicts_all_positive() {
        let cm = confusion_matrix(&bools(&[1, 0, 0]), &[0.0, 0.1, 0.7], 0.0).unwrap();
        assert_eq!((cm.tn, cm.fn_), (0, 0));
    }

    #[test]
    fn threshold_is_inclusive() {
        let cm = confusion_matrix(&[true], &[0.5], 0.5).unwrap();
        assert_eq!(cm.tp, 1);
    }

    #[test]
    fn length_mismatch_is_usage_error() {
        assert!(matches!(confusion_matrix(&[true], &[0.1, 0.2], 0.5), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_denominators() {
        let m = derived_metrics(&ConfusionMatrix { tp: 0, fp: 0, tn: 5, fn_: 5 });
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (0.0, 0.0, 0.0, 0.5));
        let m = derived_metrics(&ConfusionMatrix { tp: 7, ..Default::default() });
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn two_sample_roc() {
        let roc = roc_curve(&bools(&[1, 0]), &[0.9, 0.1]).unwrap();
        assert_eq!(roc.points, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        assert_eq!(&roc.thresholds[1..], &[0.9, 0.1]);
        assert!(roc.thresholds[0] > 0.9);
        assert_eq!(auc(&roc), 1.0);
    }

    #[test]
    fn all_ties() {
        let roc = roc_curve(&bools(&[1, 0, 1, 0]), &[0.4; 4]).unwrap();
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&roc), 0.5);
    }

    #[test]
    fn partial_ranking() {
        let roc = roc_curve(&bools(&[1, 0, 1, 0]), &[0.9, 0.8, 0.4, 0.2]).unwrap();
        assert!((auc(&roc) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_class_names_missing_class() {
        let err = roc_curve(&[true, true], &[0.1, 0.2]).unwrap_err();
        assert!(matches!(&err, Error::Evaluation(m) if m.contains("negative")));
        let err = roc_curve(&[false], &[0.1]).unwrap_err();
        assert!(matches!(&err, Error::Evaluation(m) if m.contains("positive")));
    }
}
