use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{auc, confusion_matrix, derived_metrics, roc_curve, ConfusionMatrix, RocCurve};
use crate::data::{ImageRecord, ImageTensor};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::ClassifierModel;
use crate::workers;

pub const PREDICTIONS_HEADER: &str = "path,true_label,score,predicted_label";
pub const ZERO_DENOMINATOR_NOTE: &str = "precision, recall and f1 are reported as 0 when their denominator is 0";
const INFERENCE_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerImage {
    pub path: PathBuf,
    pub true_label: String,
    /// Positive-class score; absent for images that could not be read.
    pub score: Option<f64>,
    pub predicted_label: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    pub positive_class: String,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when only one class is present among the scored images.
    pub auc: Option<f64>,
    pub roc: Option<RocCurve>,
    pub evaluated: usize,
    pub error_count: usize,
    pub notes: Vec<String>,
    pub per_image: Vec<PerImage>,
}

impl EvaluationReport {
    /// Builds the metric fields from positive-class flags and scores.
    pub fn from_scores(
        class_names: Vec<String>,
        positive_class: String,
        threshold: f64,
        labels: &[bool],
        scores: &[f64],
        per_image: Vec<PerImage>,
    ) -> Result<Self> {
        let confusion = confusion_matrix(labels, scores, threshold)?;
        let m = derived_metrics(&confusion);
        let mut notes = vec![ZERO_DENOMINATOR_NOTE.to_string()];
        let roc = match roc_curve(labels, scores) {
            Ok(roc) => Some(roc),
            Err(Error::Evaluation(reason)) => {
                log::warn!("ROC/AUC omitted: {reason}");
                notes.push(format!("ROC/AUC omitted: {reason}"));
                None
            }
            Err(e) => return Err(e),
        };
        let error_count = per_image.iter().filter(|p| p.error.is_some()).count();
        Ok(EvaluationReport {
            class_names,
            positive_class,
            threshold,
            confusion,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: roc.as_ref().map(auc),
            roc,
            evaluated: labels.len(),
            error_count,
            notes,
            per_image,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Evaluation(format!("{}: {e}", path.display())))
    }

    pub fn predictions_csv(&self) -> String {
        let mut out = format!("{PREDICTIONS_HEADER}\n");
        for row in &self.per_image {
            let score = row.score.map(|s| format!("{s:.6}")).unwrap_or_default();
            let predicted = row.predicted_label.as_deref().unwrap_or("error");
            let _ = writeln!(
                out,
                "{},{},{score},{}",
                csv_field(&row.path.to_string_lossy()),
                csv_field(&row.true_label),
                csv_field(predicted)
            );
        }
        out
    }

    pub fn write_predictions_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.predictions_csv().as_bytes())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Scores every record in order. Unreadable images become error rows and
/// are left out of the metrics.
pub fn evaluate(model: &ClassifierModel, records: &[ImageRecord], threshold: f64) -> Result<EvaluationReport> {
    if records.is_empty() {
        return Err(Error::Dataset("no records to evaluate".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::Config(format!("threshold must be finite, got {threshold}")));
    }
    let settings = model.loader_settings();
    let mut per_image = Vec::with_capacity(records.len());
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for chunk in records.chunks(INFERENCE_CHUNK) {
        let prepared: Vec<Result<ImageTensor>> = workers::ordered_map(chunk, settings.workers, |r| settings.prepare(r));
        let ok: Vec<ImageTensor> = prepared.iter().filter_map(|p| p.as_ref().ok().cloned()).collect();
        let mut probs = model.predict_images(&ok)?.into_iter();
        for (record, image) in chunk.iter().zip(prepared) {
            let true_label = record.label.clone();
            match image {
                Ok(_) => {
                    let p = probs.next().expect("one prediction per decoded image");
                    let score = model.positive_score(&p);
                    let predicted = model.predicted_class(&p, threshold);
                    labels.push(record.label_index == model.positive_class());
                    scores.push(score);
                    per_image.push(PerImage {
                        path: record.path.clone(),
                        true_label,
                        score: Some(score),
                        predicted_label: Some(model.class_names()[predicted].clone()),
                        error: None,
                    });
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", record.path.display());
                    per_image.push(PerImage {
                        path: record.path.clone(),
                        true_label,
                        score: None,
                        predicted_label: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }
    if scores.is_empty() {
        return Err(Error::Dataset(format!("none of the {} images could be read", records.len())));
    }
    EvaluationReport::from_scores(
        model.class_names().to_vec(),
        model.positive_class_name().to_string(),
        threshold,
        &labels,
        &scores,
        per_image,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(path: &str, label: &str, score: Option<f64>) -> PerImage {
        PerImage {
            path: path.into(),
            true_label: label.into(),
            score,
            predicted_label: score.map(|s| if s >= 0.5 { "fire".into() } else { "nofire".into() }),
            error: score.is_none().then(|| "bad".into()),
        }
    }

    #[test]
    fn single_class_report_omits_roc() {
        let r = EvaluationReport::from_scores(
            vec!["fire".into(), "nofire".into()],
            "fire".into(),
            0.5,
            &[true, true],
            &[0.9, 0.3],
            vec![row("a.png", "fire", Some(0.9)), row("b.png", "fire", Some(0.3)), row("c.png", "fire", None)],
        )
        .unwrap();
        assert!(r.roc.is_none() && r.auc.is_none());
        assert_eq!(r.error_count, 1);
        assert_eq!(r.evaluated, 2);
        assert!(r.notes.iter().any(|n| n.contains("negative")));
    }

    #[test]
    fn csv_rows_and_quoting() {
        let r = EvaluationReport::from_scores(
            vec!["fire".into(), "nofire".into()],
            "fire".into(),
            0.5,
            &[true, false],
            &[0.73, 0.1],
            vec![row("x,1.png", "fire", Some(0.73)), row("y.png", "nofire", Some(0.1)), row("z.png", "nofire", None)],
        )
        .unwrap();
        let csv = r.predictions_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], PREDICTIONS_HEADER);
        assert_eq!(lines[1], "\"x,1.png\",fire,0.730000,fire");
        assert_eq!(lines[2], "y.png,nofire,0.100000,nofire");
        assert_eq!(lines[3], "z.png,nofire,,error");
        let back: EvaluationReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
