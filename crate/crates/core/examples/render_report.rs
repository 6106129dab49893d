//! Draws training curves, the ROC curve and the confusion heatmap from a
//! made-up history and score set.
//!
//! cargo run --example render_report [OUT_DIR]

use std::path::PathBuf;

use ember::eval::EvaluationReport;
use ember::render::{write_evaluation_plots, write_training_curves};
use ember::train::{EpochMetrics, TrainingHistory};

fn main() -> ember::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ember-report-example"));

    let entries = (0..20)
        .map(|e| {
            let t = e as f64;
            EpochMetrics {
                epoch: e,
                train_loss: 0.7 * (-t / 5.0).exp() + 0.03,
                train_accuracy: 1.0 - 0.45 * (-t / 4.0).exp(),
                val_loss: Some(0.7 * (-t / 6.0).exp() + 0.06 + 0.002 * t),
                val_accuracy: Some(1.0 - 0.45 * (-t / 5.0).exp() - 0.02),
                active_stage: if e < 10 { "head_only".into() } else { "all".into() },
            }
        })
        .collect();
    let history = TrainingHistory {
        entries,
        stopped_early: false,
        best_epoch: 14,
    };
    write_training_curves(&history, &out)?;

    let mut rng = ember::rng::stream(3, &[]);
    let labels: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&y| {
            let noise: f64 = rand::Rng::random_range(&mut rng, -0.35..0.35);
            (if y { 0.75 } else { 0.25 } + noise).clamp(0.0, 1.0)
        })
        .collect();
    let report = EvaluationReport::from_scores(
        vec!["fire".into(), "nofire".into()],
        "fire".into(),
        0.5,
        &labels,
        &scores,
        Vec::new(),
    )?;
    write_evaluation_plots(&report, &out)?;
    println!(
        "accuracy {:.3}, AUC {:.3}; plots written to {}",
        report.accuracy,
        report.auc.unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}
