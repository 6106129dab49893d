//! Confusion matrix, derived metrics and ROC/AUC for a handful of scores.
//!
//! cargo run --example evaluate_metrics

use ember::eval::{auc, confusion_matrix, derived_metrics, roc_curve};

fn main() -> ember::Result<()> {
    let labels = [true, true, true, true, false, false, false, false, true, false];
    let scores = [0.95, 0.80, 0.62, 0.40, 0.70, 0.30, 0.30, 0.05, 0.55, 0.50];

    for threshold in [0.3, 0.5, 0.7] {
        let cm = confusion_matrix(&labels, &scores, threshold)?;
        let m = derived_metrics(&cm);
        println!(
            "threshold {threshold:.1}: tp {} fp {} tn {} fn {} | acc {:.2} prec {:.2} rec {:.2} f1 {:.2}",
            cm.tp, cm.fp, cm.tn, cm.fn_, m.accuracy, m.precision, m.recall, m.f1
        );
    }

    let roc = roc_curve(&labels, &scores)?;
    println!("\n{:>10} {:>6} {:>6}", "threshold", "fpr", "tpr");
    for (t, (fpr, tpr)) in roc.thresholds.iter().zip(&roc.points) {
        println!("{t:>10.2} {fpr:>6.2} {tpr:>6.2}");
    }
    println!("AUC {:.4}", auc(&roc));
    Ok(())
}
