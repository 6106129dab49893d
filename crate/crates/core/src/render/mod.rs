//! PNG artifacts: training curves, ROC plot, confusion heatmap and
//! prediction grids. Text uses a built-in 5×7 bitmap font.

mod canvas;
mod font;
mod grid;
mod plots;

use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::eval::EvaluationReport;
use crate::train::TrainingHistory;

pub use self::canvas::{Canvas, Color};
pub use self::grid::{grid_dimensions, render_grid, GridCell, PredictionGridSpec, BANNER, CELL};
pub use self::plots::{
    accuracy_plot, loss_plot, render_confusion, render_line_plot, render_message, render_roc, roc_plot, LinePlot,
    Series,
};

pub const ACCURACY_CURVE_FILE: &str = "curves_accuracy.png";
pub const LOSS_CURVE_FILE: &str = "curves_loss.png";
pub const ROC_FILE: &str = "roc.png";
pub const CONFUSION_FILE: &str = "confusion.png";

pub fn save_png(image: &RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut bytes = Vec::new();
    image
        .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Usage(format!("cannot encode {}: {e}", path.display())))?;
    crate::fsutil::write_atomic(path, &bytes)
}

/// Writes `curves_accuracy.png` and `curves_loss.png` into `dir`.
pub fn write_training_curves(history: &TrainingHistory, dir: &Path) -> Result<()> {
    save_png(&render_line_plot(&accuracy_plot(history)), &dir.join(ACCURACY_CURVE_FILE))?;
    save_png(&render_line_plot(&loss_plot(history)), &dir.join(LOSS_CURVE_FILE))
}

/// Writes `roc.png` and `confusion.png` into `dir`.
pub fn write_evaluation_plots(report: &EvaluationReport, dir: &Path) -> Result<()> {
    save_png(&render_roc(report), &dir.join(ROC_FILE))?;
    save_png(&render_confusion(report), &dir.join(CONFUSION_FILE))
}
