//! Line plots, the ROC plot and the confusion-matrix heatmap.

use image::RgbImage;
use serde::Serialize;

use super::canvas::{text_height, Canvas, Color, BLACK, BLUE, GRAY, LIGHT_GRAY, ORANGE, WHITE};
use super::font::text_width;
use crate::eval::EvaluationReport;
use crate::train::TrainingHistory;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub color: Color,
    pub points: Vec<(f64, f64)>,
}

/// Everything a line plot shows, independent of pixels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
    /// Optional dashed reference line.
    pub reference: Option<((f64, f64), (f64, f64))>,
    /// Place x ticks on whole numbers only.
    pub integer_x: bool,
}

fn epoch_series(history: &TrainingHistory, name: &str, color: Color, f: impl Fn(usize) -> Option<f64>) -> Option<Series> {
    let points: Vec<(f64, f64)> = (0..history.entries.len())
        .filter_map(|i| f(i).map(|v| (history.entries[i].epoch as f64, v)))
        .collect();
    (!points.is_empty()).then(|| Series {
        name: name.into(),
        color,
        points,
    })
}

fn epoch_range(history: &TrainingHistory) -> (f64, f64) {
    let last = history.entries.last().map_or(0, |e| e.epoch) as f64;
    (0.0, last.max(1.0))
}

pub fn accuracy_plot(history: &TrainingHistory) -> LinePlot {
    let e = &history.entries;
    LinePlot {
        title: "Training and validation accuracy".into(),
        x_label: "Epoch".into(),
        y_label: "Accuracy".into(),
        x_range: epoch_range(history),
        y_range: (0.0, 1.0),
        series: [
            epoch_series(history, "train", BLUE, |i| Some(e[i].train_accuracy)),
            epoch_series(history, "validation", ORANGE, |i| e[i].val_accuracy),
        ]
        .into_iter()
        .flatten()
        .collect(),
        reference: None,
        integer_x: true,
    }
}

pub fn loss_plot(history: &TrainingHistory) -> LinePlot {
    let e = &history.entries;
    let max = e
        .iter()
        .flat_map(|m| [Some(m.train_loss), m.val_loss])
        .flatten()
        .fold(0.0f64, f64::max);
    LinePlot {
        title: "Training and validation loss".into(),
        x_label: "Epoch".into(),
        y_label: "Loss".into(),
        x_range: epoch_range(history),
        y_range: (0.0, if max > 0.0 { max * 1.05 } else { 1.0 }),
        series: [
            epoch_series(history, "train", BLUE, |i| Some(e[i].train_loss)),
            epoch_series(history, "validation", ORANGE, |i| e[i].val_loss),
        ]
        .into_iter()
        .flatten()
        .collect(),
        reference: None,
        integer_x: true,
    }
}

/// ROC plot data; `None` when the report has no ROC curve.
pub fn roc_plot(report: &EvaluationReport) -> Option<LinePlot> {
    let roc = report.roc.as_ref()?;
    Some(LinePlot {
        title: format!("ROC curve (AUC = {:.4})", report.auc.unwrap_or(f64::NAN)),
        x_label: "False positive rate".into(),
        y_label: "True positive rate".into(),
        x_range: (0.0, 1.0),
        y_range: (0.0, 1.0),
        series: vec![Series {
            name: "ROC".into(),
            color: BLUE,
            points: roc.points.clone(),
        }],
        reference: Some(((0.0, 0.0), (1.0, 1.0))),
        integer_x: false,
    })
}

fn tick_label(v: f64, span: f64) -> String {
    if span >= 10.0 {
        format!("{v:.0}")
    } else if span >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

pub fn render_line_plot(plot: &LinePlot) -> RgbImage {
    let mut c = Canvas::new(WIDTH, HEIGHT, WHITE);
    let (pw, ph) = (WIDTH as f64 - LEFT - RIGHT, HEIGHT as f64 - TOP - BOTTOM);
    let (x0, x1) = plot.x_range;
    let (y0, y1) = plot.y_range;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (LEFT + (x - x0) / (x1 - x0) * pw, TOP + ph - (y - y0) / (y1 - y0) * ph)
    };

    c.text_centered(WIDTH as i64 / 2, 14, &plot.title, 2, BLACK);
    for i in 0..=5 {
        let y = y0 + (y1 - y0) * i as f64 / 5.0;
        let (_, py) = to_px(x0, y);
        c.line((LEFT, py), (LEFT + pw, py), 1, LIGHT_GRAY, 0);
        let label = tick_label(y, y1 - y0);
        c.text(LEFT as i64 - 8 - text_width(&label, 1) as i64, py as i64 - 3, &label, 1, BLACK);
    }
    let x_ticks: Vec<f64> = if plot.integer_x {
        let step = ((x1 - x0) / 10.0).ceil().max(1.0);
        (0..).map(|i| x0.ceil() + i as f64 * step).take_while(|&x| x <= x1).collect()
    } else {
        (0..=5).map(|i| x0 + (x1 - x0) * i as f64 / 5.0).collect()
    };
    for x in x_ticks {
        let (px, _) = to_px(x, y0);
        c.line((px, TOP + ph), (px, TOP + ph + 4.0), 1, BLACK, 0);
        let label = if plot.integer_x { format!("{x:.0}") } else { tick_label(x, x1 - x0) };
        c.text_centered(px as i64, (TOP + ph + 8.0) as i64, &label, 1, BLACK);
    }
    c.line((LEFT, TOP), (LEFT, TOP + ph), 1, BLACK, 0);
    c.line((LEFT, TOP + ph), (LEFT + pw, TOP + ph), 1, BLACK, 0);
    c.text_centered((LEFT + pw / 2.0) as i64, HEIGHT as i64 - 26, &plot.x_label, 2, BLACK);
    c.text_vertical(12, (TOP + ph / 2.0) as i64, &plot.y_label, 2, BLACK);

    if let Some((a, b)) = plot.reference {
        c.line(to_px(a.0, a.1), to_px(b.0, b.1), 1, GRAY, 6);
    }
    for s in &plot.series {
        for w in s.points.windows(2) {
            c.line(to_px(w[0].0, w[0].1), to_px(w[1].0, w[1].1), 2, s.color, 0);
        }
        for p in &s.points {
            let (px, py) = to_px(p.0, p.1);
            c.fill_rect(px.round() as i64 - 2, py.round() as i64 - 2, 5, 5, s.color);
        }
    }
    let name_width = plot.series.iter().map(|s| text_width(&s.name, 2)).max().unwrap_or(0) as i64;
    let (box_w, box_h) = (name_width + 40, plot.series.len() as i64 * 18 + 8);
    let corners = [
        ((LEFT + pw) as i64 - 2 - box_w, TOP as i64 + 2),
        ((LEFT + pw) as i64 - 2 - box_w, (TOP + ph) as i64 - 2 - box_h),
        (LEFT as i64 + 2, TOP as i64 + 2),
        (LEFT as i64 + 2, (TOP + ph) as i64 - 2 - box_h),
    ];
    let covered = |&(bx, by): &(i64, i64)| {
        plot.series
            .iter()
            .flat_map(|s| s.points.windows(2))
            .flat_map(|w| (0..=8).map(move |k| {
                let t = k as f64 / 8.0;
                (w[0].0 + (w[1].0 - w[0].0) * t, w[0].1 + (w[1].1 - w[0].1) * t)
            }))
            .map(|(x, y)| to_px(x, y))
            .filter(|&(px, py)| {
                ((bx - 6) as f64..(bx + box_w + 6) as f64).contains(&px)
                    && ((by - 6) as f64..(by + box_h + 6) as f64).contains(&py)
            })
            .count()
    };
    let (box_x, box_y) = *corners.iter().min_by_key(|c| covered(c)).expect("four corners");
    if !plot.series.is_empty() {
        c.fill_rect(box_x, box_y, box_w as u32, box_h as u32, WHITE);
    }
    let legend_x = box_x + 6;
    for (i, s) in plot.series.iter().enumerate() {
        let y = box_y + 10 + i as i64 * 18;
        c.fill_rect(legend_x, y, 20, 4, s.color);
        c.text(legend_x + 28, y - 4, &s.name, 2, BLACK);
    }
    c.image
}

/// Placeholder used when a report carries no ROC curve.
pub fn render_message(title: &str, message: &str) -> RgbImage {
    let mut c = Canvas::new(WIDTH, HEIGHT, WHITE);
    c.text_centered(WIDTH as i64 / 2, 14, title, 2, BLACK);
    c.text_centered(WIDTH as i64 / 2, HEIGHT as i64 / 2, message, 2, GRAY);
    c.image
}

pub fn render_roc(report: &EvaluationReport) -> RgbImage {
    match roc_plot(report) {
        Some(plot) => render_line_plot(&plot),
        None => render_message("ROC curve", "not available: only one class present"),
    }
}

fn heat(fraction: f64) -> Color {
    let f = fraction.clamp(0.0, 1.0);
    let mix = |lo: f64, hi: f64| (lo + (hi - lo) * f).round() as u8;
    [mix(247.0, 8.0), mix(251.0, 48.0), mix(255.0, 107.0)]
}

/// 2×2 heatmap: rows are actual classes, columns predicted, positive class
/// first.
pub fn render_confusion(report: &EvaluationReport) -> RgbImage {
    let mut c = Canvas::new(WIDTH, HEIGHT, WHITE);
    let cm = &report.confusion;
    let negative = report
        .class_names
        .iter()
        .find(|n| **n != report.positive_class)
        .cloned()
        .unwrap_or_else(|| format!("not {}", report.positive_class));
    let names = [report.positive_class.clone(), negative];
    let counts = [[cm.tp, cm.fn_], [cm.fp, cm.tn]];
    let total = cm.total().max(1) as f64;
    let (cell, x0, y0) = (160i64, 200i64, 80i64);

    c.text_centered(WIDTH as i64 / 2, 14, "Confusion matrix", 2, BLACK);
    for (r, row) in counts.iter().enumerate() {
        for (col, &n) in row.iter().enumerate() {
            let frac = n as f64 / total;
            let (x, y) = (x0 + col as i64 * cell, y0 + r as i64 * cell);
            c.fill_rect(x, y, cell as u32, cell as u32, heat(frac));
            c.stroke_rect(x, y, cell as u32, cell as u32, 1, GRAY);
            let ink = if frac > 0.5 { WHITE } else { BLACK };
            let text = n.to_string();
            c.text_centered(x + cell / 2, y + cell / 2 - text_height(3) as i64 / 2, &text, 3, ink);
        }
        c.text(
            x0 - 16 - text_width(&names[r], 2) as i64,
            y0 + r as i64 * cell + cell / 2 - 7,
            &names[r],
            2,
            BLACK,
        );
        c.text_centered(x0 + r as i64 * cell + cell / 2, y0 - 24, &names[r], 2, BLACK);
    }
    c.text_centered(x0 + cell, y0 + 2 * cell + 16, "Predicted", 2, BLACK);
    c.text_vertical(40, y0 + cell, "Actual", 2, BLACK);
    c.image
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::EpochMetrics;

    fn history(n: usize) -> TrainingHistory {
        TrainingHistory {
            entries: (0..n)
                .map(|i| EpochMetrics {
                    epoch: i,
                    train_loss: 1.0 / (i + 1) as f64,
                    train_accuracy: 0.5 + 0.04 * i as f64,
                    val_loss: Some(1.2 / (i + 1) as f64),
                    val_accuracy: Some(0.5),
                    active_stage: "head_only".into(),
                })
                .collect(),
            ..TrainingHistory::default()
        }
    }

    #[test]
    fn single_epoch_has_one_point_per_series() {
        let plot = accuracy_plot(&history(1));
        assert_eq!(plot.series.len(), 2);
        assert!(plot.series.iter().all(|s| s.points.len() == 1));
        let img = render_line_plot(&plot);
        assert_eq!(img.dimensions(), (WIDTH, HEIGHT));
    }

    #[test]
    fn rendering_is_deterministic() {
        let h = history(10);
        assert_eq!(loss_plot(&h), loss_plot(&h));
        assert_eq!(render_line_plot(&loss_plot(&h)), render_line_plot(&loss_plot(&h)));
    }

    #[test]
    fn missing_validation_drops_the_series() {
        let mut h = history(3);
        for e in &mut h.entries {
            e.val_loss = None;
            e.val_accuracy = None;
        }
        assert_eq!(loss_plot(&h).series.len(), 1);
    }
}
