//! Tiled prediction grids with a label banner on each cell.

use image::imageops::{resize, FilterType};
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::canvas::{Canvas, CALM_GREEN, ERROR_YELLOW, FIRE_RED, GRAY, WHITE};
use super::font::{text_width, ADVANCE};
use crate::error::{Error, Result};

pub const CELL: u32 = 160;
pub const BANNER: u32 = 22;
const GAP: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionGridSpec {
    pub columns: usize,
    /// Rows per page; `None` puts everything on one page.
    pub rows: Option<usize>,
    /// Outline cells whose prediction disagrees with a known true label.
    pub highlight_errors: bool,
}

impl Default for PredictionGridSpec {
    fn default() -> Self {
        PredictionGridSpec {
            columns: 4,
            rows: None,
            highlight_errors: true,
        }
    }
}

impl PredictionGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.columns == 0 || self.rows == Some(0) {
            return Err(Error::Config("grid columns and rows must be >= 1".into()));
        }
        Ok(())
    }

    /// (rows, columns) of a page holding `n` images.
    pub fn page_shape(&self, n: usize) -> (usize, usize) {
        let cols = self.columns.min(n.max(1));
        let rows = n.div_ceil(self.columns).max(1);
        (self.rows.map_or(rows, |r| r.min(rows)), cols)
    }
}

#[derive(Clone, Debug)]
pub struct GridCell {
    /// `None` for unreadable inputs.
    pub image: Option<RgbImage>,
    pub label: String,
    pub score: Option<f64>,
    pub positive: bool,
    /// Known correctness of the prediction, if the true label is known.
    pub correct: Option<bool>,
}

fn banner_text(cell: &GridCell) -> String {
    let text = match cell.score {
        Some(s) => format!("{} {s:.2}", cell.label),
        None => cell.label.clone(),
    };
    let max_chars = ((CELL - 4) / ADVANCE) as usize;
    text.chars().take(max_chars).collect()
}

fn draw_cell(canvas: &mut Canvas, cell: &GridCell, x: i64, y: i64, spec: &PredictionGridSpec) {
    match &cell.image {
        Some(img) => {
            let thumb = resize(img, CELL, CELL - BANNER, FilterType::Triangle);
            canvas.blit(&thumb, x, y + BANNER as i64);
        }
        None => canvas.fill_rect(x, y + BANNER as i64, CELL, CELL - BANNER, [60, 60, 60]),
    }
    let color = match (&cell.image, cell.positive) {
        (None, _) => GRAY,
        (_, true) => FIRE_RED,
        (_, false) => CALM_GREEN,
    };
    canvas.fill_rect(x, y, CELL, BANNER, color);
    let text = banner_text(cell);
    canvas.text(x + (CELL as i64 - text_width(&text, 2).min(CELL) as i64) / 2, y + 4, &text, 2, WHITE);
    if spec.highlight_errors && cell.correct == Some(false) {
        canvas.stroke_rect(x, y, CELL, CELL, 4, ERROR_YELLOW);
    }
}

/// One image per page.
pub fn render_grid(cells: &[GridCell], spec: &PredictionGridSpec) -> Result<Vec<RgbImage>> {
    spec.validate()?;
    if cells.is_empty() {
        return Err(Error::Usage("no images to place in a grid".into()));
    }
    let (rows, cols) = spec.page_shape(cells.len());
    let per_page = rows * cols;
    Ok(cells
        .chunks(per_page)
        .map(|page| {
            let page_rows = page.len().div_ceil(cols);
            let w = cols as u32 * (CELL + GAP) + GAP;
            let h = page_rows.max(if spec.rows.is_some() { rows } else { 1 }) as u32 * (CELL + GAP) + GAP;
            let mut canvas = Canvas::new(w, h, WHITE);
            for (i, cell) in page.iter().enumerate() {
                let (r, c) = (i / cols, i % cols);
                let x = (GAP + c as u32 * (CELL + GAP)) as i64;
                let y = (GAP + r as u32 * (CELL + GAP)) as i64;
                draw_cell(&mut canvas, cell, x, y, spec);
            }
            canvas.image
        })
        .collect())
}

/// Pixel size of a grid with the given shape.
pub fn grid_dimensions(rows: usize, cols: usize) -> (u32, u32) {
    (cols as u32 * (CELL + GAP) + GAP, rows as u32 * (CELL + GAP) + GAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(n: usize) -> Vec<GridCell> {
        (0..n)
            .map(|i| GridCell {
                image: Some(RgbImage::from_pixel(50, 30, image::Rgb([200, 10, 10]))),
                label: if i % 2 == 0 { "fire".into() } else { "nofire".into() },
                score: Some(0.73),
                positive: i % 2 == 0,
                correct: Some(i != 1),
            })
            .collect()
    }

    #[test]
    fn twelve_images_four_columns() {
        let pages = render_grid(&cells(12), &PredictionGridSpec::default()).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].dimensions(), grid_dimensions(3, 4));
    }

    #[test]
    fn single_image_single_cell() {
        let pages = render_grid(&cells(1), &PredictionGridSpec::default()).unwrap();
        assert_eq!(pages[0].dimensions(), grid_dimensions(1, 1));
    }

    #[test]
    fn paging_respects_row_limit() {
        let spec = PredictionGridSpec {
            columns: 3,
            rows: Some(2),
            highlight_errors: false,
        };
        let pages = render_grid(&cells(14), &spec).unwrap();
        assert_eq!(pages.len(), 3);
        assert!(pages.iter().all(|p| p.dimensions() == grid_dimensions(2, 3)));
    }

    #[test]
    fn banners_and_error_outline() {
        let spec = PredictionGridSpec::default();
        let page = &render_grid(&cells(2), &spec).unwrap()[0];
        let banner = |i: u32| page.get_pixel(GAP + i * (CELL + GAP) + 1, GAP + 1).0;
        assert_eq!(banner(0), FIRE_RED);
        assert_eq!(page.get_pixel(GAP + CELL + GAP + 1, GAP + CELL - 2).0, ERROR_YELLOW);
        let unreadable = GridCell {
            image: None,
            label: "unreadable".into(),
            score: None,
            positive: false,
            correct: None,
        };
        let page = &render_grid(&[unreadable], &spec).unwrap()[0];
        assert_eq!(page.get_pixel(GAP + 1, GAP + 1).0, GRAY);
    }
}
