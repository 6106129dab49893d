use image::{Rgb, RgbImage};

use super::font::{glyph, text_width, ADVANCE, GLYPH_HEIGHT, GLYPH_WIDTH};

pub type Color = [u8; 3];

pub const WHITE: Color = [255, 255, 255];
pub const BLACK: Color = [0, 0, 0];
pub const GRAY: Color = [150, 150, 150];
pub const LIGHT_GRAY: Color = [225, 225, 225];
pub const BLUE: Color = [31, 119, 180];
pub const ORANGE: Color = [255, 127, 14];
pub const FIRE_RED: Color = [200, 30, 30];
pub const CALM_GREEN: Color = [30, 150, 60];
pub const ERROR_YELLOW: Color = [250, 210, 0];

/// Drawing surface with clipped primitives.
pub struct Canvas {
    pub image: RgbImage,
}

impl Canvas {
    pub fn new(width: u32, height: u32, background: Color) -> Self {
        Canvas {
            image: RgbImage::from_pixel(width, height, Rgb(background)),
        }
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn put(&mut self, x: i64, y: i64, color: Color) {
        if x >= 0 && y >= 0 && (x as u32) < self.width() && (y as u32) < self.height() {
            self.image.put_pixel(x as u32, y as u32, Rgb(color));
        }
    }

    pub fn fill_rect(&mut self, x: i64, y: i64, w: u32, h: u32, color: Color) {
        for yy in y..y + h as i64 {
            for xx in x..x + w as i64 {
                self.put(xx, yy, color);
            }
        }
    }

    pub fn stroke_rect(&mut self, x: i64, y: i64, w: u32, h: u32, thickness: u32, color: Color) {
        let t = thickness.min(w).min(h);
        self.fill_rect(x, y, w, t, color);
        self.fill_rect(x, y + (h - t) as i64, w, t, color);
        self.fill_rect(x, y, t, h, color);
        self.fill_rect(x + (w - t) as i64, y, t, h, color);
    }

    /// Line of the given thickness; every `dash`-th segment is skipped when
    /// `dash` is non-zero.
    pub fn line(&mut self, from: (f64, f64), to: (f64, f64), thickness: u32, color: Color, dash: u32) {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        let steps = dx.abs().max(dy.abs()).ceil().max(1.0) as u32;
        let r = thickness as i64 / 2;
        for s in 0..=steps {
            if dash > 0 && (s / dash) % 2 == 1 {
                continue;
            }
            let t = s as f64 / steps as f64;
            let x = (from.0 + dx * t).round() as i64;
            let y = (from.1 + dy * t).round() as i64;
            for oy in -r..=r {
                for ox in -r..=r {
                    self.put(x + ox, y + oy, color);
                }
            }
        }
    }

    pub fn text(&mut self, x: i64, y: i64, text: &str, scale: u32, color: Color) {
        let s = scale as i64;
        for (i, c) in text.chars().enumerate() {
            let rows = glyph(c);
            let gx = x + i as i64 * ADVANCE as i64 * s;
            for (row, bits) in rows.iter().enumerate() {
                for col in 0..GLYPH_WIDTH {
                    if bits & (1 << (GLYPH_WIDTH - 1 - col)) != 0 {
                        self.fill_rect(gx + col as i64 * s, y + row as i64 * s, scale, scale, color);
                    }
                }
            }
        }
    }

    pub fn text_centered(&mut self, cx: i64, y: i64, text: &str, scale: u32, color: Color) {
        let w = text_width(text, scale) as i64;
        self.text(cx - w / 2, y, text, scale, color);
    }

    /// Text rotated a quarter turn counter-clockwise, centered on `cy`.
    pub fn text_vertical(&mut self, x: i64, cy: i64, text: &str, scale: u32, color: Color) {
        let s = scale as i64;
        let len = text_width(text, scale) as i64;
        let top = cy + len / 2;
        for (i, c) in text.chars().enumerate() {
            let rows = glyph(c);
            let gy = top - i as i64 * ADVANCE as i64 * s;
            for (row, bits) in rows.iter().enumerate() {
                for col in 0..GLYPH_WIDTH {
                    if bits & (1 << (GLYPH_WIDTH - 1 - col)) != 0 {
                        self.fill_rect(x + row as i64 * s, gy - (col as i64 + 1) * s, scale, scale, color);
                    }
                }
            }
        }
    }

    /// Copies `src` with its top-left corner at (x, y).
    pub fn blit(&mut self, src: &RgbImage, x: i64, y: i64) {
        for (sx, sy, px) in src.enumerate_pixels() {
            self.put(x + sx as i64, y + sy as i64, px.0);
        }
    }
}

pub fn text_height(scale: u32) -> u32 {
    GLYPH_HEIGHT * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_clipped() {
        let mut c = Canvas::new(10, 10, WHITE);
        c.fill_rect(-5, -5, 30, 7, BLACK);
        c.line((-20.0, 5.0), (40.0, 5.0), 3, BLUE, 0);
        c.text(8, 8, "WWW", 2, FIRE_RED);
        assert_eq!(c.image.get_pixel(0, 0).0, BLACK);
        assert_eq!(c.image.get_pixel(9, 5).0, BLUE);
    }

    #[test]
    fn text_marks_pixels() {
        let mut c = Canvas::new(20, 10, WHITE);
        c.text(0, 0, "1", 1, BLACK);
        assert_eq!(c.image.get_pixel(2, 0).0, BLACK);
        assert_eq!(c.image.get_pixel(0, 0).0, WHITE);
    }
}
