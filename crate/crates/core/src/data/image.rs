use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scan::ImageRecord;
use crate::error::{Error, Result};

/// Intensity convention of an [`ImageTensor`]'s values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normalization {
    #[serde(rename = "raw_0_255")]
    Raw0To255,
    #[serde(rename = "unit_0_1")]
    Unit0To1,
    #[serde(rename = "symmetric_neg1_1")]
    SymmetricNeg1To1,
}

impl Normalization {
    pub fn range(self) -> (f32, f32) {
        match self {
            Normalization::Raw0To255 => (0.0, 255.0),
            Normalization::Unit0To1 => (0.0, 1.0),
            Normalization::SymmetricNeg1To1 => (-1.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Raw0To255 => "raw_0_255",
            Normalization::Unit0To1 => "unit_0_1",
            Normalization::SymmetricNeg1To1 => "symmetric_neg1_1",
        }
    }
}

/// Interleaved RGB image, row-major `height × width × 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    values: Vec<f32>,
    normalization: Normalization,
}

impl ImageTensor {
    pub const CHANNELS: usize = 3;

    pub fn new(
        height: usize,
        width: usize,
        values: Vec<f32>,
        normalization: Normalization,
    ) -> Result<Self> {
        if values.len() != height * width * Self::CHANNELS {
            return Err(Error::Usage(format!(
                "image buffer has {} values, expected {height}×{width}×3",
                values.len()
            )));
        }
        Ok(ImageTensor {
            height,
            width,
            values,
            normalization,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3], normalization: Normalization) -> Self {
        let values = rgb.iter().copied().cycle().take(height * width * 3).collect();
        ImageTensor {
            height,
            width,
            values,
            normalization,
        }
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        ImageTensor {
            height: img.height() as usize,
            width: img.width() as usize,
            values: img.as_raw().iter().map(|&v| v as f32).collect(),
            normalization: Normalization::Raw0To255,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        Self::CHANNELS
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.values[(y * self.width + x) * 3 + c]
    }

    pub fn channel_means(&self) -> [f32; 3] {
        let mut sums = [0f64; 3];
        for px in self.values.chunks_exact(3) {
            for c in 0..3 {
                sums[c] += px[c] as f64;
            }
        }
        let n = (self.height * self.width).max(1) as f64;
        sums.map(|s| (s / n) as f32)
    }

    /// Clamps every value into the range of the current normalization.
    pub fn clip(&mut self) {
        let (lo, hi) = self.normalization.range();
        for v in &mut self.values {
            *v = v.clamp(lo, hi);
        }
    }

    pub(crate) fn with_values(&self, height: usize, width: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), height * width * 3);
        ImageTensor {
            height,
            width,
            values,
            normalization: self.normalization,
        }
    }

    /// Converts back to 8-bit RGB for rendering.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let (lo, hi) = self.normalization.range();
        let scale = 255.0 / (hi - lo);
        let bytes = self
            .values
            .iter()
            .map(|&v| ((v - lo) * scale).round().clamp(0.0, 255.0) as u8)
            .collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }
}

/// Decodes an image file at its native size. Grayscale and alpha sources are
/// converted to 3-channel RGB.
pub fn decode_image(path: &Path) -> Result<ImageTensor> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .with_guessed_format()
        .map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .decode()
        .map_err(|e| Error::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    Ok(ImageTensor::from_rgb8(&img.to_rgb8()))
}

/// Decodes `record` and resizes it to `target` (height, width).
pub fn load_image(record: &ImageRecord, target: (usize, usize)) -> Result<ImageTensor> {
    let t = decode_image(&record.path)?;
    Ok(resize_bilinear(&t, target.0, target.1))
}

/// Bilinear resize with half-pixel centers. Resizing to the same size
/// reproduces the input exactly.
pub fn resize_bilinear(t: &ImageTensor, height: usize, width: usize) -> ImageTensor {
    if t.height == height && t.width == width {
        return t.clone();
    }
    let sy = t.height as f32 / height as f32;
    let sx = t.width as f32 / width as f32;
    let mut out = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (t.height - 1) as f32);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(t.height - 1);
        let wy = fy - y0 as f32;
        for x in 0..width {
            let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (t.width - 1) as f32);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(t.width - 1);
            let wx = fx - x0 as f32;
            for c in 0..3 {
                let top = t.at(y0, x0, c) * (1.0 - wx) + t.at(y0, x1, c) * wx;
                let bottom = t.at(y1, x0, c) * (1.0 - wx) + t.at(y1, x1, c) * wx;
                out.push(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    t.with_values(height, width, out)
}

/// Maps a raw 0–255 image into `scheme`.
pub fn normalize(t: &ImageTensor, scheme: Normalization) -> Result<ImageTensor> {
    if t.normalization != Normalization::Raw0To255 {
        return Err(Error::Usage(format!(
            "normalize expects a raw_0_255 image, got {}",
            t.normalization.as_str()
        )));
    }
    let f: fn(f32) -> f32 = match scheme {
        Normalization::Raw0To255 => |v| v,
        Normalization::Unit0To1 => |v| v / 255.0,
        Normalization::SymmetricNeg1To1 => |v| v / 127.5 - 1.0,
    };
    let mut out = ImageTensor {
        height: t.height,
        width: t.width,
        values: t.values.iter().map(|&v| f(v)).collect(),
        normalization: scheme,
    };
    // Guards against rounding just past an endpoint.
    out.clip();
    Ok(out)
}
