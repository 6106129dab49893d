use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::ImageTensor;
use crate::error::{Error, Result};

/// Random perturbations applied to training images.
///
/// Magnitudes are ranges for uniform draws: rotation in degrees
/// `[-rotation_max_degrees, rotation_max_degrees]`, zoom factor in
/// `[1 - zoom_range, 1 + zoom_range]`, brightness offset in
/// `[-brightness_jitter, brightness_jitter]` times the width of the
/// normalization range. Noise is zero-mean Gaussian in normalized-intensity
/// units. A zero magnitude disables that step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationSpec {
    pub rotation_max_degrees: f64,
    pub zoom_range: f64,
    pub horizontal_flip: bool,
    pub brightness_jitter: f64,
    pub gaussian_noise_stddev: f64,
    pub seed: u64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec::identity()
    }
}

impl AugmentationSpec {
    pub fn identity() -> Self {
        AugmentationSpec {
            rotation_max_degrees: 0.0,
            zoom_range: 0.0,
            horizontal_flip: false,
            brightness_jitter: 0.0,
            gaussian_noise_stddev: 0.0,
            seed: 0,
        }
    }

    /// Rotation, zoom and horizontal flips as used for the wildfire run.
    pub fn rotation_zoom_flip(seed: u64) -> Self {
        AugmentationSpec {
            rotation_max_degrees: 20.0,
            zoom_range: 0.2,
            horizontal_flip: true,
            seed,
            ..AugmentationSpec::identity()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let magnitudes = [
            ("rotation_max_degrees", self.rotation_max_degrees),
            ("zoom_range", self.zoom_range),
            ("brightness_jitter", self.brightness_jitter),
            ("gaussian_noise_stddev", self.gaussian_noise_stddev),
        ];
        for (name, v) in magnitudes {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "augmentation {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.zoom_range >= 1.0 {
            return Err(Error::Config(format!(
                "augmentation zoom_range must be < 1, got {}",
                self.zoom_range
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.rotation_max_degrees == 0.0
            && self.zoom_range == 0.0
            && !self.horizontal_flip
            && self.brightness_jitter == 0.0
            && self.gaussian_noise_stddev == 0.0
    }
}

// Slack for trigonometric round-off at the exact image border.
const EDGE_TOLERANCE: f64 = 1e-9;

pub fn flip_horizontal(t: &ImageTensor) -> ImageTensor {
    let (h, w) = (t.height(), t.width());
    let src = t.values();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        let row = &src[y * w * 3..(y + 1) * w * 3];
        for px in row.chunks_exact(3).rev() {
            out.extend_from_slice(px);
        }
    }
    t.with_values(h, w, out)
}

/// Rotates by `degrees` (counter-clockwise) and scales by `zoom` about the
/// image center, sampling bilinearly. Output pixels whose source falls
/// outside the image take the per-channel mean of the input.
pub fn resample_affine(t: &ImageTensor, degrees: f64, zoom: f64) -> ImageTensor {
    let (h, w) = (t.height(), t.width());
    let fill = t.channel_means();
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let dx = (x as f64 - cx) / zoom;
            let dy = (y as f64 - cy) / zoom;
            // Inverse rotation maps the output pixel back into the source.
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
            if sx < -EDGE_TOLERANCE
                || sy < -EDGE_TOLERANCE
                || sx > max_x + EDGE_TOLERANCE
                || sy > max_y + EDGE_TOLERANCE
            {
                out.extend_from_slice(&fill);
                continue;
            }
            let (sx, sy) = (sx.clamp(0.0, max_x), sy.clamp(0.0, max_y));
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let wx = (sx - x0 as f64) as f32;
            let wy = (sy - y0 as f64) as f32;
            for c in 0..3 {
                let top = t.at(y0, x0, c) * (1.0 - wx) + t.at(y0, x1, c) * wx;
                let bottom = t.at(y1, x0, c) * (1.0 - wx) + t.at(y1, x1, c) * wx;
                out.push(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    t.with_values(h, w, out)
}

/// Applies `spec` to `t`, consuming draws from `rng` in a fixed order:
/// rotation angle, zoom factor, flip coin, brightness offset, noise.
/// Disabled steps consume nothing.
pub fn augment<R: Rng + ?Sized>(t: &ImageTensor, spec: &AugmentationSpec, rng: &mut R) -> ImageTensor {
    if spec.is_identity() {
        return t.clone();
    }

    let angle = if spec.rotation_max_degrees > 0.0 {
        rng.random_range(-spec.rotation_max_degrees..=spec.rotation_max_degrees)
    } else {
        0.0
    };
    let zoom = if spec.zoom_range > 0.0 {
        rng.random_range(1.0 - spec.zoom_range..=1.0 + spec.zoom_range)
    } else {
        1.0
    };
    let mut out = if angle != 0.0 || zoom != 1.0 {
        resample_affine(t, angle, zoom)
    } else {
        t.clone()
    };

    if spec.horizontal_flip && rng.random_bool(0.5) {
        out = flip_horizontal(&out);
    }

    let (lo, hi) = out.normalization().range();
    if spec.brightness_jitter > 0.0 {
        let offset = rng.random_range(-spec.brightness_jitter..=spec.brightness_jitter) as f32 * (hi - lo);
        for v in out.values_mut() {
            *v += offset;
        }
    }

    if spec.gaussian_noise_stddev > 0.0 {
        let noise = Normal::new(0.0f64, spec.gaussian_noise_stddev).expect("validated stddev");
        for v in out.values_mut() {
            *v += noise.sample(rng) as f32;
        }
    }

    out.clip();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Normalization;
    use crate::rng;

    fn gradient_image() -> ImageTensor {
        let (h, w) = (16, 20);
        let values = (0..h * w * 3).map(|i| (i % 97) as f32 / 96.0).collect();
        ImageTensor::new(h, w, values, Normalization::Unit0To1).unwrap()
    }

    #[test]
    fn zero_spec_is_identity() {
        let t = gradient_image();
        let mut r = rng::stream(1, &[]);
        assert_eq!(augment(&t, &AugmentationSpec::identity(), &mut r), t);
    }

    #[test]
    fn flip_is_an_involution() {
        let t = gradient_image();
        let once = flip_horizontal(&t);
        assert_ne!(once, t);
        assert_eq!(flip_horizontal(&once), t);
        assert_eq!(once.at(3, 0, 1), t.at(3, t.width() - 1, 1));
    }

    #[test]
    fn affine_identity_reproduces_input() {
        let t = gradient_image();
        assert_eq!(resample_affine(&t, 0.0, 1.0), t);
    }

    #[test]
    fn rotation_fills_corners_with_mean() {
        let t = gradient_image();
        let rotated = resample_affine(&t, 45.0, 1.0);
        let mean = t.channel_means();
        for (c, m) in mean.iter().enumerate() {
            assert_eq!(rotated.at(0, 0, c), *m);
        }
        // 180° about the center maps (y, x) to (h-1-y, w-1-x).
        let half_turn = resample_affine(&t, 180.0, 1.0);
        for (y, x) in [(0, 0), (5, 7), (15, 19)] {
            let expected = t.at(t.height() - 1 - y, t.width() - 1 - x, 2);
            assert!((half_turn.at(y, x, 2) - expected).abs() < 1e-4);
        }
    }

    #[test]
    fn same_draw_state_same_output() {
        let t = gradient_image();
        let spec = AugmentationSpec {
            rotation_max_degrees: 15.0,
            zoom_range: 0.1,
            horizontal_flip: true,
            brightness_jitter: 0.1,
            gaussian_noise_stddev: 0.05,
            seed: 0,
        };
        let a = augment(&t, &spec, &mut rng::stream(9, &[1]));
        let b = augment(&t, &spec, &mut rng::stream(9, &[1]));
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.normalization(), t.normalization());
    }

    #[test]
    fn gaussian_noise_matches_declared_stddev() {
        let t = ImageTensor::filled(100, 100, [0.5; 3], Normalization::Unit0To1);
        let spec = AugmentationSpec {
            gaussian_noise_stddev: 0.1,
            ..AugmentationSpec::identity()
        };
        let out = augment(&t, &spec, &mut rng::stream(3, &[]));
        assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
        // Pixels pinned by clipping are excluded; at 5σ from both edges
        // essentially none are.
        let diffs: Vec<f64> = out
            .values()
            .iter()
            .zip(t.values())
            .filter(|(o, _)| **o > 0.0 && **o < 1.0)
            .map(|(o, i)| (*o - *i) as f64)
            .collect();
        assert!(diffs.len() >= 10_000);
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((sd - 0.1).abs() <= 0.02, "sample stddev {sd}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = AugmentationSpec {
            zoom_range: -0.1,
            ..AugmentationSpec::identity()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentationSpec {
            gaussian_noise_stddev: f64::INFINITY,
            ..AugmentationSpec::identity()
        };
        assert!(bad.validate().is_err());
        assert!(AugmentationSpec::rotation_zoom_flip(1).validate().is_ok());
    }
}
