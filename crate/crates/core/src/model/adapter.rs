use serde::{Deserialize, Serialize};

use crate::data::{resize_bilinear, ImageTensor};
use crate::error::{Error, Result};

pub const MIN_TARGET_SIDE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    /// Stretch to the target size.
    Resize,
    /// Scale until the target is covered, then cut the centered window.
    CenterCrop,
    /// Scale until the image fits, then center it between mean-filled bands.
    PadToFit,
}

/// How arbitrary-size images are brought to a backbone's input size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputAdapterPolicy {
    pub policy: AdapterKind,
    /// (height, width)
    pub target: (usize, usize),
}

impl Default for InputAdapterPolicy {
    fn default() -> Self {
        InputAdapterPolicy::resize(224, 224)
    }
}

impl InputAdapterPolicy {
    pub fn resize(height: usize, width: usize) -> Self {
        InputAdapterPolicy {
            policy: AdapterKind::Resize,
            target: (height, width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.target;
        if h < MIN_TARGET_SIDE || w < MIN_TARGET_SIDE {
            return Err(Error::Config(format!(
                "adapter target {h}×{w} is smaller than {MIN_TARGET_SIDE}×{MIN_TARGET_SIDE}"
            )));
        }
        Ok(())
    }
}

/// Size of the intermediate rescaled image before cropping or padding.
/// Crop sizes cover the target, pad sizes fit inside it.
fn scaled_size(height: usize, width: usize, policy: &InputAdapterPolicy) -> (usize, usize) {
    let (th, tw) = policy.target;
    let (h, w) = (height as f64, width as f64);
    match policy.policy {
        AdapterKind::Resize => (th, tw),
        AdapterKind::CenterCrop => {
            let scale = (th as f64 / h).max(tw as f64 / w);
            (
                ((h * scale).round() as usize).max(th),
                ((w * scale).round() as usize).max(tw),
            )
        }
        AdapterKind::PadToFit => {
            let scale = (th as f64 / h).min(tw as f64 / w);
            (
                ((h * scale).round() as usize).clamp(1, th),
                ((w * scale).round() as usize).clamp(1, tw),
            )
        }
    }
}

/// Brings `t` to `policy.target`, keeping its normalization state.
pub fn adapt_input(t: &ImageTensor, policy: &InputAdapterPolicy) -> Result<ImageTensor> {
    policy.validate()?;
    let (th, tw) = policy.target;
    if t.height() == th && t.width() == tw {
        return Ok(t.clone());
    }
    let (sh, sw) = scaled_size(t.height(), t.width(), policy);
    let out = match policy.policy {
        AdapterKind::Resize => resize_bilinear(t, th, tw),
        AdapterKind::CenterCrop => {
            let scaled = resize_bilinear(t, sh, sw);
            let top = (sh - th) / 2;
            let left = (sw - tw) / 2;
            let mut values = Vec::with_capacity(th * tw * 3);
            for y in top..top + th {
                let start = (y * sw + left) * 3;
                values.extend_from_slice(&scaled.values()[start..start + tw * 3]);
            }
            ImageTensor::new(th, tw, values, t.normalization())?
        }
        AdapterKind::PadToFit => {
            let scaled = resize_bilinear(t, sh, sw);
            let fill = scaled.channel_means();
            // Odd padding puts the extra row/column at the bottom/right.
            let top = (th - sh) / 2;
            let left = (tw - sw) / 2;
            let mut values: Vec<f32> = fill.iter().copied().cycle().take(th * tw * 3).collect();
            for y in 0..sh {
                let src = &scaled.values()[y * sw * 3..(y + 1) * sw * 3];
                let dst = ((y + top) * tw + left) * 3;
                values[dst..dst + sw * 3].copy_from_slice(src);
            }
            ImageTensor::new(th, tw, values, t.normalization())?
        }
    };
    Ok(out)
}
