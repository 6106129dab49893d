//! Convolutional feature extractors and the contract the head relies on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::{relu, Conv2d, ConvBlockSpec, FeatureMap};
use super::params::{Gradients, ParamStore};
use super::weights;
use crate::data::{ImageTensor, Normalization};
use crate::error::{Error, Result};
use crate::rng;

const INIT_STREAM: u64 = 0xb0b;

/// Layer layout of a backbone. Weights live separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneArch {
    pub name: String,
    /// (height, width) of the RGB input.
    pub input: (usize, usize),
    /// Intensity scheme the weights were trained with, if the backbone
    /// declares one.
    pub normalization: Option<Normalization>,
    pub blocks: Vec<ConvBlockSpec>,
}

impl BackboneArch {
    pub const TOY: &'static str = "toy_cnn";
    pub const MOBILENET_V2_SHAPE: &'static str = "mobilenet_v2_shape";

    pub fn known_names() -> &'static [&'static str] {
        &[Self::TOY, Self::MOBILENET_V2_SHAPE]
    }

    /// Three conv blocks taking 224×224×3 to a 7×7×64 feature map.
    pub fn toy() -> Self {
        BackboneArch {
            name: Self::TOY.into(),
            input: (224, 224),
            normalization: None,
            blocks: vec![
                ConvBlockSpec::new(16, 3, 4, 1),
                ConvBlockSpec::new(32, 3, 2, 1),
                ConvBlockSpec::new(64, 3, 4, 1),
            ],
        }
    }

    /// Five stride-2 blocks with MobileNetV2's input/output geometry
    /// (224×224×3 in, 7×7×1280 out, inputs in [-1, 1]).
    pub fn mobilenet_v2_shape() -> Self {
        BackboneArch {
            name: Self::MOBILENET_V2_SHAPE.into(),
            input: (224, 224),
            normalization: Some(Normalization::SymmetricNeg1To1),
            blocks: vec![
                ConvBlockSpec::new(16, 3, 2, 1),
                ConvBlockSpec::new(24, 3, 2, 1),
                ConvBlockSpec::new(32, 3, 2, 1),
                ConvBlockSpec::new(64, 3, 2, 1),
                ConvBlockSpec::new(1280, 3, 2, 1),
            ],
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            Self::TOY => Ok(Self::toy()),
            Self::MOBILENET_V2_SHAPE => Ok(Self::mobilenet_v2_shape()),
            other => Err(Error::Config(format!(
                "unknown backbone '{other}' (known: {})",
                Self::known_names().join(", ")
            ))),
        }
    }

    pub fn group_name(block: usize) -> String {
        format!("block{}", block + 1)
    }

    /// (height, width, channels) of the output feature map.
    pub fn feature_shape(&self) -> (usize, usize, usize) {
        let (mut h, mut w, mut c) = (self.input.0, self.input.1, ImageTensor::CHANNELS);
        for b in &self.blocks {
            h = (h + 2 * b.padding - b.kernel) / b.stride + 1;
            w = (w + 2 * b.padding - b.kernel) / b.stride + 1;
            c = b.out_channels;
        }
        (h, w, c)
    }

    /// Scheme images should be normalized with: the declared one, or
    /// unit_0_1 when the backbone declares none.
    pub fn resolved_normalization(&self) -> Normalization {
        self.normalization.unwrap_or(Normalization::Unit0To1)
    }
}

/// What a backbone promises to the rest of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneContract {
    pub name: String,
    pub expected_input: (usize, usize, usize),
    pub expected_normalization: Normalization,
    pub feature_shape: (usize, usize, usize),
    /// Earliest to latest.
    pub parameter_groups: Vec<String>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct BackboneTrace {
    /// `activations[0]` is the input; `activations[i + 1]` is block i's
    /// post-ReLU output.
    pub activations: Vec<FeatureMap>,
}

impl BackboneTrace {
    pub fn features(&self) -> &FeatureMap {
        self.activations.last().expect("trace holds the input at least")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBackbone {
    arch: BackboneArch,
    blocks: Vec<Conv2d>,
}

impl ConvBackbone {
    /// Registers the backbone's parameters in `store`, He-initialized from
    /// `init_seed`.
    pub fn build(arch: BackboneArch, store: &mut ParamStore, init_seed: u64) -> Self {
        let mut draw = rng::stream(init_seed, &[INIT_STREAM]);
        let mut in_channels = ImageTensor::CHANNELS;
        let blocks = arch
            .blocks
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let group = BackboneArch::group_name(i);
                let conv = Conv2d::new(store, &format!("{group}.conv"), &group, in_channels, *spec, &mut draw);
                in_channels = spec.out_channels;
                conv
            })
            .collect();
        ConvBackbone { arch, blocks }
    }

    pub fn arch(&self) -> &BackboneArch {
        &self.arch
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn contract(&self) -> BackboneContract {
        BackboneContract {
            name: self.arch.name.clone(),
            expected_input: (self.arch.input.0, self.arch.input.1, ImageTensor::CHANNELS),
            expected_normalization: self.arch.resolved_normalization(),
            feature_shape: self.arch.feature_shape(),
            parameter_groups: (0..self.blocks.len()).map(BackboneArch::group_name).collect(),
        }
    }

    /// Converts an interleaved image into the channel-major input map.
    pub fn input_map(image: &ImageTensor) -> FeatureMap {
        let (h, w) = (image.height(), image.width());
        let mut data = vec![0.0; 3 * h * w];
        for (i, px) in image.values().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * h * w + i] = px[c] as f64;
            }
        }
        FeatureMap {
            channels: 3,
            height: h,
            width: w,
            data,
        }
    }

    pub fn forward(&self, store: &ParamStore, input: FeatureMap) -> BackboneTrace {
        let mut activations = Vec::with_capacity(self.blocks.len() + 1);
        activations.push(input);
        for conv in &self.blocks {
            let mut out = conv.forward(store, activations.last().expect("non-empty"));
            for v in &mut out.data {
                *v = relu(*v);
            }
            activations.push(out);
        }
        BackboneTrace { activations }
    }

    /// Backpropagates `grad_features` through blocks
    /// `first_trainable..num_blocks`, accumulating their parameter gradients.
    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &BackboneTrace,
        grad_features: FeatureMap,
        grads: &mut Gradients,
        first_trainable: usize,
    ) {
        let mut grad = grad_features;
        for i in (first_trainable..self.blocks.len()).rev() {
            let out = &trace.activations[i + 1];
            for (g, a) in grad.data.iter_mut().zip(&out.data) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            match self.blocks[i].backward(store, &trace.activations[i], &grad, grads, i > first_trainable) {
                Some(next) => grad = next,
                None => break,
            }
        }
    }
}

/// A backbone together with its weights, ready to be assembled.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedBackbone {
    pub backbone: ConvBackbone,
    pub params: ParamStore,
}

impl PretrainedBackbone {
    /// Randomly initialized weights, used for tests and as the starting
    /// point when no artifact is configured.
    pub fn initialized(arch: BackboneArch, init_seed: u64) -> Self {
        let mut params = ParamStore::new();
        let backbone = ConvBackbone::build(arch, &mut params, init_seed);
        PretrainedBackbone { backbone, params }
    }

    /// Loads weights for the named architecture from a weight blob.
    pub fn load(name: &str, weights_path: &Path) -> Result<Self> {
        let arch = BackboneArch::named(name)?;
        let mut loaded = Self::initialized(arch, 0);
        let blob = weights::read_blob(weights_path)?;
        weights::assign(&mut loaded.params, &blob)?;
        Ok(loaded)
    }

    pub fn save(&self, weights_path: &Path) -> Result<()> {
        weights::write_blob(weights_path, &self.params)
    }

    pub fn contract(&self) -> BackboneContract {
        self.backbone.contract()
    }
}
