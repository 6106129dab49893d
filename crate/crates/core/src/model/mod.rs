//! Backbone + classification head assembly, parameter groups and inference.

mod adapter;
mod backbone;
mod classifier;
mod head;
mod layers;
mod params;
mod stage;
pub mod weights;

pub use self::adapter::{adapt_input, AdapterKind, InputAdapterPolicy, MIN_TARGET_SIDE};
pub use self::backbone::{BackboneArch, BackboneContract, BackboneTrace, ConvBackbone, PretrainedBackbone};
pub use self::classifier::{ClassifierModel, StepOutput, DEFAULT_POSITIVE_CLASS};
pub use self::head::{Head, HeadConfig, HeadMode, HeadTrace, HEAD_GROUP};
pub use self::layers::{Conv2d, ConvBlockSpec, Dense, FeatureMap};
pub use self::params::{Gradients, Param, ParamId, ParamStore};
pub use self::stage::UnfreezeStage;
