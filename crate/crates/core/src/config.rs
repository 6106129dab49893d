//! Run configuration: one JSON document covering data, model, training and
//! evaluation. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{AugmentationSpec, Normalization, SplitFractions};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{BackboneArch, HeadConfig, InputAdapterPolicy};
use crate::render::PredictionGridSpec;
use crate::train::TrainingConfig;

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const MANIFEST_FILE: &str = "split_manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetLayout {
    /// `root/<class>/*`, split by fractions.
    Flat,
    /// `root/{train,validation,test}/<class>/*`, used as is.
    PreSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub root: PathBuf,
    pub layout: DatasetLayout,
    pub fractions: SplitFractions,
    pub seed: u64,
    /// Training-stream augmentation; absent means none.
    pub augmentation: Option<AugmentationSpec>,
    /// Split manifest to read or write. Defaults to
    /// `<output_dir>/split_manifest.json`.
    pub manifest: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            root: PathBuf::from("data"),
            layout: DatasetLayout::Flat,
            fractions: SplitFractions::default(),
            seed: 42,
            augmentation: None,
            manifest: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub backbone: String,
    /// Pre-trained weight blob; random initialization from `init_seed`
    /// when absent.
    pub weights: Option<PathBuf>,
    pub init_seed: u64,
    pub head: HeadConfig,
    pub adapter: InputAdapterPolicy,
    /// Absent means the backbone's declared scheme.
    pub normalization: Option<Normalization>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            backbone: BackboneArch::MOBILENET_V2_SHAPE.into(),
            weights: None,
            init_seed: 0,
            head: HeadConfig::default(),
            adapter: InputAdapterPolicy::default(),
            normalization: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub threshold: f64,
    pub grid: PredictionGridSpec,
    /// Images shown in the evaluation grid.
    pub grid_limit: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            threshold: 0.5,
            grid: PredictionGridSpec::default(),
            grid_limit: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            evaluation: EvaluationConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the current directory, like paths given on the command line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.data.fractions.validate()?;
        if let Some(a) = &self.data.augmentation {
            a.validate()?;
        }
        let arch = BackboneArch::named(&self.model.backbone)?;
        self.model.head.validate()?;
        self.model.adapter.validate()?;
        if self.model.adapter.target != arch.input {
            return Err(Error::Config(format!(
                "model.adapter.target {:?} does not match backbone '{}' input {:?}",
                self.model.adapter.target, arch.name, arch.input
            )));
        }
        if self.model.normalization == Some(Normalization::Raw0To255) {
            return Err(Error::Config("model.normalization cannot be raw_0_255".into()));
        }
        self.training.validate()?;
        if !self.evaluation.threshold.is_finite() {
            return Err(Error::Config("evaluation.threshold must be finite".into()));
        }
        self.evaluation.grid.validate()
    }

    /// Copy with defaults made explicit and checked.
    pub fn resolved(&self) -> Result<Self> {
        self.validate()?;
        let mut out = self.clone();
        let arch = BackboneArch::named(&self.model.backbone)?;
        out.model.normalization = Some(self.model.normalization.unwrap_or(arch.resolved_normalization()));
        if out.data.manifest.is_none() {
            out.data.manifest = Some(self.output_dir.join(MANIFEST_FILE));
        }
        Ok(out)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.data.manifest.clone().unwrap_or_else(|| self.output_dir.join(MANIFEST_FILE))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        write_atomic(&path, self.to_json().as_bytes())?;
        Ok(path)
    }
}
