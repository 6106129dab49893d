//! Checkpoint directories: `weights.bin`, `model.json` and `history.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::history::TrainingHistory;
use crate::data::Normalization;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{weights, BackboneArch, ClassifierModel, HeadConfig, InputAdapterPolicy, PretrainedBackbone, UnfreezeStage};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const SIDECAR_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.json";

/// Metadata stored next to the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSidecar {
    pub format_version: u32,
    pub backbone: String,
    pub head: HeadConfig,
    pub adapter: InputAdapterPolicy,
    pub normalization: Normalization,
    pub class_names: Vec<String>,
    pub positive_class: String,
    pub stage: UnfreezeStage,
}

impl ModelSidecar {
    pub fn describe(model: &ClassifierModel) -> Self {
        ModelSidecar {
            format_version: CHECKPOINT_FORMAT_VERSION,
            backbone: model.contract().name,
            head: *model.head_config(),
            adapter: *model.adapter(),
            normalization: model.normalization(),
            class_names: model.class_names().to_vec(),
            positive_class: model.positive_class_name().to_string(),
            stage: model.stage().clone(),
        }
    }
}

fn staging_path(dir: &Path) -> PathBuf {
    let mut name = dir.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp-{}", std::process::id()));
    dir.with_file_name(name)
}

/// Writes the checkpoint into a sibling staging directory and renames it
/// into place, replacing any previous checkpoint at `dir`.
pub fn save_checkpoint(model: &ClassifierModel, history: &TrainingHistory, dir: &Path) -> Result<()> {
    let staging = staging_path(dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    weights::write_blob(&staging.join(WEIGHTS_FILE), model.params())?;
    let sidecar = serde_json::to_string_pretty(&ModelSidecar::describe(model)).expect("sidecar serializes");
    write_atomic(&staging.join(SIDECAR_FILE), format!("{sidecar}\n").as_bytes())?;
    let hist = serde_json::to_string_pretty(history).expect("history serializes");
    write_atomic(&staging.join(HISTORY_FILE), format!("{hist}\n").as_bytes())?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
}

pub fn read_sidecar(dir: &Path) -> Result<ModelSidecar> {
    let path = dir.join(SIDECAR_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let version = value.get("format_version").and_then(serde_json::Value::as_u64);
    if version != Some(CHECKPOINT_FORMAT_VERSION as u64) {
        return Err(Error::Checkpoint(format!(
            "{} has format_version {}, expected {CHECKPOINT_FORMAT_VERSION}",
            path.display(),
            version.map_or("(missing)".to_string(), |v| v.to_string())
        )));
    }
    serde_json::from_value(value).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(dir: &Path) -> Result<(ClassifierModel, TrainingHistory)> {
    let sidecar = read_sidecar(dir)?;
    let arch = BackboneArch::named(&sidecar.backbone)
        .map_err(|_| Error::Checkpoint(format!("checkpoint references unknown backbone '{}'", sidecar.backbone)))?;
    let mut model = ClassifierModel::assemble(PretrainedBackbone::initialized(arch, 0), sidecar.head, sidecar.adapter, 0)
        .map_err(|e| Error::Checkpoint(format!("cannot rebuild model: {e}")))?;
    model.set_class_names(sidecar.class_names.clone())?;
    if model.positive_class_name() != sidecar.positive_class {
        return Err(Error::Checkpoint(format!(
            "positive class '{}' does not match class names {:?}",
            sidecar.positive_class, sidecar.class_names
        )));
    }
    model.set_normalization(sidecar.normalization);
    model.set_trainability(sidecar.stage)?;
    model.load_params(&weights::read_blob(&dir.join(WEIGHTS_FILE))?)?;
    let history = super::history::read_history(&dir.join(HISTORY_FILE))
        .map_err(|e| Error::Checkpoint(format!("cannot read training history: {e}")))?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ImageTensor;

    fn model() -> ClassifierModel {
        let backbone = PretrainedBackbone::initialized(BackboneArch::toy(), 5);
        ClassifierModel::assemble(backbone, HeadConfig::default(), InputAdapterPolicy::default(), 6).unwrap()
    }

    #[test]
    fn round_trip_predicts_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("best");
        let mut m = model();
        m.set_trainability(UnfreezeStage::LastBlocks(1)).unwrap();
        save_checkpoint(&m, &TrainingHistory::default(), &ckpt).unwrap();
        save_checkpoint(&m, &TrainingHistory::default(), &ckpt).unwrap();
        let (loaded, history) = load_checkpoint(&ckpt).unwrap();
        assert_eq!(history, TrainingHistory::default());
        assert_eq!(ModelSidecar::describe(&loaded), ModelSidecar::describe(&m));
        let img = ImageTensor::filled(224, 224, [0.2, 0.4, 0.8], m.normalization());
        let a = m.predict_images(std::slice::from_ref(&img)).unwrap();
        let b = loaded.predict_images(&[img]).unwrap();
        assert_eq!(a[0][0].to_bits(), b[0][0].to_bits());
    }

    #[test]
    fn empty_directory_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn unknown_backbone_and_version_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("c");
        save_checkpoint(&model(), &TrainingHistory::default(), &ckpt).unwrap();
        let sidecar = ckpt.join(SIDECAR_FILE);
        let text = fs::read_to_string(&sidecar).unwrap();
        fs::write(&sidecar, text.replace("toy_cnn", "vgg_huge")).unwrap();
        let err = load_checkpoint(&ckpt).unwrap_err();
        assert!(err.to_string().contains("vgg_huge"), "{err}");
        fs::write(&sidecar, text.replace("\"format_version\": 1", "\"format_version\": 7")).unwrap();
        let err = load_checkpoint(&ckpt).unwrap_err();
        assert!(err.to_string().contains("format_version 7"), "{err}");
    }
}
