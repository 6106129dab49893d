use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::UnfreezeStage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    ValLoss,
    ValAccuracy,
}

impl Monitor {
    /// Whether `candidate` beats `reference` by more than `min_delta`.
    pub fn improves(self, candidate: f64, reference: f64, min_delta: f64) -> bool {
        match self {
            Monitor::ValLoss => candidate < reference - min_delta,
            Monitor::ValAccuracy => candidate > reference + min_delta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EarlyStopping {
    pub enabled: bool,
    pub monitor: Monitor,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping {
            enabled: false,
            monitor: Monitor::ValLoss,
            patience: 10,
            min_delta: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub epoch: usize,
    pub stage: UnfreezeStage,
}

impl ScheduleEntry {
    pub fn new(epoch: usize, stage: UnfreezeStage) -> Self {
        ScheduleEntry { epoch, stage }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerConfig,
    pub early_stopping: EarlyStopping,
    pub unfreeze_schedule: Vec<ScheduleEntry>,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-5,
            optimizer: OptimizerConfig::default(),
            early_stopping: EarlyStopping::default(),
            unfreeze_schedule: vec![ScheduleEntry::new(0, UnfreezeStage::HeadOnly)],
            seed: 42,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("training.epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("training.batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "training.learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        let opt = &self.optimizer;
        if !(0.0..1.0).contains(&opt.beta1) || !(0.0..1.0).contains(&opt.beta2) {
            return Err(Error::Config("optimizer betas must be in [0, 1)".into()));
        }
        if opt.epsilon.is_nan() || opt.epsilon <= 0.0 {
            return Err(Error::Config("optimizer epsilon must be positive".into()));
        }
        let es = &self.early_stopping;
        if es.enabled && es.patience < 1 {
            return Err(Error::Config("early_stopping.patience must be >= 1 when enabled".into()));
        }
        if !(es.min_delta >= 0.0 && es.min_delta.is_finite()) {
            return Err(Error::Config("early_stopping.min_delta must be >= 0".into()));
        }
        match self.unfreeze_schedule.first() {
            None => return Err(Error::Config("unfreeze_schedule must not be empty".into())),
            Some(first) if first.epoch != 0 => {
                return Err(Error::Config(format!(
                    "unfreeze_schedule must start at epoch 0, starts at {}",
                    first.epoch
                )))
            }
            _ => {}
        }
        if let Some(w) = self.unfreeze_schedule.windows(2).find(|w| w[1].epoch <= w[0].epoch) {
            return Err(Error::Config(format!(
                "unfreeze_schedule epochs must strictly increase ({} then {})",
                w[0].epoch, w[1].epoch
            )));
        }
        Ok(())
    }
}
