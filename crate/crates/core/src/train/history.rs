use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Monitor, ScheduleEntry};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::UnfreezeStage;

pub const METRICS_HEADER: &str = "epoch,train_loss,train_accuracy,val_loss,val_accuracy,stage";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// Absent when there is no validation or test stream to monitor.
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub active_stage: String,
}

impl EpochMetrics {
    pub fn monitored(&self, monitor: Monitor) -> Option<f64> {
        match monitor {
            Monitor::ValLoss => self.val_loss,
            Monitor::ValAccuracy => self.val_accuracy,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub entries: Vec<EpochMetrics>,
    pub stopped_early: bool,
    pub best_epoch: usize,
}

impl TrainingHistory {
    pub fn monitored_values(&self, monitor: Monitor) -> Option<Vec<f64>> {
        self.entries.iter().map(|e| e.monitored(monitor)).collect()
    }
}

/// Index of the best value, earliest on ties.
pub fn best_index(values: &[f64], monitor: Monitor) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if monitor.improves(*v, values[b], 0.0) => best = Some(i),
            _ => {}
        }
    }
    best
}

/// True once `patience` consecutive epochs have passed without beating the
/// running best by more than `min_delta`.
pub fn should_stop(values: &[f64], monitor: Monitor, patience: usize, min_delta: f64) -> bool {
    let Some(first) = values.first() else {
        return false;
    };
    let mut reference = *first;
    let mut reference_epoch = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if monitor.improves(*v, reference, min_delta) {
            reference = *v;
            reference_epoch = i;
        }
    }
    values.len() - 1 - reference_epoch >= patience
}

/// Early-stopping decision on a history. Histories without the monitored
/// value never stop.
pub fn early_stop_check(history: &TrainingHistory, monitor: Monitor, patience: usize, min_delta: f64) -> bool {
    history
        .monitored_values(monitor)
        .is_some_and(|v| should_stop(&v, monitor, patience, min_delta))
}

/// Stage of the schedule entry with the largest epoch not after `epoch`.
pub fn active_stage(schedule: &[ScheduleEntry], epoch: usize) -> Option<&UnfreezeStage> {
    schedule.iter().rev().find(|e| e.epoch <= epoch).map(|e| &e.stage)
}

fn push_real(line: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(line, "{v:.6}");
    }
}

pub fn metrics_csv(entries: &[EpochMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for e in entries {
        let _ = write!(out, "{},{:.6},{:.6},", e.epoch, e.train_loss, e.train_accuracy);
        push_real(&mut out, e.val_loss);
        out.push(',');
        push_real(&mut out, e.val_accuracy);
        out.push(',');
        out.push_str(&e.active_stage.replace(',', ";"));
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv(path: &Path, entries: &[EpochMetrics]) -> Result<()> {
    write_atomic(path, metrics_csv(entries).as_bytes())
}

pub fn read_history(path: &Path) -> Result<TrainingHistory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}
