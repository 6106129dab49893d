use super::config::TrainingConfig;
use super::history::{active_stage, best_index, early_stop_check, EpochMetrics, TrainingHistory};
use super::optim::Adam;
use crate::data::{AugmentationSpec, BatchLoader, ImageRecord, SplitAssignment};
use crate::error::{Error, Result};
use crate::model::{ClassifierModel, HEAD_GROUP};
use crate::rng;

const DROPOUT_STREAM: u64 = 0xd0;

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters after the last completed epoch.
    pub model: ClassifierModel,
    /// Parameters at `history.best_epoch`.
    pub best: ClassifierModel,
    pub history: TrainingHistory,
}

/// Loss and accuracy of a record stream in inference mode.
pub fn evaluate_stream(model: &ClassifierModel, records: &[ImageRecord], batch_size: usize) -> Result<(f64, f64)> {
    let loader = BatchLoader::new(records, batch_size, false, 0, None, model.loader_settings())?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for batch in loader.epoch(0) {
        let batch = batch?;
        let probs = model.predict_proba(&batch)?;
        for (p, &label) in probs.iter().zip(&batch.labels) {
            loss += model.head().sample_loss(p, &model.target_for(label)).0;
            if model.predicted_class(p, 0.5) == label {
                correct += 1;
            }
        }
    }
    let n = records.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train(
    model: ClassifierModel,
    splits: &SplitAssignment,
    cfg: &TrainingConfig,
    augmentation: Option<AugmentationSpec>,
) -> Result<TrainOutcome> {
    train_with(model, splits, cfg, augmentation, |_| Ok(()))
}

/// Runs the fine-tuning loop. `on_epoch` sees the history after every
/// completed epoch and may abort the run by returning an error.
pub fn train_with(
    mut model: ClassifierModel,
    splits: &SplitAssignment,
    cfg: &TrainingConfig,
    augmentation: Option<AugmentationSpec>,
    mut on_epoch: impl FnMut(&TrainingHistory) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::Config("the training split is empty".into()));
    }
    let monitor_records = splits.monitor_stream();
    let es = cfg.early_stopping;
    if es.enabled && monitor_records.is_empty() {
        return Err(Error::Config(
            "early stopping needs a non-empty validation or test split".into(),
        ));
    }
    let groups = model.contract().parameter_groups;
    for entry in &cfg.unfreeze_schedule {
        entry.stage.resolve(&groups, HEAD_GROUP)?;
    }

    let loader = BatchLoader::new(
        &splits.train,
        cfg.batch_size,
        true,
        cfg.seed,
        augmentation,
        model.loader_settings(),
    )?;
    let mut adam = Adam::new(cfg.learning_rate, &cfg.optimizer, model.params());
    let mut history = TrainingHistory::default();
    let mut best = model.clone();

    for epoch in 0..cfg.epochs {
        let stage = active_stage(&cfg.unfreeze_schedule, epoch).expect("schedule starts at epoch 0");
        if stage != model.stage() {
            log::info!("epoch {epoch}: switching to stage {stage}");
            model.set_trainability(stage.clone())?;
        }
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for (b, batch) in loader.epoch(epoch).enumerate() {
            let batch = batch?;
            let dropout_seed = rng::derive_seed(cfg.seed, &[DROPOUT_STREAM, epoch as u64, b as u64]);
            let out = model.forward_backward(&batch.images, &batch.labels, dropout_seed)?;
            if !out.loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: b,
                    reason: format!("loss is {}", out.loss),
                });
            }
            if !out.grads.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: b,
                    reason: "non-finite gradient".into(),
                });
            }
            adam.step_model(&mut model, &out.grads);
            loss_sum += out.loss * out.count as f64;
            correct += out.correct;
            seen += out.count;
        }
        let (val_loss, val_accuracy) = if monitor_records.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate_stream(&model, monitor_records, cfg.batch_size)?;
            if !l.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: loader.num_batches(),
                    reason: format!("validation loss is {l}"),
                });
            }
            (Some(l), Some(a))
        };
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_loss,
            val_accuracy,
            active_stage: model.stage().to_string(),
        };
        log::info!(
            "epoch {epoch}: train_loss {:.4} train_acc {:.4} val_loss {} val_acc {}",
            metrics.train_loss,
            metrics.train_accuracy,
            val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            val_accuracy.map_or("-".into(), |v| format!("{v:.4}")),
        );
        history.entries.push(metrics);

        history.best_epoch = match history.monitored_values(es.monitor) {
            Some(values) => best_index(&values, es.monitor).expect("non-empty history"),
            None => epoch,
        };
        if history.best_epoch == epoch {
            best = model.clone();
        }
        on_epoch(&history)?;
        if es.enabled && early_stop_check(&history, es.monitor, es.patience, es.min_delta) {
            log::info!("early stopping after epoch {epoch} (best epoch {})", history.best_epoch);
            history.stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome { model, best, history })
}
