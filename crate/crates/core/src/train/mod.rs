//! Fine-tuning loop: loss, optimizer, early stopping, unfreeze schedules and
//! checkpoints.

mod checkpoint;
mod config;
mod history;
pub mod loss;
mod optim;
mod trainer;

pub use self::checkpoint::{
    load_checkpoint, read_sidecar, save_checkpoint, ModelSidecar, CHECKPOINT_FORMAT_VERSION, HISTORY_FILE,
    SIDECAR_FILE, WEIGHTS_FILE,
};
pub use self::config::{EarlyStopping, Monitor, OptimizerConfig, OptimizerKind, ScheduleEntry, TrainingConfig};
pub use self::history::{
    active_stage, best_index, early_stop_check, metrics_csv, read_history, should_stop, write_metrics_csv,
    EpochMetrics, TrainingHistory, METRICS_HEADER,
};
pub use self::loss::{binary_cross_entropy, binary_cross_entropy_grad};
pub use self::optim::Adam;
pub use self::trainer::{evaluate_stream, train, train_with, TrainOutcome};
