//! The `ember` command-line tool: `split`, `train`, `evaluate`, `predict`.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{DatasetLayout, RunConfig};
use crate::data::{
    decode_image, is_allowed_extension, load_manifest, scan_dataset, scan_presplit, split_dataset, write_manifest,
    ImageRecord, Split, SplitAssignment,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvaluationReport};
use crate::fsutil::DirLock;
use crate::model::{BackboneArch, ClassifierModel, PretrainedBackbone};
use crate::render::{render_grid, save_png, write_evaluation_plots, write_training_curves, GridCell, PredictionGridSpec};
use crate::train::{load_checkpoint, save_checkpoint, train_with, write_metrics_csv, TrainingHistory};

pub const METRICS_FILE: &str = "metrics.csv";
pub const HISTORY_FILE: &str = "history.json";
pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const GRID_FILE: &str = "predictions_grid.png";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const BEST_CHECKPOINT: &str = "best";
pub const FINAL_CHECKPOINT: &str = "final";

#[derive(Debug, Parser)]
#[command(name = "ember", version, about = "Transfer-learning wildfire image classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a flat dataset and write the split manifest.
    Split(CommonArgs),
    /// Fine-tune a model and write checkpoints, metrics.csv and curves.
    Train(CommonArgs),
    /// Evaluate a checkpoint on the test split.
    Evaluate(CommonArgs),
    /// Label individual images with a checkpoint.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory, overriding the config's output_dir.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Decision threshold for the positive class.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Seed for splitting and training.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grid columns.
    #[arg(long, default_value_t = 4)]
    pub columns: usize,
    /// Images or directories of images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

impl CommonArgs {
    /// Loads the config (or defaults) and applies command-line overrides.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.output {
            cfg.output_dir = out.clone();
        }
        if let Some(t) = self.threshold {
            cfg.evaluation.threshold = t;
        }
        if let Some(seed) = self.seed {
            cfg.data.seed = seed;
            cfg.training.seed = seed;
        }
        cfg.resolved()
    }
}

/// Creates the output directory, takes its lock and records the resolved
/// config.
fn prepare_output(cfg: &RunConfig) -> Result<DirLock> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let lock = DirLock::acquire(&cfg.output_dir)?;
    cfg.write_resolved(&cfg.output_dir)?;
    Ok(lock)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSummary {
    pub manifest: PathBuf,
    pub class_names: Vec<String>,
    /// `counts[class][split]` in train, validation, test order.
    pub counts: Vec<[usize; 3]>,
}

impl SplitSummary {
    fn from_assignment(manifest: PathBuf, class_names: Vec<String>, splits: &SplitAssignment) -> Self {
        let mut counts = vec![[0usize; 3]; class_names.len()];
        for (s, split) in Split::ALL.iter().enumerate() {
            for r in splits.get(*split) {
                counts[r.label_index][s] += 1;
            }
        }
        SplitSummary {
            manifest,
            class_names,
            counts,
        }
    }
}

impl fmt::Display for SplitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>8} {:>10} {:>8}", "class", "train", "validation", "test")?;
        for (name, c) in self.class_names.iter().zip(&self.counts) {
            writeln!(f, "{name:<12} {:>8} {:>10} {:>8}", c[0], c[1], c[2])?;
        }
        write!(f, "manifest written to {}", self.manifest.display())
    }
}

fn split_flat(cfg: &RunConfig) -> Result<(SplitAssignment, Vec<String>)> {
    let index = scan_dataset(&cfg.data.root)?;
    let splits = split_dataset(&index, cfg.data.fractions, cfg.data.seed)?;
    write_manifest(&splits, &cfg.data.root, &cfg.manifest_path())?;
    Ok((splits, index.class_names))
}

/// Splits for a run: the pre-split layout, an existing manifest, or a fresh
/// split (which is then written as the manifest).
pub fn load_splits(cfg: &RunConfig) -> Result<(SplitAssignment, Vec<String>)> {
    match cfg.data.layout {
        DatasetLayout::PreSplit => scan_presplit(&cfg.data.root),
        DatasetLayout::Flat => {
            let manifest = cfg.manifest_path();
            if manifest.exists() {
                load_manifest(&manifest, &cfg.data.root)
            } else {
                split_flat(cfg)
            }
        }
    }
}

pub fn cmd_split(cfg: &RunConfig) -> Result<SplitSummary> {
    let _lock = prepare_output(cfg)?;
    let (splits, class_names) = match cfg.data.layout {
        DatasetLayout::Flat => split_flat(cfg)?,
        DatasetLayout::PreSplit => {
            let (splits, names) = scan_presplit(&cfg.data.root)?;
            write_manifest(&splits, &cfg.data.root, &cfg.manifest_path())?;
            (splits, names)
        }
    };
    Ok(SplitSummary::from_assignment(cfg.manifest_path(), class_names, &splits))
}

/// A freshly assembled model as described by the config.
pub fn build_model(cfg: &RunConfig, class_names: Vec<String>) -> Result<ClassifierModel> {
    let m = &cfg.model;
    let backbone = match &m.weights {
        Some(path) => PretrainedBackbone::load(&m.backbone, path)?,
        None => PretrainedBackbone::initialized(BackboneArch::named(&m.backbone)?, m.init_seed),
    };
    let mut model = ClassifierModel::assemble(backbone, m.head, m.adapter, m.init_seed)?;
    model.set_class_names(class_names)?;
    if let Some(n) = m.normalization {
        model.set_normalization(n);
    }
    Ok(model)
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub history: TrainingHistory,
    pub best_checkpoint: PathBuf,
    pub final_checkpoint: PathBuf,
}

pub fn checkpoint_path(cfg: &RunConfig, which: &str) -> PathBuf {
    cfg.output_dir.join(CHECKPOINT_DIR).join(which)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let _lock = prepare_output(cfg)?;
    let (splits, class_names) = load_splits(cfg)?;
    let model = build_model(cfg, class_names)?;
    let metrics_path = cfg.output_dir.join(METRICS_FILE);
    write_metrics_csv(&metrics_path, &[])?;
    let outcome = train_with(model, &splits, &cfg.training, cfg.data.augmentation, |history| {
        write_metrics_csv(&metrics_path, &history.entries)
    })?;
    let history = outcome.history;
    let best = checkpoint_path(cfg, BEST_CHECKPOINT);
    let last = checkpoint_path(cfg, FINAL_CHECKPOINT);
    save_checkpoint(&outcome.best, &history, &best)?;
    save_checkpoint(&outcome.model, &history, &last)?;
    write_metrics_csv(&metrics_path, &history.entries)?;
    let hist_json = serde_json::to_string_pretty(&history).expect("history serializes") + "\n";
    crate::fsutil::write_atomic(&cfg.output_dir.join(HISTORY_FILE), hist_json.as_bytes())?;
    write_training_curves(&history, &cfg.output_dir)?;
    Ok(TrainSummary {
        history,
        best_checkpoint: best,
        final_checkpoint: last,
    })
}

fn grid_cells(model: &ClassifierModel, report: &EvaluationReport, limit: usize) -> Vec<GridCell> {
    report
        .per_image
        .iter()
        .take(limit)
        .map(|row| {
            let image = decode_image(&row.path).ok().map(|t| t.to_rgb8());
            let positive = row.predicted_label.as_deref() == Some(model.positive_class_name());
            GridCell {
                image,
                label: row.predicted_label.clone().unwrap_or_else(|| "unreadable".into()),
                score: row.score,
                positive,
                correct: row.predicted_label.as_ref().map(|p| *p == row.true_label),
            }
        })
        .collect()
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<EvaluationReport> {
    let _lock = prepare_output(cfg)?;
    let ckpt = checkpoint.map_or_else(|| checkpoint_path(cfg, BEST_CHECKPOINT), Path::to_path_buf);
    let (model, _) = load_checkpoint(&ckpt)?;
    let (splits, class_names) = load_splits(cfg)?;
    if class_names != model.class_names() {
        return Err(Error::Config(format!(
            "dataset classes {class_names:?} differ from the checkpoint's {:?}",
            model.class_names()
        )));
    }
    if splits.test.is_empty() {
        return Err(Error::Dataset("the test split is empty".into()));
    }
    let report = evaluate(&model, &splits.test, cfg.evaluation.threshold)?;
    report.write_json(&cfg.output_dir.join(crate::cli::REPORT_FILE))?;
    report.write_predictions_csv(&cfg.output_dir.join(PREDICTIONS_FILE))?;
    let rendered = EvaluationReport::read_json(&cfg.output_dir.join(REPORT_FILE))?;
    write_evaluation_plots(&rendered, &cfg.output_dir)?;
    let cells = grid_cells(&model, &rendered, cfg.evaluation.grid_limit.max(1));
    write_grid(&cells, &cfg.evaluation.grid, &cfg.output_dir.join(GRID_FILE))?;
    Ok(report)
}

/// Writes grid pages to `path`, or `stem_page<N>.png` siblings when there
/// is more than one page.
pub fn write_grid(cells: &[GridCell], spec: &PredictionGridSpec, path: &Path) -> Result<Vec<PathBuf>> {
    let pages = render_grid(cells, spec)?;
    if pages.len() == 1 {
        save_png(&pages[0], path)?;
        return Ok(vec![path.to_path_buf()]);
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    pages
        .iter()
        .enumerate()
        .map(|(i, page)| {
            let p = path.with_file_name(format!("{stem}_page{}.png", i + 1));
            save_png(page, &p).map(|_| p)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub path: PathBuf,
    pub label: String,
    pub score: f64,
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{:.6}", self.path.display(), self.label, self.score)
    }
}

#[derive(Clone, Debug)]
pub struct PredictOutcome {
    pub predictions: Vec<Prediction>,
    /// Inputs that could not be used, with the reason.
    pub failures: Vec<(PathBuf, String)>,
    pub grid: Vec<PathBuf>,
}

/// Files named directly plus supported images inside named directories
/// (sorted, not recursive).
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_allowed_extension(p))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

pub fn cmd_predict(
    checkpoint: &Path,
    inputs: &[PathBuf],
    threshold: f64,
    grid: &PredictionGridSpec,
    output: Option<&Path>,
) -> Result<PredictOutcome> {
    let _lock = match output {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some(DirLock::acquire(dir)?)
        }
        None => None,
    };
    let (model, _) = load_checkpoint(checkpoint)?;
    let files = expand_inputs(inputs)?;
    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    for path in files {
        let record = ImageRecord {
            path: path.clone(),
            label: String::new(),
            label_index: 0,
        };
        let prepared = if is_allowed_extension(&path) {
            model.loader_settings().prepare(&record)
        } else {
            Err(Error::Load {
                path: path.clone(),
                reason: "unsupported file extension".into(),
            })
        };
        match prepared.and_then(|t| model.predict_images(&[t])) {
            Ok(probs) => {
                let score = model.positive_score(&probs[0]);
                let class = model.predicted_class(&probs[0], threshold);
                let label = model.class_names()[class].clone();
                cells.push(GridCell {
                    image: decode_image(&path).ok().map(|t| t.to_rgb8()),
                    label: label.clone(),
                    score: Some(score),
                    positive: class == model.positive_class(),
                    correct: None,
                });
                predictions.push(Prediction { path, label, score });
            }
            Err(e) => {
                cells.push(GridCell {
                    image: None,
                    label: "unreadable".into(),
                    score: None,
                    positive: false,
                    correct: None,
                });
                failures.push((path, e.to_string()));
            }
        }
    }
    if predictions.is_empty() {
        return Err(Error::Dataset("none of the inputs could be decoded".into()));
    }
    let grid_paths = match output {
        Some(dir) => write_grid(&cells, grid, &dir.join(GRID_FILE))?,
        None => Vec::new(),
    };
    Ok(PredictOutcome {
        predictions,
        failures,
        grid: grid_paths,
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Split(args) => {
            let summary = cmd_split(&args.run_config()?)?;
            println!("{summary}");
        }
        Command::Train(args) => {
            let cfg = args.run_config()?;
            let summary = cmd_train(&cfg)?;
            let h = &summary.history;
            println!(
                "trained {} epochs (best epoch {}{}); checkpoints in {}",
                h.entries.len(),
                h.best_epoch,
                if h.stopped_early { ", stopped early" } else { "" },
                cfg.output_dir.join(CHECKPOINT_DIR).display()
            );
        }
        Command::Evaluate(args) => {
            let cfg = args.run_config()?;
            let report = cmd_evaluate(&cfg, args.checkpoint.as_deref())?;
            println!(
                "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  auc {}",
                report.accuracy,
                report.precision,
                report.recall,
                report.f1,
                report.auc.map_or("n/a".into(), |a| format!("{a:.4}"))
            );
            if report.error_count > 0 {
                eprintln!("{} image(s) could not be read", report.error_count);
            }
        }
        Command::Predict(args) => {
            let checkpoint = args
                .common
                .checkpoint
                .clone()
                .ok_or_else(|| Error::Usage("predict needs --checkpoint".into()))?;
            let threshold = match (&args.common.config, args.common.threshold) {
                (_, Some(t)) => t,
                (Some(_), None) => args.common.run_config()?.evaluation.threshold,
                (None, None) => 0.5,
            };
            let spec = PredictionGridSpec {
                columns: args.columns,
                ..PredictionGridSpec::default()
            };
            let outcome = cmd_predict(&checkpoint, &args.inputs, threshold, &spec, args.common.output.as_deref())?;
            for p in &outcome.predictions {
                println!("{p}");
            }
            for (path, reason) in &outcome.failures {
                eprintln!("{}: {reason}", path.display());
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
