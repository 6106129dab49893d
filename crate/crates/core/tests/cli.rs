mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ember::eval::{confusion_matrix, derived_metrics, EvaluationReport};
use ember::model::{BackboneArch, PretrainedBackbone};

fn ember(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ember"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Run {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    out: PathBuf,
}

impl Run {
    fn config_str(&self) -> &str {
        self.config.to_str().unwrap()
    }
}

fn setup(per_class: usize, extra: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let root = common::red_green_dataset(&dir.path().join("data"), per_class, 40);
    let out = dir.path().join("run");
    let config = dir.path().join("config.json");
    let text = format!(
        r#"{{
  "data": {{"root": {root:?}, "fractions": {{"train": 0.8, "validation": 0.0, "test": 0.2}}, "seed": 5}},
  "model": {{"backbone": "toy_cnn", "init_seed": 3 {extra}}},
  "training": {{"epochs": 2, "batch_size": 4, "learning_rate": 0.001, "seed": 5}},
  "output_dir": {out:?}
}}"#
    );
    std::fs::write(&config, text).unwrap();
    Run {
        _dir: dir,
        root,
        config,
        out,
    }
}

fn assert_ok(out: &Output) {
    assert_eq!(
        code(out),
        0,
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn png_dims(path: &Path) -> (u32, u32) {
    image::image_dimensions(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn split_train_evaluate_produce_the_documented_artifacts() {
    let run = setup(10, "");
    assert_ok(&ember(&["split", "--config", run.config_str()]));
    assert!(run.out.join("split_manifest.json").is_file());
    assert_ok(&ember(&["train", "--config", run.config_str()]));
    assert_ok(&ember(&["evaluate", "--config", run.config_str()]));

    let csv = std::fs::read_to_string(run.out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], ember::train::METRICS_HEADER);
    assert_eq!(lines.len(), 1 + 2);
    for name in [
        "config.resolved.json",
        "history.json",
        "checkpoints/best/weights.bin",
        "checkpoints/best/model.json",
        "checkpoints/final/weights.bin",
        "report.json",
        "predictions.csv",
    ] {
        assert!(run.out.join(name).is_file(), "{name}");
    }
    for png in ["curves_accuracy.png", "curves_loss.png", "roc.png", "confusion.png", "predictions_grid.png"] {
        let (w, h) = png_dims(&run.out.join(png));
        assert!(w > 0 && h > 0, "{png}");
    }

    let report = EvaluationReport::read_json(&run.out.join("report.json")).unwrap();
    let predictions = std::fs::read_to_string(run.out.join("predictions.csv")).unwrap();
    let rows: Vec<Vec<&str>> = predictions.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), report.evaluated);
    let labels: Vec<bool> = rows.iter().map(|r| r[1] == report.positive_class).collect();
    let scores: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let cm = confusion_matrix(&labels, &scores, report.threshold).unwrap();
    assert_eq!(cm, report.confusion);
    let m = derived_metrics(&cm);
    assert!((m.accuracy - report.accuracy).abs() < 1e-9);
    assert!((m.f1 - report.f1).abs() < 1e-9);
    for r in &rows {
        let expected = if r[2].parse::<f64>().unwrap() >= report.threshold { "fire" } else { "nofire" };
        assert_eq!(r[3], expected);
    }
}

#[test]
fn split_is_byte_identical_across_reruns() {
    let run = setup(12, "");
    assert_ok(&ember(&["split", "--config", run.config_str()]));
    let first = std::fs::read(run.out.join("split_manifest.json")).unwrap();
    std::fs::remove_file(run.out.join("split_manifest.json")).unwrap();
    assert_ok(&ember(&["split", "--config", run.config_str()]));
    let second = std::fs::read(run.out.join("split_manifest.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn configuration_and_dataset_errors_exit_with_two() {
    let run = setup(4, "");

    let bad = run.config.with_file_name("bad.json");
    std::fs::write(&bad, r#"{"data": {"fractions": {"train": 0.8, "validation": 0.1, "test": 0.2}}}"#).unwrap();
    let out = ember(&["split", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sum"));

    let unknown = run.config.with_file_name("unknown.json");
    std::fs::write(&unknown, r#"{"trainig": {}}"#).unwrap();
    assert_eq!(code(&ember(&["train", "--config", unknown.to_str().unwrap()])), 2);

    let presplit = run.root.parent().unwrap().join("presplit");
    common::red_green_dataset(&presplit.join("train"), 3, 16);
    std::fs::create_dir_all(presplit.join("test")).unwrap();
    let cfg = run.config.with_file_name("presplit.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"data": {{"root": {presplit:?}, "layout": "pre_split"}}, "model": {{"backbone": "toy_cnn"}}, "output_dir": {:?}}}"#,
            run.out.join("p")
        ),
    )
    .unwrap();
    let out = ember(&["split", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(code(&ember(&["evaluate", "--bogus-flag"])), 2);
}

#[test]
fn held_output_lock_exits_with_two() {
    let run = setup(4, "");
    std::fs::create_dir_all(&run.out).unwrap();
    let _held = ember::fsutil::DirLock::acquire(&run.out).unwrap();
    let out = ember(&["split", "--config", run.config_str()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lock"));
}

#[test]
fn non_finite_weights_exit_with_three_and_keep_the_metrics_header() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("nan.embw");
    let mut backbone = PretrainedBackbone::initialized(BackboneArch::toy(), 1);
    backbone.params.iter_mut().next().unwrap().values[0] = f64::NAN;
    backbone.save(&weights).unwrap();
    let run = setup(4, &format!(r#", "weights": {weights:?}"#));
    let out = ember(&["train", "--config", run.config_str()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("epoch 0") && stderr.contains("batch 0"), "{stderr}");
    let csv = std::fs::read_to_string(run.out.join("metrics.csv")).unwrap();
    assert_eq!(csv.trim_end(), ember::train::METRICS_HEADER);
    assert!(!run.out.join("checkpoints").exists());
}

#[test]
fn predict_prints_one_line_per_image_and_renders_a_grid() {
    let run = setup(6, "");
    assert_ok(&ember(&["train", "--config", run.config_str()]));
    let ckpt = run.out.join("checkpoints/final");

    let inputs = run.root.parent().unwrap().join("inputs");
    for i in 0..12 {
        let rgb = if i % 2 == 0 { common::RED } else { common::GREEN };
        common::write_png(&inputs.join(format!("img{i:02}.png")), 30, 30, rgb);
    }
    std::fs::write(inputs.join("broken.png"), b"not a png").unwrap();
    let grid_dir = run.out.join("predict");
    let out = ember(&[
        "predict",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--output",
        grid_dir.to_str().unwrap(),
        "--columns",
        "4",
        inputs.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 12);
    for line in &lines {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line}");
        assert!(fields[1] == "fire" || fields[1] == "nofire");
        let score: f64 = fields[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&score));
        assert_eq!(fields[1] == "fire", score >= 0.5);
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.png"));
    let (w, h) = png_dims(&grid_dir.join("predictions_grid.png"));
    let (gw, gh) = ember::render::grid_dimensions(4, 4);
    assert_eq!((w, h), (gw, gh));

    let none = ember(&["predict", "--checkpoint", ckpt.to_str().unwrap(), inputs.join("broken.png").to_str().unwrap()]);
    assert_eq!(code(&none), 2);
}
