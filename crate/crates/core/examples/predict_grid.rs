//! Labels a folder of images with a checkpoint and renders the prediction
//! grid. Without arguments a small model is trained first.
//!
//! cargo run --release --example predict_grid [CHECKPOINT_DIR IMAGE_DIR]

use std::path::PathBuf;

use ember::cli::{cmd_predict, expand_inputs};
use ember::data::{scan_dataset, split_dataset, SplitFractions};
use ember::model::{BackboneArch, ClassifierModel, HeadConfig, InputAdapterPolicy, PretrainedBackbone};
use ember::render::PredictionGridSpec;
use ember::train::{save_checkpoint, train, TrainingConfig};

fn write_images(dir: &std::path::Path, n: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let t = i as f32 / (n - 1).max(1) as f32;
        let rgb = [(220.0 * t + 30.0 * (1.0 - t)) as u8, (30.0 * t + 200.0 * (1.0 - t)) as u8, 30];
        image::RgbImage::from_pixel(48, 48, image::Rgb(rgb))
            .save(dir.join(format!("img{i:02}.png")))
            .unwrap();
    }
}

fn demo_checkpoint(work: &std::path::Path) -> ember::Result<PathBuf> {
    let root = work.join("data");
    for (class, rgb) in [("fire", [220, 30, 20]), ("nofire", [30, 200, 40])] {
        std::fs::create_dir_all(root.join(class)).unwrap();
        for i in 0..20 {
            image::RgbImage::from_pixel(48, 48, image::Rgb(rgb))
                .save(root.join(class).join(format!("{i:03}.png")))
                .unwrap();
        }
    }
    let splits = split_dataset(&scan_dataset(&root)?, SplitFractions::new(0.8, 0.0, 0.2), 1)?;
    let backbone = PretrainedBackbone::initialized(BackboneArch::toy(), 1);
    let mut model = ClassifierModel::assemble(backbone, HeadConfig::default(), InputAdapterPolicy::default(), 1)?;
    model.set_class_names(vec!["fire".into(), "nofire".into()])?;
    let cfg = TrainingConfig {
        epochs: 10,
        batch_size: 8,
        learning_rate: 1e-3,
        ..TrainingConfig::default()
    };
    let outcome = train(model, &splits, &cfg, None)?;
    let dir = work.join("checkpoint");
    save_checkpoint(&outcome.best, &outcome.history, &dir)?;
    Ok(dir)
}

fn main() -> ember::Result<()> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let work = std::env::temp_dir().join("ember-predict-example");
    let (checkpoint, inputs) = match args.as_slice() {
        [ckpt, images] => (ckpt.clone(), images.clone()),
        _ => {
            let inputs = work.join("inputs");
            write_images(&inputs, 12);
            (demo_checkpoint(&work)?, inputs)
        }
    };
    println!("{} input image(s)", expand_inputs(std::slice::from_ref(&inputs))?.len());
    let spec = PredictionGridSpec {
        columns: 4,
        ..PredictionGridSpec::default()
    };
    let out = work.join("grid");
    let outcome = cmd_predict(&checkpoint, &[inputs], 0.5, &spec, Some(&out))?;
    for p in &outcome.predictions {
        println!("{p}");
    }
    for page in &outcome.grid {
        println!("grid: {}", page.display());
    }
    Ok(())
}
