//! Fine-tunes the toy backbone's head on solid red versus solid green
//! images and saves a checkpoint.
//!
//! cargo run --release --example train_synthetic [OUT_DIR]

use std::path::PathBuf;

use ember::data::{scan_dataset, split_dataset, SplitFractions};
use ember::model::{BackboneArch, ClassifierModel, HeadConfig, InputAdapterPolicy, PretrainedBackbone};
use ember::train::{save_checkpoint, train_with, TrainingConfig};

fn main() -> ember::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ember-train-example"));
    let root = out.join("data");
    for (class, rgb) in [("fire", [220, 30, 20]), ("nofire", [30, 200, 40])] {
        std::fs::create_dir_all(root.join(class)).unwrap();
        for i in 0..40 {
            image::RgbImage::from_pixel(64, 64, image::Rgb(rgb))
                .save(root.join(class).join(format!("{i:03}.png")))
                .unwrap();
        }
    }

    let splits = split_dataset(&scan_dataset(&root)?, SplitFractions::new(0.8, 0.0, 0.2), 7)?;
    let backbone = PretrainedBackbone::initialized(BackboneArch::toy(), 7);
    let mut model = ClassifierModel::assemble(backbone, HeadConfig::default(), InputAdapterPolicy::default(), 7)?;
    model.set_class_names(vec!["fire".into(), "nofire".into()])?;

    let cfg = TrainingConfig {
        epochs: 6,
        learning_rate: 1e-3,
        seed: 7,
        ..TrainingConfig::default()
    };
    let outcome = train_with(model, &splits, &cfg, None, |history| {
        let e = history.entries.last().expect("one entry per epoch");
        println!(
            "epoch {:>2}  train loss {:.4}  train acc {:.3}  test loss {:.4}  test acc {:.3}",
            e.epoch,
            e.train_loss,
            e.train_accuracy,
            e.val_loss.unwrap_or(f64::NAN),
            e.val_accuracy.unwrap_or(f64::NAN)
        );
        Ok(())
    })?;
    let dir = out.join("checkpoint");
    save_checkpoint(&outcome.best, &outcome.history, &dir)?;
    println!("best epoch {}; checkpoint saved to {}", outcome.history.best_epoch, dir.display());
    Ok(())
}
