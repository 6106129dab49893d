//! Scans a class-per-directory dataset, splits it 80/20 per class and
//! writes the split manifest.
//!
//! cargo run --example split_dataset [DATASET_ROOT]

use std::path::PathBuf;

use ember::data::{scan_dataset, split_dataset, write_manifest, SplitFractions};

fn synthetic_root() -> PathBuf {
    let root = std::env::temp_dir().join("ember-split-example");
    for (class, rgb) in [("fire", [210, 60, 20]), ("nofire", [40, 120, 50])] {
        std::fs::create_dir_all(root.join(class)).unwrap();
        for i in 0..25 {
            let shade = (i * 4) as u8;
            let px = image::Rgb([rgb[0] ^ shade, rgb[1], rgb[2] ^ shade]);
            image::RgbImage::from_pixel(32, 32, px)
                .save(root.join(class).join(format!("{i:03}.png")))
                .unwrap();
        }
    }
    root
}

fn main() -> ember::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(synthetic_root);
    let index = scan_dataset(&root)?;
    for w in &index.warnings {
        println!("skipped {}: {}", w.path.display(), w.reason);
    }
    let splits = split_dataset(&index, SplitFractions::new(0.8, 0.0, 0.2), 42)?;
    println!("{:<10} {:>6} {:>6}", "class", "train", "test");
    for (c, name) in index.class_names.iter().enumerate() {
        let count = |list: &[ember::data::ImageRecord]| list.iter().filter(|r| r.label_index == c).count();
        println!("{name:<10} {:>6} {:>6}", count(&splits.train), count(&splits.test));
    }
    let manifest = root.join("split_manifest.json");
    write_manifest(&splits, &root, &manifest)?;
    println!("manifest written to {}", manifest.display());
    Ok(())
}
