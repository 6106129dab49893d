#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ember::data::{scan_dataset, split_dataset, SplitAssignment, SplitFractions};
use ember::model::{BackboneArch, ClassifierModel, HeadConfig, InputAdapterPolicy, PretrainedBackbone};

pub const RED: [u8; 3] = [220, 30, 20];
pub const GREEN: [u8; 3] = [30, 200, 40];

pub fn write_png(path: &Path, w: u32, h: u32, rgb: [u8; 3]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    image::RgbImage::from_pixel(w, h, image::Rgb(rgb)).save(path).unwrap();
}

/// `root/fire/*.png` solid red and `root/nofire/*.png` solid green.
pub fn red_green_dataset(root: &Path, per_class: usize, side: u32) -> PathBuf {
    for i in 0..per_class {
        write_png(&root.join("fire").join(format!("f{i:03}.png")), side, side, RED);
        write_png(&root.join("nofire").join(format!("n{i:03}.png")), side, side, GREEN);
    }
    root.to_path_buf()
}

pub fn split_80_20(root: &Path, seed: u64) -> SplitAssignment {
    let index = scan_dataset(root).unwrap();
    split_dataset(&index, SplitFractions::new(0.8, 0.0, 0.2), seed).unwrap()
}

pub fn toy_model(seed: u64) -> ClassifierModel {
    let backbone = PretrainedBackbone::initialized(BackboneArch::toy(), seed);
    let mut model =
        ClassifierModel::assemble(backbone, HeadConfig::default(), InputAdapterPolicy::default(), seed).unwrap();
    model.set_class_names(vec!["fire".into(), "nofire".into()]).unwrap();
    model
}
