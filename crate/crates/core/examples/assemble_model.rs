//! Assembles the MobileNetV2-shaped backbone with the default head and
//! walks through the unfreeze stages.
//!
//! cargo run --example assemble_model

use ember::model::{BackboneArch, ClassifierModel, HeadConfig, InputAdapterPolicy, PretrainedBackbone, UnfreezeStage};

fn main() -> ember::Result<()> {
    let arch = BackboneArch::mobilenet_v2_shape();
    let backbone = PretrainedBackbone::initialized(arch, 0);
    let model = ClassifierModel::assemble(backbone, HeadConfig::default(), InputAdapterPolicy::default(), 0)?;

    let contract = model.contract();
    println!("backbone      {}", model.backbone().arch().name);
    println!("input         {:?}", model.adapter().target);
    println!("features      {:?}", model.backbone().arch().feature_shape());
    println!("normalization {}", model.normalization().as_str());
    println!("head params   {}", model.head().parameter_count());
    println!("classes       {:?} (positive: {})", model.class_names(), model.positive_class_name());
    println!();

    let stages = ["head_only", "last_two_blocks", "block1,head", "all"];
    for text in stages {
        let stage: UnfreezeStage = text.parse()?;
        let mut m = model.clone();
        m.set_trainability(stage.clone())?;
        let trainable: Vec<&str> = contract
            .parameter_groups
            .iter()
            .map(String::as_str)
            .chain(["head"])
            .filter(|g| m.is_trainable(g))
            .collect();
        let count: usize = m
            .params()
            .iter()
            .filter(|p| m.is_trainable(&p.group))
            .map(|p| p.values.len())
            .sum();
        let label = stage.to_string();
        println!("{label:<16} trainable groups {trainable:?}, {count} parameters");
    }
    Ok(())
}
