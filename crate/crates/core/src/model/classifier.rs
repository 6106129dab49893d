//! Backbone + head assembled into a trainable classifier.

use std::path::Path;

use super::backbone::{BackboneContract, ConvBackbone, PretrainedBackbone};
use super::head::{Head, HeadConfig, HeadMode, HEAD_GROUP};
use super::layers::FeatureMap;
use super::params::{Gradients, ParamStore};
use super::stage::UnfreezeStage;
use super::InputAdapterPolicy;
use crate::data::{Batch, ImageRecord, ImageTensor, LoaderSettings, Normalization};
use crate::error::{Error, Result};
use crate::rng;
use crate::workers;

/// Class name treated as positive for binary metrics when present.
pub const DEFAULT_POSITIVE_CLASS: &str = "fire";
const DROPOUT_STREAM: u64 = 0xd20;
/// Samples whose gradients are summed together before joining the batch
/// total. Fixed so the summation order never depends on the worker count.
const GRADIENT_CHUNK: usize = 4;

/// Loss, accuracy and gradients of one batch.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Mean per-sample loss.
    pub loss: f64,
    pub correct: usize,
    pub count: usize,
    /// Gradients of `loss`; frozen groups hold zeros.
    pub grads: Gradients,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    params: ParamStore,
    backbone: ConvBackbone,
    head: Head,
    adapter: InputAdapterPolicy,
    normalization: Normalization,
    class_names: Vec<String>,
    positive_class: usize,
    stage: UnfreezeStage,
    trainability: Vec<(String, bool)>,
    workers: usize,
}

impl ClassifierModel {
    /// Attaches a freshly initialized head to `backbone`. The backbone starts
    /// frozen and the head trainable.
    pub fn assemble(
        backbone: PretrainedBackbone,
        head_cfg: HeadConfig,
        adapter: InputAdapterPolicy,
        head_seed: u64,
    ) -> Result<Self> {
        adapter.validate()?;
        let contract = backbone.contract();
        let (eh, ew, _) = contract.expected_input;
        if adapter.target != (eh, ew) {
            return Err(Error::Config(format!(
                "input adapter targets {}×{} but backbone '{}' expects {eh}×{ew}",
                adapter.target.0, adapter.target.1, contract.name
            )));
        }
        let PretrainedBackbone { backbone, mut params } = backbone;
        let head = Head::build(head_cfg, contract.feature_shape.2, &mut params, head_seed)?;
        let class_names = match head_cfg.mode {
            HeadMode::BinarySigmoid => vec![DEFAULT_POSITIVE_CLASS.to_string(), "nofire".to_string()],
            _ => (0..head_cfg.num_classes).map(|i| format!("class_{i}")).collect(),
        };
        let mut model = ClassifierModel {
            params,
            backbone,
            head,
            adapter,
            normalization: contract.expected_normalization,
            class_names,
            positive_class: 0,
            stage: UnfreezeStage::HeadOnly,
            trainability: Vec::new(),
            workers: workers::configured_workers(),
        };
        model.set_trainability(UnfreezeStage::HeadOnly)?;
        Ok(model)
    }

    /// Sets the class vocabulary. For binary heads exactly two classes are
    /// needed and the positive one is `fire` if present, else index 0.
    pub fn set_class_names(&mut self, names: Vec<String>) -> Result<()> {
        let cfg = self.head.config();
        let expected = match cfg.mode {
            HeadMode::BinarySigmoid => 2,
            _ => cfg.num_classes,
        };
        if names.len() != expected {
            return Err(Error::Config(format!(
                "head expects {expected} classes but the dataset has {} ({})",
                names.len(),
                names.join(", ")
            )));
        }
        self.positive_class = names.iter().position(|n| n == DEFAULT_POSITIVE_CLASS).unwrap_or(0);
        self.class_names = names;
        Ok(())
    }

    /// Overrides the intensity scheme the backbone declared.
    pub fn set_normalization(&mut self, normalization: Normalization) {
        self.normalization = normalization;
    }

    pub fn set_workers(&mut self, workers: usize) {
        self.workers = workers.max(1);
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn positive_class(&self) -> usize {
        self.positive_class
    }

    pub fn positive_class_name(&self) -> &str {
        &self.class_names[self.positive_class]
    }

    pub fn head_config(&self) -> &HeadConfig {
        self.head.config()
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn backbone(&self) -> &ConvBackbone {
        &self.backbone
    }

    pub fn contract(&self) -> BackboneContract {
        self.backbone.contract()
    }

    pub fn adapter(&self) -> &InputAdapterPolicy {
        &self.adapter
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn stage(&self) -> &UnfreezeStage {
        &self.stage
    }

    /// Group name → trainable, backbone groups first, head last.
    pub fn trainability(&self) -> &[(String, bool)] {
        &self.trainability
    }

    pub fn is_trainable(&self, group: &str) -> bool {
        self.trainability.iter().any(|(g, t)| g == group && *t)
    }

    pub fn set_trainability(&mut self, stage: UnfreezeStage) -> Result<()> {
        let groups = self.contract().parameter_groups;
        self.trainability = stage.resolve(&groups, HEAD_GROUP)?;
        self.stage = stage;
        Ok(())
    }

    /// Per-tensor flag, aligned with the parameter store.
    pub fn trainable_mask(&self) -> Vec<bool> {
        self.params.iter().map(|p| self.is_trainable(&p.group)).collect()
    }

    /// Earliest backbone block that needs gradients, if any.
    fn first_trainable_block(&self) -> Option<usize> {
        (0..self.backbone.num_blocks()).find(|&i| self.trainability[i].1)
    }

    /// Preprocessing matching this model: adapter plus normalization.
    pub fn loader_settings(&self) -> LoaderSettings {
        LoaderSettings {
            adapter: self.adapter,
            normalization: self.normalization,
            workers: self.workers,
        }
    }

    pub fn prepare(&self, path: &Path) -> Result<ImageTensor> {
        let record = ImageRecord {
            path: path.to_path_buf(),
            label: String::new(),
            label_index: 0,
        };
        self.loader_settings().prepare(&record)
    }

    fn check_input(&self, image: &ImageTensor) -> Result<()> {
        if image.normalization() != self.normalization {
            return Err(Error::Usage(format!(
                "image is normalized as {} but the model expects {}",
                image.normalization().as_str(),
                self.normalization.as_str()
            )));
        }
        if (image.height(), image.width()) != self.adapter.target {
            return Err(Error::Usage(format!(
                "image is {}×{} but the model expects {}×{}",
                image.height(),
                image.width(),
                self.adapter.target.0,
                self.adapter.target.1
            )));
        }
        Ok(())
    }

    fn features(&self, image: &ImageTensor) -> FeatureMap {
        let trace = self.backbone.forward(&self.params, ConvBackbone::input_map(image));
        trace.activations.into_iter().last().expect("trace holds the input at least")
    }

    /// Inference-mode probabilities, one vector per image: length 1 for
    /// binary heads (probability of the positive class), K otherwise.
    pub fn predict_images(&self, images: &[ImageTensor]) -> Result<Vec<Vec<f64>>> {
        for image in images {
            self.check_input(image)?;
        }
        Ok(workers::ordered_map(images, self.workers, |image| {
            let features = self.features(image);
            self.head.forward::<rng::StreamRng>(&self.params, &features, None).probs
        }))
    }

    pub fn predict_proba(&self, batch: &Batch) -> Result<Vec<Vec<f64>>> {
        self.predict_images(&batch.images)
    }

    /// Score of the positive class from a probability vector.
    pub fn positive_score(&self, probs: &[f64]) -> f64 {
        match self.head.config().mode {
            HeadMode::BinarySigmoid => probs[0],
            _ => probs[self.positive_class],
        }
    }

    /// Predicted class index. Binary heads predict positive iff the score is
    /// at least `threshold`.
    pub fn predicted_class(&self, probs: &[f64], threshold: f64) -> usize {
        match self.head.config().mode {
            HeadMode::BinarySigmoid => {
                if probs[0] >= threshold {
                    self.positive_class
                } else {
                    1 - self.positive_class
                }
            }
            _ => {
                let mut best = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > probs[best] {
                        best = i;
                    }
                }
                best
            }
        }
    }

    /// Training target for a label index.
    pub fn target_for(&self, label: usize) -> Vec<f64> {
        match self.head.config().mode {
            HeadMode::BinarySigmoid => vec![if label == self.positive_class { 1.0 } else { 0.0 }],
            _ => (0..self.head.config().num_classes)
                .map(|k| if k == label { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Training-mode forward and backward pass over a batch. Dropout draws
    /// for sample `i` come from `stream(dropout_seed, [.., i])`.
    pub fn forward_backward(&self, images: &[ImageTensor], labels: &[usize], dropout_seed: u64) -> Result<StepOutput> {
        if images.len() != labels.len() || images.is_empty() {
            return Err(Error::Usage(format!(
                "batch has {} images and {} labels",
                images.len(),
                labels.len()
            )));
        }
        for image in images {
            self.check_input(image)?;
        }
        let n = images.len() as f64;
        let first_trainable = self.first_trainable_block();
        let samples: Vec<usize> = (0..images.len()).collect();
        let chunks: Vec<&[usize]> = samples.chunks(GRADIENT_CHUNK).collect();
        let partials = workers::ordered_map(&chunks, self.workers, |chunk| {
            let mut grads = self.params.zero_gradients();
            let mut loss = 0.0;
            let mut correct = 0;
            for &i in chunk.iter() {
                let trace = self.backbone.forward(&self.params, ConvBackbone::input_map(&images[i]));
                let mut draw = rng::stream(dropout_seed, &[DROPOUT_STREAM, i as u64]);
                let head_trace = self.head.forward(&self.params, trace.features(), Some(&mut draw));
                let target = self.target_for(labels[i]);
                let (sample_loss, grad_logits) = self.head.sample_loss(&head_trace.probs, &target);
                loss += sample_loss;
                if self.predicted_class(&head_trace.probs, 0.5) == labels[i] {
                    correct += 1;
                }
                let scaled: Vec<f64> = grad_logits.iter().map(|g| g / n).collect();
                let grad_pooled = self.head.backward(&self.params, &head_trace, &scaled, &mut grads);
                if let Some(first) = first_trainable {
                    let f = trace.features();
                    let grad_features = FeatureMap::spread_pooled_gradient(&grad_pooled, f.height, f.width);
                    self.backbone.backward(&self.params, &trace, grad_features, &mut grads, first);
                }
            }
            (loss, correct, grads)
        });
        let mut grads = self.params.zero_gradients();
        let mut loss = 0.0;
        let mut correct = 0;
        for (l, c, g) in &partials {
            loss += l;
            correct += c;
            grads.add_assign(g);
        }
        Ok(StepOutput {
            loss: loss / n,
            correct,
            count: images.len(),
            grads,
        })
    }

    /// Replaces all parameter values. Used when restoring checkpoints.
    pub(crate) fn load_params(&mut self, tensors: &[super::weights::NamedTensor]) -> Result<()> {
        super::weights::assign(&mut self.params, tensors)
    }
}
