//! GAP → dense(ReLU) → dropout → output classification head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu, Dense, FeatureMap};
use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};
use crate::rng;
use crate::train::loss::{bce_term, clamp_probability};

pub const HEAD_GROUP: &str = "head";
const INIT_STREAM: u64 = 0x4ead;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// One sigmoid unit giving the positive-class probability.
    BinarySigmoid,
    /// `num_classes` softmax outputs.
    MulticlassSoftmax,
    /// `num_classes` independent sigmoid outputs.
    MultilabelSigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub mode: HeadMode,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            mode: HeadMode::BinarySigmoid,
            hidden_units: 128,
            dropout_rate: 0.2,
            num_classes: 2,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::Config("head hidden_units must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "head dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("head num_classes must be >= 1".into()));
        }
        if self.mode == HeadMode::MulticlassSoftmax && self.num_classes < 2 {
            return Err(Error::Config(format!(
                "multiclass_softmax needs num_classes >= 2, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        match self.mode {
            HeadMode::BinarySigmoid => 1,
            HeadMode::MulticlassSoftmax | HeadMode::MultilabelSigmoid => self.num_classes,
        }
    }

    /// `c'·hidden + hidden + hidden·out + out`
    pub fn parameter_count(&self, feature_channels: usize) -> usize {
        let out = self.output_dim();
        feature_channels * self.hidden_units + self.hidden_units + self.hidden_units * out + out
    }
}

/// Activations of one sample through the head.
#[derive(Clone, Debug)]
pub struct HeadTrace {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Per-unit dropout multiplier: 0 or `1 / (1 - rate)` while training,
    /// all ones at inference.
    pub mask: Vec<f64>,
    pub dropped: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    cfg: HeadConfig,
    feature_channels: usize,
    hidden: Dense,
    output: Dense,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl Head {
    pub fn build(cfg: HeadConfig, feature_channels: usize, store: &mut ParamStore, init_seed: u64) -> Result<Head> {
        cfg.validate()?;
        if feature_channels == 0 {
            return Err(Error::Config("head needs at least one feature channel".into()));
        }
        let mut draw = rng::stream(init_seed, &[INIT_STREAM]);
        let hidden = Dense::new(store, "head.dense", HEAD_GROUP, feature_channels, cfg.hidden_units, &mut draw);
        let output = Dense::new(store, "head.output", HEAD_GROUP, cfg.hidden_units, cfg.output_dim(), &mut draw);
        Ok(Head {
            cfg,
            feature_channels,
            hidden,
            output,
        })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.cfg
    }

    pub fn feature_channels(&self) -> usize {
        self.feature_channels
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden.parameter_count() + self.output.parameter_count()
    }

    /// Forward pass from a feature map. Pass a random stream to run in
    /// training mode (dropout active); `None` is inference.
    pub fn forward<R: Rng + ?Sized>(&self, store: &ParamStore, features: &FeatureMap, dropout: Option<&mut R>) -> HeadTrace {
        self.forward_pooled(store, features.global_average_pool(), dropout)
    }

    pub fn forward_pooled<R: Rng + ?Sized>(&self, store: &ParamStore, pooled: Vec<f64>, dropout: Option<&mut R>) -> HeadTrace {
        let hidden: Vec<f64> = self.hidden.forward(store, &pooled).into_iter().map(relu).collect();
        let rate = self.cfg.dropout_rate;
        let mask: Vec<f64> = match dropout {
            Some(draw) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                (0..hidden.len())
                    .map(|_| if draw.random::<f64>() < rate { 0.0 } else { keep })
                    .collect()
            }
            _ => vec![1.0; hidden.len()],
        };
        let dropped: Vec<f64> = hidden.iter().zip(&mask).map(|(h, m)| h * m).collect();
        let logits = self.output.forward(store, &dropped);
        let probs = match self.cfg.mode {
            HeadMode::MulticlassSoftmax => softmax(&logits),
            HeadMode::BinarySigmoid | HeadMode::MultilabelSigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        HeadTrace {
            pooled,
            hidden,
            mask,
            dropped,
            logits,
            probs,
        }
    }

    /// Per-sample loss and its gradient with respect to the logits.
    ///
    /// Binary and multilabel use (mean) binary cross-entropy, multiclass
    /// uses categorical cross-entropy; `target` has `output_dim` entries.
    pub fn sample_loss(&self, probs: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
        match self.cfg.mode {
            HeadMode::BinarySigmoid | HeadMode::MultilabelSigmoid => {
                let k = probs.len() as f64;
                let loss = probs.iter().zip(target).map(|(&p, &y)| bce_term(p, y)).sum::<f64>() / k;
                let grad = probs.iter().zip(target).map(|(&p, &y)| (p - y) / k).collect();
                (loss, grad)
            }
            HeadMode::MulticlassSoftmax => {
                let loss = -probs
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| y * clamp_probability(p).ln())
                    .sum::<f64>();
                let grad = probs.iter().zip(target).map(|(&p, &y)| p - y).collect();
                (loss, grad)
            }
        }
    }

    /// Accumulates head parameter gradients for `grad_logits` and returns
    /// the gradient with respect to the pooled features.
    pub fn backward(&self, store: &ParamStore, trace: &HeadTrace, grad_logits: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let grad_dropped = self.output.backward(store, &trace.dropped, grad_logits, grads);
        let grad_hidden: Vec<f64> = grad_dropped
            .iter()
            .zip(&trace.mask)
            .zip(&trace.hidden)
            .map(|((g, m), h)| if *h > 0.0 { g * m } else { 0.0 })
            .collect();
        self.hidden.backward(store, &trace.pooled, &grad_hidden, grads)
    }

    /// Mean loss over a batch of feature maps and the gradients of all head
    /// parameters. `dropout_seed` switches on training-mode dropout.
    pub fn loss_and_gradients(
        &self,
        store: &ParamStore,
        features: &[FeatureMap],
        targets: &[Vec<f64>],
        dropout_seed: Option<u64>,
    ) -> (f64, Gradients) {
        let n = features.len() as f64;
        let mut grads = store.zero_gradients();
        let mut total = 0.0;
        for (i, (f, t)) in features.iter().zip(targets).enumerate() {
            let trace = match dropout_seed {
                Some(seed) => self.forward(store, f, Some(&mut rng::stream(seed, &[i as u64]))),
                None => self.forward::<rng::StreamRng>(store, f, None),
            };
            let (loss, grad) = self.sample_loss(&trace.probs, t);
            total += loss;
            let scaled: Vec<f64> = grad.iter().map(|g| g / n).collect();
            self.backward(store, &trace, &scaled, &mut grads);
        }
        (total / n, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_features(seed: u64, channels: usize) -> FeatureMap {
        let mut draw = rng::stream(seed, &[]);
        FeatureMap {
            channels,
            height: 7,
            width: 7,
            data: (0..channels * 49).map(|_| draw.random::<f64>() * 2.0).collect(),
        }
    }

    #[test]
    fn binary_parameter_count() {
        let cfg = HeadConfig::default();
        assert_eq!(cfg.parameter_count(1280), 164_097);
        let mut store = ParamStore::new();
        let head = Head::build(cfg, 1280, &mut store, 0).unwrap();
        assert_eq!(head.parameter_count(), 164_097);
        assert_eq!(store.count(Some(HEAD_GROUP)), 164_097);
    }

    #[test]
    fn multiclass_outputs_sum_to_one() {
        let cfg = HeadConfig {
            mode: HeadMode::MulticlassSoftmax,
            num_classes: 3,
            ..HeadConfig::default()
        };
        let mut store = ParamStore::new();
        let head = Head::build(cfg, 16, &mut store, 4).unwrap();
        let trace = head.forward::<rng::StreamRng>(&store, &random_features(1, 16), None);
        assert_eq!(trace.probs.len(), 3);
        assert!((trace.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiclass_needs_two_classes() {
        let cfg = HeadConfig {
            mode: HeadMode::MulticlassSoftmax,
            num_classes: 1,
            ..HeadConfig::default()
        };
        let mut store = ParamStore::new();
        assert!(matches!(Head::build(cfg, 8, &mut store, 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_dropout_training_equals_inference() {
        let cfg = HeadConfig {
            dropout_rate: 0.0,
            ..HeadConfig::default()
        };
        let mut store = ParamStore::new();
        let head = Head::build(cfg, 32, &mut store, 9).unwrap();
        let f = random_features(2, 32);
        let train = head.forward(&store, &f, Some(&mut rng::stream(5, &[])));
        let infer = head.forward::<rng::StreamRng>(&store, &f, None);
        assert_eq!(train.probs, infer.probs);
    }

    #[test]
    fn dropout_changes_training_outputs_only() {
        let cfg = HeadConfig {
            dropout_rate: 0.5,
            ..HeadConfig::default()
        };
        let mut store = ParamStore::new();
        let head = Head::build(cfg, 32, &mut store, 9).unwrap();
        let f = random_features(2, 32);
        let a = head.forward(&store, &f, Some(&mut rng::stream(1, &[])));
        let b = head.forward(&store, &f, Some(&mut rng::stream(2, &[])));
        assert_ne!(a.probs, b.probs);
        assert!(a.mask.iter().all(|m| *m == 0.0 || *m == 2.0));
        let i1 = head.forward::<rng::StreamRng>(&store, &f, None);
        let i2 = head.forward::<rng::StreamRng>(&store, &f, None);
        assert_eq!(i1.probs, i2.probs);
    }

    #[test]
    fn multiclass_and_multilabel_gradients_match_finite_differences() {
        for mode in [HeadMode::MulticlassSoftmax, HeadMode::MultilabelSigmoid] {
            let cfg = HeadConfig {
                mode,
                hidden_units: 6,
                dropout_rate: 0.0,
                num_classes: 3,
            };
            let mut store = ParamStore::new();
            let head = Head::build(cfg, 5, &mut store, 3).unwrap();
            let features = vec![random_features(10, 5), random_features(11, 5)];
            let targets = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]];
            let (_, grads) = head.loss_and_gradients(&store, &features, &targets, None);
            let h = 1e-5;
            for (pi, p) in store.iter().enumerate() {
                for i in 0..p.values.len() {
                    let mut plus = store.clone();
                    plus.iter_mut().nth(pi).unwrap().values[i] += h;
                    let mut minus = store.clone();
                    minus.iter_mut().nth(pi).unwrap().values[i] -= h;
                    let lp = head.loss_and_gradients(&plus, &features, &targets, None).0;
                    let lm = head.loss_and_gradients(&minus, &features, &targets, None).0;
                    let numeric = (lp - lm) / (2.0 * h);
                    let analytic = grads.by_index(pi)[i];
                    assert!((numeric - analytic).abs() <= 1e-6 + 1e-4 * analytic.abs(), "{mode:?} {} [{i}]", p.name);
                }
            }
        }
    }
}
