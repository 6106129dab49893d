mod common;

use ember::data::{ImageTensor, Normalization};
use ember::model::{
    adapt_input, AdapterKind, BackboneArch, ClassifierModel, FeatureMap, Head, HeadConfig, HeadMode,
    InputAdapterPolicy, ParamStore, PretrainedBackbone, UnfreezeStage,
};
use ember::rng;
use rand::Rng;

fn random_features(draw: &mut impl Rng, channels: usize) -> FeatureMap {
    FeatureMap {
        channels,
        height: 2,
        width: 2,
        data: (0..channels * 4).map(|_| draw.random_range(0.0..3.0)).collect(),
    }
}

fn head(mode: HeadMode, classes: usize, dropout: f64, channels: usize, seed: u64) -> (Head, ParamStore) {
    let cfg = HeadConfig {
        mode,
        hidden_units: 16,
        dropout_rate: dropout,
        num_classes: classes,
    };
    let mut store = ParamStore::new();
    let head = Head::build(cfg, channels, &mut store, seed).unwrap();
    (head, store)
}

#[test]
fn softmax_outputs_form_a_distribution() {
    let (head, store) = head(HeadMode::MulticlassSoftmax, 5, 0.2, 6, 1);
    let mut draw = rng::stream(10, &[]);
    for _ in 0..1000 {
        let pooled: Vec<f64> = (0..6).map(|_| draw.random_range(-50.0..50.0)).collect();
        let trace = head.forward_pooled::<rng::StreamRng>(&store, pooled, None);
        let sum: f64 = trace.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "{sum}");
        assert!(trace.probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

#[test]
fn dropout_zeroes_or_rescales_each_unit() {
    let rate = 0.25;
    let (head, store) = head(HeadMode::BinarySigmoid, 2, rate, 6, 2);
    let mut draw = rng::stream(11, &[]);
    let mut dropped = 0usize;
    let mut total = 0usize;
    for i in 0..200 {
        let f = random_features(&mut draw, 6);
        let eval = head.forward::<rng::StreamRng>(&store, &f, None);
        let train = head.forward(&store, &f, Some(&mut rng::stream(3, &[i])));
        for (h_eval, h_train) in eval.hidden.iter().zip(&train.dropped) {
            if *h_eval == 0.0 {
                assert_eq!(*h_train, 0.0);
                continue;
            }
            total += 1;
            if *h_train == 0.0 && *h_eval != 0.0 {
                dropped += 1;
            } else {
                assert!((h_train - h_eval / (1.0 - rate)).abs() < 1e-12);
            }
        }
        let again = head.forward::<rng::StreamRng>(&store, &f, None);
        assert_eq!(eval.probs, again.probs);
    }
    let frac = dropped as f64 / total as f64;
    assert!((frac - rate).abs() < 0.05, "{frac}");
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn head_gradients_match_central_differences() {
    let h = 1e-4;
    for (draw_id, mode) in (0..10u64).zip([HeadMode::BinarySigmoid, HeadMode::MulticlassSoftmax, HeadMode::MultilabelSigmoid].iter().cycle()) {
        let classes = if *mode == HeadMode::BinarySigmoid { 2 } else { 3 };
        let (head, mut store) = head(*mode, classes, 0.0, 4, draw_id);
        let mut draw = rng::stream(100 + draw_id, &[]);
        let features: Vec<FeatureMap> = (0..3).map(|_| random_features(&mut draw, 4)).collect();
        let k = head.config().output_dim();
        let targets: Vec<Vec<f64>> = (0..3)
            .map(|_| match mode {
                HeadMode::MulticlassSoftmax => {
                    let hot = draw.random_range(0..k);
                    (0..k).map(|c| f64::from(u8::from(c == hot))).collect()
                }
                _ => (0..k).map(|_| f64::from(u8::from(draw.random::<bool>()))).collect(),
            })
            .collect();
        let (_, grads) = head.loss_and_gradients(&store, &features, &targets, None);
        for pi in 0..store.len() {
            let len = store.iter().nth(pi).unwrap().values.len();
            for _ in 0..5 {
                let j = draw.random_range(0..len);
                let orig = store.iter().nth(pi).unwrap().values[j];
                store.iter_mut().nth(pi).unwrap().values[j] = orig + h;
                let up = head.loss_and_gradients(&store, &features, &targets, None).0;
                store.iter_mut().nth(pi).unwrap().values[j] = orig - h;
                let down = head.loss_and_gradients(&store, &features, &targets, None).0;
                store.iter_mut().nth(pi).unwrap().values[j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.by_index(pi)[j];
                if numeric.abs() < 1e-7 && analytic.abs() < 1e-7 {
                    continue;
                }
                assert!(
                    relative_error(numeric, analytic) < 1e-3,
                    "draw {draw_id} param {pi}[{j}]: {numeric} vs {analytic}"
                );
            }
        }
    }
}

#[test]
fn untrained_model_is_near_chance_on_balanced_data() {
    let model = common::toy_model(21);
    let mut draw = rng::stream(22, &[]);
    let mut correct = 0usize;
    for i in 0..200 {
        let label = i % 2;
        let rgb = [draw.random::<f32>(), draw.random::<f32>(), draw.random::<f32>()];
        let img = ImageTensor::filled(224, 224, rgb, Normalization::Unit0To1);
        let probs = model.predict_images(&[img]).unwrap();
        if model.predicted_class(&probs[0], 0.5) == label {
            correct += 1;
        }
    }
    let acc = correct as f64 / 200.0;
    assert!((0.35..=0.65).contains(&acc), "{acc}");
}

#[test]
fn last_two_blocks_of_mobilenet_shape() {
    let backbone = PretrainedBackbone::initialized(BackboneArch::mobilenet_v2_shape(), 0);
    let mut model =
        ClassifierModel::assemble(backbone, HeadConfig::default(), InputAdapterPolicy::default(), 0).unwrap();
    assert_eq!(model.head().parameter_count(), 164_097);
    let groups = model.contract().parameter_groups;
    assert_eq!(groups.len(), 5);
    model.set_trainability("last_two_blocks".parse::<UnfreezeStage>().unwrap()).unwrap();
    for g in &groups[..3] {
        assert!(!model.is_trainable(g), "{g}");
    }
    for g in &groups[3..] {
        assert!(model.is_trainable(g), "{g}");
    }
    assert!(model.is_trainable("head"));
    assert!(model.set_trainability(UnfreezeStage::LastBlocks(6)).is_err());
}

#[test]
fn adapters_reach_the_target_size() {
    let src = ImageTensor::filled(300, 400, [0.2, 0.4, 0.6], Normalization::Unit0To1);
    for kind in [AdapterKind::Resize, AdapterKind::CenterCrop, AdapterKind::PadToFit] {
        let policy = InputAdapterPolicy {
            policy: kind,
            target: (224, 224),
        };
        let out = adapt_input(&src, &policy).unwrap();
        assert_eq!((out.height(), out.width()), (224, 224), "{kind:?}");
        assert_eq!(out.normalization(), Normalization::Unit0To1);
        // A uniform image stays uniform under every policy.
        for v in out.channel_means().iter().zip([0.2f32, 0.4, 0.6]) {
            assert!((v.0 - v.1).abs() < 1e-5, "{kind:?}");
        }
    }
    let tiny = InputAdapterPolicy::resize(4, 4);
    assert!(adapt_input(&src, &tiny).is_err());
}
