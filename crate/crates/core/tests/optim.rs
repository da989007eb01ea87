use tripath_core::data::TripletDataset;
use tripath_core::eval::Predictor;
use tripath_core::exec::Serial;
use tripath_core::network::{Architecture, LabelHead, Model, TriPathNet};
use tripath_core::optim::{
    fine_tune, lbfgs_minimize, lbfgs_train, pipeline_baseline_train, sgd_train, train_joint, Context, LbfgsConfig,
    OptimizerConfig, SgdConfig, Silent, TrainPlan,
};
use tripath_core::rbm::PretrainConfig;
use tripath_core::{Error, Matrix, Rng};

fn arch() -> Architecture {
    Architecture::new(8, vec![6, 4], 3, LabelHead::Deep).unwrap()
}

/// Class c lights up pixels c, c+3, c+6; the noisy copy flips a few bits.
fn toy_data(n: usize, seed: u64) -> TripletDataset {
    let mut rng = Rng::new(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
    let clean = Matrix::from_fn(n, 8, |r, c| if c % 3 == labels[r] { 1.0 } else { 0.0 });
    let noisy = clean.map(|v| if rng.bernoulli(0.1) { 1.0 - v } else { v });
    let mut onehot = Matrix::zeros(n, 3);
    for (r, &l) in labels.iter().enumerate() {
        onehot.set(r, l, 1.0);
    }
    TripletDataset::new(clean, noisy, onehot, 8, 1).unwrap()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn lbfgs_on_a_tiny_network_reduces_loss_and_gradient() {
    let net = TriPathNet::random(&arch(), 1.0, 17).unwrap();
    let data = toy_data(40, 1);
    let scale = 1.0 / data.len() as f64;
    let objective = |x: &[f64]| {
        let (t, g) = net.with_params(x)?.loss_and_gradient(&data, &Serial)?;
        Ok((t.scaled(scale), g.iter().map(|v| v * scale).collect()))
    };
    let (f0, g0) = objective(&net.flatten()).unwrap();
    let cfg = LbfgsConfig {
        max_iterations: 150,
        ..LbfgsConfig::default()
    };
    let out = lbfgs_minimize(objective, net.flatten().0, &cfg, &Silent).unwrap();
    assert!(out.loss.total < f0.total);
    assert!(
        inf_norm(&out.gradient) * 10.0 <= inf_norm(&g0),
        "{} -> {}",
        inf_norm(&g0),
        inf_norm(&out.gradient)
    );
    let losses: Vec<f64> = out.history.records.iter().map(|r| r.loss).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn lbfgs_train_leaves_the_input_alone_and_records_mean_loss() {
    let net = TriPathNet::random(&arch(), 1.0, 3).unwrap();
    let before = net.clone();
    let data = toy_data(30, 2);
    let cfg = LbfgsConfig {
        max_iterations: 20,
        ..LbfgsConfig::default()
    };
    let (trained, history, _) = lbfgs_train(&net, &data, &cfg, Context::serial()).unwrap();
    assert_eq!(net, before);
    assert_ne!(trained, net);
    let first = history.first().unwrap();
    assert_eq!(first.iteration, 0);
    let mean = net.joint_loss(&data).unwrap().total / 30.0;
    assert!((first.loss - mean).abs() <= 1e-12 * mean);
    assert!(history.last().unwrap().loss < first.loss);
}

#[test]
fn lbfgs_rotating_mega_batches_keeps_iterations_increasing() {
    let net = TriPathNet::random(&arch(), 1.0, 3).unwrap();
    let data = toy_data(50, 4);
    let cfg = LbfgsConfig {
        max_iterations: 12,
        mega_batch: 20,
        batch_iterations: Some(4),
        seed: 9,
        ..LbfgsConfig::default()
    };
    let (a, history, _) = lbfgs_train(&net, &data, &cfg, Context::serial()).unwrap();
    let its: Vec<usize> = history.records.iter().map(|r| r.iteration).collect();
    assert!(its.windows(2).all(|w| w[1] > w[0]), "{its:?}");
    assert_eq!(*its.last().unwrap(), 12);
    let (b, _, _) = lbfgs_train(&net, &data, &cfg, Context::serial()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sgd_with_zero_learning_rate_changes_nothing() {
    let net = TriPathNet::random(&arch(), 1.0, 5).unwrap();
    let cfg = SgdConfig {
        learning_rate: 0.0,
        epochs: 3,
        ..SgdConfig::default()
    };
    let (trained, history) = sgd_train(&net, &toy_data(25, 3), &cfg, Context::serial()).unwrap();
    assert_eq!(trained.flatten(), net.flatten());
    assert_eq!(history.records.len(), 4);
}

#[test]
fn sgd_memorizes_one_example() {
    let net = TriPathNet::random(&arch(), 1.0, 6).unwrap();
    let one = toy_data(1, 7);
    let cfg = SgdConfig {
        learning_rate: 0.5,
        batch_size: 1,
        epochs: 200,
        ..SgdConfig::default()
    };
    let before = net.joint_loss(&one).unwrap().total;
    let (trained, _) = sgd_train(&net, &one, &cfg, Context::serial()).unwrap();
    let after = trained.joint_loss(&one).unwrap().total;
    assert!(after <= 0.1 * before, "{before} -> {after}");
}

#[test]
fn sgd_is_deterministic_for_a_seed() {
    let net = TriPathNet::random(&arch(), 1.0, 8).unwrap();
    let data = toy_data(64, 8);
    let cfg = SgdConfig {
        epochs: 4,
        batch_size: 10,
        seed: 77,
        ..SgdConfig::default()
    };
    let a = sgd_train(&net, &data, &cfg, Context::serial()).unwrap();
    let b = sgd_train(&net, &data, &cfg, Context::serial()).unwrap();
    assert_eq!(a.0.flatten(), b.0.flatten());
    assert_eq!(a.1, b.1);
    let c = sgd_train(&net, &data, &SgdConfig { seed: 78, ..cfg }, Context::serial()).unwrap();
    assert_ne!(a.0.flatten(), c.0.flatten());
}

#[test]
fn sgd_aborts_when_training_diverges() {
    // Start from a good fit so that saturated outputs, whose loss the log
    // clamp bounds, still cost far more than the starting point. Momentum
    // near one with a huge step then keeps the weights saturated.
    let data = toy_data(40, 9);
    let fit = LbfgsConfig {
        max_iterations: 10,
        ..LbfgsConfig::default()
    };
    let (net, _, _) = lbfgs_train(
        &TriPathNet::random(&arch(), 1.0, 9).unwrap(),
        &data,
        &fit,
        Context::serial(),
    )
    .unwrap();
    let cfg = SgdConfig {
        learning_rate: 5000.0,
        momentum: 0.99,
        batch_size: 5,
        epochs: 30,
        seed: 1,
    };
    match sgd_train(&net, &data, &cfg, Context::serial()) {
        Err(Error::Diverged { epoch, loss, initial }) => {
            assert!(epoch >= 3);
            assert!(loss > 10.0 * initial);
        }
        other => panic!("expected divergence, got {:?}", other.map(|(_, h)| h)),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let net = TriPathNet::random(&arch(), 1.0, 9).unwrap();
    let data = toy_data(5, 1);
    let bad = SgdConfig {
        momentum: 1.0,
        ..SgdConfig::default()
    };
    assert!(sgd_train(&net, &data, &bad, Context::serial()).is_err());
    let bad = LbfgsConfig {
        memory: 0,
        ..LbfgsConfig::default()
    };
    assert!(lbfgs_train(&net, &data, &bad, Context::serial()).is_err());
}

#[test]
fn denoiser_stage_never_touches_the_label_decoder() {
    let net = TriPathNet::random(&arch(), 0.0, 10).unwrap();
    let opt = OptimizerConfig::Lbfgs(LbfgsConfig {
        max_iterations: 10,
        ..LbfgsConfig::default()
    });
    let (trained, _) = fine_tune(&net, &toy_data(30, 10), &opt, Context::serial()).unwrap();
    assert_eq!(trained.decoder_lab(), net.decoder_lab());
    assert_ne!(trained.encoder(), net.encoder());
}

fn quick_plan(pretrain: bool) -> TrainPlan {
    TrainPlan {
        pretrain: pretrain.then(|| PretrainConfig {
            epochs: 2,
            batch_size: 10,
            ..PretrainConfig::default()
        }),
        optimizer: OptimizerConfig::Lbfgs(LbfgsConfig {
            max_iterations: 15,
            ..LbfgsConfig::default()
        }),
        seed: 4,
    }
}

#[test]
fn joint_training_with_and_without_pretraining() {
    let data = toy_data(60, 11);
    let with = train_joint(&data, &arch(), 1.0, &quick_plan(true), Context::serial()).unwrap();
    let stack = with.stack.as_ref().unwrap();
    assert_eq!(stack.rbms.len(), 2);
    assert_eq!(with.net.encoder()[0].w.shape(), (8, 6));
    let without = train_joint(&data, &arch(), 1.0, &quick_plan(false), Context::serial()).unwrap();
    assert!(without.stack.is_none());
    for run in [&with, &without] {
        assert!(run.history.last().unwrap().loss < run.history.first().unwrap().loss);
    }
}

#[test]
fn pipeline_predicts_one_score_row_per_image() {
    let data = toy_data(60, 12);
    let models = pipeline_baseline_train(&data, &arch(), &quick_plan(true), Context::serial()).unwrap();
    assert_eq!(models.denoiser.lambda(), 0.0);
    let p = models.predict(data.noisy()).unwrap();
    assert_eq!(p.scores.shape(), (60, 3));
    assert_eq!(p.images.shape(), (60, 8));
    assert_eq!(p.classes.len(), 60);
    assert_eq!(p.scores, models.classifier.scores(&p.images).unwrap());
}
