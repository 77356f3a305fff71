use gazefuse::model::{BaselineCnnConfig, CnnBaseline, FusionModel, FusionModelConfig, Network};
use gazefuse::optim::synthetic::{planted_image_task, planted_token_task, PlantedSetup};
use gazefuse::optim::{bce_with_logits, run_multiseed, train, Adam, AdamConfig, Experiment, TrainConfig};
use gazefuse::eval::aggregate_runs;
use gazefuse::{Error, Tape, Task, Tensor};
use proptest::prelude::*;

fn naive_bce(z: f64, y: f64) -> f64 {
    let s = 1.0 / (1.0 + (-z).exp());
    -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
}

#[test]
fn bce_analytic_values() {
    assert!((bce_with_logits(&[0.0], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-6);
    let big = bce_with_logits(&[50.0], &[1.0]).unwrap();
    assert!(big.is_finite() && big < 1e-20);
    let wrong = bce_with_logits(&[50.0], &[0.0]).unwrap();
    assert!((wrong - 50.0).abs() < 1e-9);
    assert!(matches!(bce_with_logits(&[0.0], &[0.5]), Err(Error::Contract(_))));

    let mut tape = Tape::new();
    let z = tape.constant(Tensor::new([1], vec![0.0]).unwrap());
    let l = tape.bce_with_logits(z, &[1.0]).unwrap();
    assert!((tape.value(l).item().unwrap() as f64 - std::f64::consts::LN_2).abs() < 1e-6);
}

proptest! {
    #[test]
    fn bce_matches_naive_oracle(batch in prop::collection::vec((-15.0f32..15.0, any::<bool>()), 1..32)) {
        let z: Vec<f32> = batch.iter().map(|b| b.0).collect();
        let y: Vec<f32> = batch.iter().map(|b| f32::from(u8::from(b.1))).collect();
        let oracle = z.iter().zip(&y).map(|(&z, &y)| naive_bce(z as f64, y as f64)).sum::<f64>() / z.len() as f64;
        prop_assert!((bce_with_logits(&z, &y).unwrap() - oracle).abs() < 1e-5);

        let mut tape = Tape::new();
        let zv = tape.constant(Tensor::new([z.len()], z.clone()).unwrap());
        let l = tape.bce_with_logits(zv, &y).unwrap();
        prop_assert!((tape.value(l).item().unwrap() as f64 - oracle).abs() < 1e-5);
    }
}

#[test]
fn adam_first_step_moves_by_lr() {
    for g in [0.5f32, -0.25, 3.0, -7.5] {
        let lr = 1e-3;
        let mut p = vec![Tensor::new([1], vec![0.0]).unwrap()];
        let mut opt = Adam::new(&p, AdamConfig { learning_rate: lr, ..Default::default() });
        opt.step(&mut p, &[Tensor::new([1], vec![g]).unwrap()]).unwrap();
        let delta = p[0].data()[0] as f64;
        assert_eq!(delta.signum(), -(g as f64).signum());
        assert!((delta.abs() - lr).abs() <= lr * 1e-6, "g={g}: |Δ|={}", delta.abs());
    }
}

#[test]
fn adam_descends_a_parabola() {
    let mut p = vec![Tensor::new([1], vec![0.0]).unwrap()];
    let mut opt = Adam::new(&p, AdamConfig { learning_rate: 0.1, ..Default::default() });
    let f = |x: f32| ((x - 2.0) as f64).powi(2);
    let mut prev = f(p[0].data()[0]);
    for _ in 0..10 {
        let x = p[0].data()[0];
        opt.step(&mut p, &[Tensor::new([1], vec![2.0 * (x - 2.0)]).unwrap()]).unwrap();
        let now = f(p[0].data()[0]);
        assert!(now < prev, "{now} !< {prev}");
        prev = now;
    }
}

fn tiny_fusion(seed: u64) -> FusionModel {
    FusionModel::new(FusionModelConfig::tiny(), seed).unwrap()
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let data = planted_token_task(&FusionModelConfig::tiny(), 12, 0, 0.5, 1);
    let mut m = tiny_fusion(2);
    let before = m.params().clone();
    let cfg = TrainConfig { learning_rate: 0.0, max_epochs: 3, ..Default::default() };
    train(&mut m, Task::MutualGaze, &data, &data[..4], &cfg).unwrap();
    for (a, b) in before.tensors().iter().zip(m.params().tensors()) {
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn first_step_loss_is_untrained_bce() {
    let data = planted_token_task(&FusionModelConfig::tiny(), 10, 0, 0.5, 3);
    let m = tiny_fusion(4);
    let logits: Vec<f32> = data[..8].iter().map(|e| m.logit(&e.pair).unwrap()).collect();
    let labels: Vec<f32> = data[..8].iter().map(|e| e.label).collect();
    let expected = bce_with_logits(&logits, &labels).unwrap();
    let cfg = TrainConfig { shuffle_each_epoch: false, max_epochs: 1, ..Default::default() };
    let out = train(&mut m.clone(), Task::MutualGaze, &data, &[], &cfg).unwrap();
    assert!((out.history.step_losses[0] - expected).abs() < 1e-6, "{} vs {expected}", out.history.step_losses[0]);
    assert_eq!(out.history.step_losses.len(), 2, "last partial batch is kept");
}

#[test]
fn single_sample_loss_never_increases() {
    let data = planted_token_task(&FusionModelConfig::tiny(), 1, 0, 0.5, 5);
    let mut m = tiny_fusion(6);
    let cfg = TrainConfig { learning_rate: 1e-4, batch_size: 1, max_epochs: 20, ..Default::default() };
    let out = train(&mut m, Task::JointAttention, &data, &[], &cfg).unwrap();
    let losses: Vec<f64> = out.history.epochs.iter().map(|e| e.train_loss).collect();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0], "{losses:?}");
    }
    assert_eq!(out.best.meta.epoch, 20, "without validation the last epoch wins");
}

#[test]
fn training_is_deterministic_and_selects_max_f1() {
    let cfg_m = FusionModelConfig { dropout: 0.2, ..FusionModelConfig::tiny() };
    let data = planted_token_task(&cfg_m, 24, 0, 0.5, 7);
    let (tr, val) = data.split_at(16);
    let cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 12, seed: 9, ..Default::default() };
    let run = || {
        let mut m = FusionModel::new(cfg_m.clone(), 9).unwrap();
        train(&mut m, Task::MutualGaze, tr, val, &cfg).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.best, b.best);
    assert_eq!(a.history, b.history);

    let f1s: Vec<f64> = a.history.epochs.iter().map(|e| e.val.as_ref().unwrap().f1).collect();
    let max = f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = f1s.iter().position(|&f| f == max).unwrap() + 1;
    assert_eq!(a.best.meta.val_f1, Some(max));
    assert_eq!(a.best.meta.epoch as usize, first);
    let csv = a.history.to_csv();
    assert!(csv.starts_with("epoch,train_loss,val_accuracy,val_precision,val_recall,val_f1\n"));
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn nan_inputs_abort_with_epoch_and_step() {
    let mut data = planted_token_task(&FusionModelConfig::tiny(), 4, 0, 0.5, 1);
    data[0].pair.infant.data_mut()[0] = f32::NAN;
    let mut m = tiny_fusion(1);
    let cfg = TrainConfig { batch_size: 4, shuffle_each_epoch: false, ..Default::default() };
    let err = train(&mut m, Task::MutualGaze, &data, &[], &cfg).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { epoch: 1, step: 1 }), "{err}");
}

#[test]
fn planted_relational_task_is_learned() {
    for seed in [0, 1] {
        let r = PlantedSetup::default().run(seed).unwrap();
        assert!(r.train_f1 >= 0.99, "seed {seed}: train f1 {}", r.train_f1);
        assert!(r.test_auc >= 0.95, "seed {seed}: test auc {}", r.test_auc);
        assert_eq!(r.history.epochs.len(), 200);
    }
}

#[test]
fn cnn_trains_on_rasters() {
    let data = planted_image_task(16, 16, 3);
    let mut m = CnnBaseline::new(BaselineCnnConfig::tiny(), 0).unwrap();
    let cfg = TrainConfig { learning_rate: 1e-2, max_epochs: 5, ..Default::default() };
    let out = train(&mut m, Task::MutualGaze, &data[..12], &data[12..], &cfg).unwrap();
    assert_eq!(out.history.epochs.len(), 5);
    assert!(out.history.step_losses.iter().all(|l| l.is_finite()));
    out.best.into_cnn().unwrap();
}

#[test]
fn multiseed_runs_are_independent_of_order_and_threads() {
    let cfg_m = FusionModelConfig::tiny();
    let data = planted_token_task(&cfg_m, 24, 0, 0.5, 11);
    let test = planted_token_task(&cfg_m, 10, 0, 0.5, 12);
    let cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 4, ..Default::default() };
    let exp = Experiment { task: Task::MutualGaze, train: &data[..20], val: &data[20..], test: &test, config: &cfg };
    let build = |seed| FusionModel::new(FusionModelConfig::tiny(), seed);
    let seeds = [1, 2, 3, 4, 5];
    let runs = run_multiseed(build, &seeds, &exp, 1).unwrap();
    assert_eq!(runs.len(), 5);
    assert!(runs.iter().all(|r| r.report.samples == test.len()));
    let reversed = run_multiseed(build, &[5, 4, 3, 2, 1], &exp, 3).unwrap();
    for r in &runs {
        let twin = reversed.iter().find(|q| q.seed == r.seed).unwrap();
        assert_eq!(twin.report, r.report);
        assert_eq!(twin.best, r.best);
    }
    let agg = aggregate_runs(&runs.iter().map(|r| r.report.clone()).collect::<Vec<_>>()).unwrap();
    for m in &agg.metrics {
        assert!(m.min <= m.mean && m.mean <= m.max);
    }
    let one = run_multiseed(build, &[1], &exp, 1).unwrap();
    let agg = aggregate_runs(&[one[0].report.clone()]).unwrap();
    assert!(agg.metrics.iter().all(|m| m.minus() == 0.0 && m.plus() == 0.0));
}

#[test]
fn multiseed_failure_names_the_seed() {
    let data = planted_token_task(&FusionModelConfig::tiny(), 4, 0, 0.5, 1);
    let cfg = TrainConfig { max_epochs: 1, ..Default::default() };
    let exp = Experiment { task: Task::MutualGaze, train: &data, val: &[], test: &data, config: &cfg };
    let build = |seed| {
        let heads = if seed == 7 { 3 } else { 2 };
        FusionModel::new(FusionModelConfig { attention_heads: heads, ..FusionModelConfig::tiny() }, seed)
    };
    let err = run_multiseed(build, &[1, 7], &exp, 1).unwrap_err();
    assert!(matches!(err, Error::SeedRun { seed: 7, .. }), "{err}");
}
