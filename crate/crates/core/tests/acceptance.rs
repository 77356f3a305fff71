//! Acceptance suite: one PASS/FAIL line per criterion, then a non-zero exit
//! if any failed. Runs without the libtest harness so the lines reach
//! stdout under a plain `cargo test`.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use gazefuse::cli::{self, EvalOutput, FixtureSpec, ProjectConfig};
use gazefuse::eval::{parse_predictions, predictions_to_csv, roc_auc, PredictionRecord};
use gazefuse::features::{decode_record, encode_record, FeatureStore, TokenSequence};
use gazefuse::gradcheck::{self, GradCheckConfig, GradCheckReport, Probe};
use gazefuse::model::{
    load_checkpoint, save_checkpoint, BaselineCnnConfig, Bound, FusionModel, FusionModelConfig, Mode, ModelCheckpoint, Network,
    TrainingMeta, ViewPair,
};
use gazefuse::optim::synthetic::{planted_image_task, PlantedSetup};
use gazefuse::optim::{bce_with_logits, train, Adam, AdamConfig, TrainConfig};
use gazefuse::pipeline::{
    annotations_to_csv, balance_test, estimate_audio_offset, parse_annotations, parse_wav, temporal_split, write_wav_i16, Eligibility,
    EventAnnotation, MonoAudio, Quality, SampleRef, DEFAULT_MAX_LAG_S, DEFAULT_MIN_CONFIDENCE,
};
use gazefuse::tensor::{sigmoid, Scalar};
use gazefuse::{Error, Tape, Task, Tensor, Var, View};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0f32..1.0)).collect()).unwrap()
}

// ── gradient fidelity ───────────────────────────────────────────────

fn grads(name: &str, report: gazefuse::Result<GradCheckReport>, worst: &mut f64, total: &mut usize) -> Result<(), String> {
    let r = ok(report, name)?;
    ensure!(r.checked > 0 && r.passed(), "{name}: max rel err {:.2e}, {} failures", r.max_rel_error, r.failures.len());
    *worst = worst.max(r.max_rel_error);
    *total += r.checked;
    Ok(())
}

struct LossProbe<'a> {
    model: &'a FusionModel,
    batch: Vec<(ViewPair, f32)>,
}

impl Probe for LossProbe<'_> {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> gazefuse::Result<Var> {
        let bound = Bound { vars: inputs.to_vec() };
        let mut logits = Vec::new();
        for (x, _) in &self.batch {
            logits.push(self.model.forward(tape, &bound, x, &mut Mode::Eval)?);
        }
        let z = tape.concat(&logits, 0)?;
        let y: Vec<f32> = self.batch.iter().map(|b| b.1).collect();
        tape.bce_with_logits(z, &y)
    }
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let cfg = GradCheckConfig::default();
    ensure!(cfg.eps == 1e-3 && cfg.tolerance == 1e-3, "checker not at eps 1e-3 / tolerance 1e-3");
    let (mut worst, mut total) = (0.0f64, 0usize);
    macro_rules! g {
        ($name:expr, $inputs:expr, |$t:ident, $v:ident| $body:expr) => {
            grads($name, gazefuse::gradcheck!($inputs, &cfg, |$t, $v| $body), &mut worst, &mut total)?
        };
    }
    let mut kinkless = random(&[3, 5], 16);
    for v in kinkless.data_mut() {
        *v = v.signum() * (v.abs() + 0.01);
    }
    let mut pool_vals: Vec<f32> = (0..32).map(|i| i as f32 * 0.05).collect();
    let mut r = ChaCha8Rng::seed_from_u64(28);
    for i in (1..pool_vals.len()).rev() {
        pool_vals.swap(i, r.random_range(0..=i));
    }
    let pool = Tensor::new([2, 4, 4], pool_vals).unwrap();

    g!("matmul", &[random(&[3, 4], 1), random(&[4, 2], 2)], |t, v| t.matmul(v[0], v[1]));
    g!("add", &[random(&[2, 3], 3), random(&[2, 3], 4)], |t, v| t.add(v[0], v[1]));
    g!("mul", &[random(&[2, 3], 3), random(&[2, 3], 4)], |t, v| t.mul(v[0], v[1]));
    g!("scale", &[random(&[2, 3], 5)], |t, v| t.scale(v[0], -2.5));
    g!("add_bias", &[random(&[3, 4], 6), random(&[4], 7)], |t, v| t.add_bias(v[0], v[1]));
    g!("relu", &[kinkless], |t, v| t.relu(v[0]));
    g!("sigmoid", &[random(&[3, 5], 8)], |t, v| t.sigmoid(v[0]));
    g!("softmax", &[random(&[3, 4], 9)], |t, v| t.softmax(v[0], 1));
    g!("softmax axis 0", &[random(&[3, 4], 10)], |t, v| t.softmax(v[0], 0));
    g!("layer_norm", &[random(&[3, 6], 11), random(&[6], 12), random(&[6], 13)], |t, v| t.layer_norm(v[0], v[1], v[2], 1e-5));
    g!("dropout", &[random(&[4, 4], 14)], |t, v| {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        t.dropout(v[0], 0.426, true, &mut rng)
    });
    let conv = [random(&[2, 5, 5], 15), random(&[3, 2, 3, 3], 17), random(&[3], 18)];
    g!("conv2d", &conv, |t, v| t.conv2d(v[0], v[1], Some(v[2]), 1, 1));
    g!("max_pool2d", &[pool.clone()], |t, v| t.max_pool2d(v[0], 2, 2));
    g!("adaptive_avg_pool2d", &[pool], |t, v| t.adaptive_avg_pool2d(v[0]));
    g!("concat", &[random(&[2, 3], 19), random(&[2, 2], 20)], |t, v| t.concat(&[v[0], v[1]], 1));
    g!("embedding_lookup", &[random(&[4, 3], 21)], |t, v| t.embedding_lookup(v[0], &[2, 0, 2, 3]));
    g!("transpose", &[random(&[2, 5], 22)], |t, v| t.transpose(v[0]));
    g!("slice_cols", &[random(&[3, 5], 23)], |t, v| t.slice_cols(v[0], 1, 4));
    g!("reshape", &[random(&[2, 6], 24)], |t, v| t.reshape(v[0], [3, 4]));
    g!("sum", &[random(&[2, 6], 25)], |t, v| t.sum(v[0]));
    g!("mean", &[random(&[2, 6], 26)], |t, v| t.mean(v[0]));
    g!("bce_with_logits", &[random(&[5], 27)], |t, v| t.bce_with_logits(v[0], &[1.0, 0.0, 1.0, 1.0, 0.0]));

    let mcfg = FusionModelConfig::tiny();
    ensure!(
        (mcfg.feature_dim_in, mcfg.embed_dim, mcfg.encoder_layers, mcfg.attention_heads, mcfg.tokens_per_view) == (8, 16, 2, 2, 4),
        "tiny config drifted: {mcfg:?}"
    );
    let model = ok(FusionModel::new(mcfg.clone(), 21), "model")?;
    let s = [mcfg.tokens_per_view, mcfg.feature_dim_in];
    let pair = |k| ViewPair {
        infant: random(&s, k),
        parent: random(&s, k + 1000),
    };
    let probe = LossProbe {
        model: &model,
        batch: vec![(pair(40), 1.0), (pair(41), 0.0)],
    };
    // Through thousands of f32 ops, gradients under 1e-4 are judged on absolute error.
    let model_cfg = GradCheckConfig {
        scale_floor: 1e-4,
        ..cfg
    };
    let r = ok(gradcheck::check(model.params().tensors(), &model_cfg, &probe), "tiny fusion model")?;
    ensure!(r.checked == model.params().numel(), "only {} of {} weights checked", r.checked, model.params().numel());
    ensure!(r.passed(), "tiny fusion model: max rel err {:.2e}, {} failures", r.max_rel_error, r.failures.len());
    worst = worst.max(r.max_rel_error);
    total += r.checked;

    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}, limit 60 s");
    Ok(format!("{total} coordinates, max rel err {worst:.2e}, {elapsed:.1?}"))
}

// ── analytic values ─────────────────────────────────────────────────

fn analytic_values() -> Outcome {
    let bce = ok(bce_with_logits(&[0.0], &[1.0]), "bce")?;
    ensure!((bce - std::f64::consts::LN_2).abs() <= 1e-6, "bce(0, 1) = {bce}");
    ensure!(sigmoid(0.0f64) == 0.5 && sigmoid(0.0f32) == 0.5, "sigmoid(0) != 0.5");
    let lr = 1e-3;
    for g in [0.5f32, -0.25, 3.0, -7.5] {
        let mut p = vec![Tensor::new([1], vec![0.0]).unwrap()];
        let mut opt = Adam::new(
            &p,
            AdamConfig {
                learning_rate: lr,
                ..Default::default()
            },
        );
        ok(opt.step(&mut p, &[Tensor::new([1], vec![g]).unwrap()]), "adam")?;
        let d = p[0].data()[0] as f64;
        ensure!(d.signum() == -(g as f64).signum(), "adam moved with the gradient for g={g}");
        ensure!((d.abs() - lr).abs() <= lr * 1e-6, "adam first step |Δ|={} for g={g}", d.abs());
    }
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::full([2, 5], 3.25));
    let gamma = tape.constant(Tensor::full([5], 1.7));
    let beta = tape.constant(Tensor::zeros([5]));
    let y = ok(tape.layer_norm(x, gamma, beta, 1e-5), "layer_norm")?;
    ensure!(tape.value(y).data().iter().all(|&v| v == 0.0), "constant row normalised to {:?}", tape.value(y).data());
    Ok(format!("bce(0,1) - ln 2 = {:.1e}", bce - std::f64::consts::LN_2))
}

// ── synthetic relational task ───────────────────────────────────────

fn synthetic_relational() -> Outcome {
    let start = Instant::now();
    let setup = PlantedSetup::default();
    ensure!(setup.model.feature_dim_in == 8 && setup.train.max_epochs <= 200, "planted setup is not the tiny 200-epoch run");
    let r = ok(setup.run(0), "planted run")?;
    ensure!(r.train_f1 >= 0.99, "train F1 {:.3}", r.train_f1);
    ensure!(r.test_auc >= 0.95, "held-out AUC {:.3}", r.test_auc);

    let data = planted_image_task(16, 16, 3);
    let mut cnn = ok(gazefuse::model::CnnBaseline::new(BaselineCnnConfig::tiny(), 0), "cnn")?;
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        max_epochs: 5,
        ..Default::default()
    };
    let out = ok(train(&mut cnn, Task::MutualGaze, &data[..12], &data[12..], &cfg), "cnn training")?;
    ensure!(out.history.step_losses.iter().all(|l| l.is_finite()), "cnn loss diverged");

    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:.1?}, limit 5 min");
    Ok(format!("train F1 {:.3}, test AUC {:.3}, CNN {} epochs, {elapsed:.1?}", r.train_f1, r.test_auc, out.history.epochs.len()))
}

// ── default config ──────────────────────────────────────────────────

fn default_config() -> Outcome {
    let m = FusionModelConfig::default();
    let t = TrainConfig::default();
    let snapshot = format!(
        "layers={} heads={} dim={} dropout={} head={:?} lr={:e} batch={} betas=({}, {}) eps={:e}",
        m.encoder_layers, m.attention_heads, m.embed_dim, m.dropout, m.head_layer_sizes, t.learning_rate, t.batch_size,
        t.adam_beta1, t.adam_beta2, t.adam_eps
    );
    let want = "layers=3 heads=4 dim=512 dropout=0.426 head=[512, 128, 64, 1] lr=6.1e-6 batch=8 betas=(0.9, 0.999) eps=1e-8";
    ensure!(snapshot == want, "got {snapshot}");
    // Adam is the only optimizer and BCE-with-logits the only loss the trainer uses.
    let a = t.adam();
    ensure!(a.learning_rate == 6.1e-6, "adam lr {}", a.learning_rate);
    let p = ProjectConfig::default();
    ensure!(p.model == m && p.train == t, "project defaults differ from the model defaults");
    ok(FusionModel::new(m, 0), "building the default model")?;
    Ok(snapshot)
}

// ── sync recovery ───────────────────────────────────────────────────

const RATE: u32 = 8000;

fn bursts(seconds: f64, seed: u64) -> Vec<f32> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < (seconds * RATE as f64) as usize {
        let len = r.random_range(RATE as usize / 20..RATE as usize / 2);
        let amp = if r.random_bool(0.5) { r.random_range(0.1f32..0.8) } else { 0.0 };
        out.extend((0..len).map(|_| amp * r.random_range(-1.0f32..1.0)));
    }
    out
}

fn wav_round_trip(dir: &Path, name: &str, samples: Vec<f32>) -> Result<MonoAudio, String> {
    let p = dir.join(name);
    ok(write_wav_i16(&p, &MonoAudio { rate: RATE, samples }), "write wav")?;
    ok(parse_wav(&p), "parse wav")
}

fn sync_recovery() -> Outcome {
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    let scene = bursts(34.0, 11);
    let lead = 2 * RATE as usize;
    let a: Vec<f32> = scene[lead..lead + 30 * RATE as usize].to_vec();
    let a = wav_round_trip(dir.path(), "a.wav", a)?;
    let mut worst: f64 = 0.0;
    for d in [-0.9, 0.37, 1.0] {
        // B hears the scene d seconds later: b[n] = scene(n/rate - d).
        let shift = (d * RATE as f64).round() as i64;
        let b: Vec<f32> = (0..30 * RATE as i64).map(|n| scene[(lead as i64 + n - shift) as usize]).collect();
        let b = wav_round_trip(dir.path(), "b.wav", b)?;
        let fwd = ok(estimate_audio_offset(&a, &b, DEFAULT_MAX_LAG_S, DEFAULT_MIN_CONFIDENCE), "estimate")?;
        let back = ok(estimate_audio_offset(&b, &a, DEFAULT_MAX_LAG_S, DEFAULT_MIN_CONFIDENCE), "estimate")?;
        ensure!((fwd.offset_s - d).abs() <= 0.02, "injected {d:+}, recovered {:+.4}", fwd.offset_s);
        ensure!(!fwd.low_confidence, "injected {d:+} flagged (confidence {:.3})", fwd.confidence);
        ensure!((fwd.offset_s + back.offset_s).abs() <= 0.01, "anti-symmetry {:+.4} vs {:+.4}", fwd.offset_s, back.offset_s);
        worst = worst.max((fwd.offset_s - d).abs());
    }
    let silent = wav_round_trip(dir.path(), "s.wav", vec![0.0; 30 * RATE as usize])?;
    for (x, y) in [(&a, &silent), (&silent, &a), (&silent, &silent)] {
        match estimate_audio_offset(x, y, DEFAULT_MAX_LAG_S, DEFAULT_MIN_CONFIDENCE) {
            Err(Error::LowConfidenceSync { .. }) => {}
            Ok(e) if e.low_confidence => {}
            other => return Err(format!("silent pair not flagged: {other:?}")),
        }
    }
    Ok(format!("max error {:.1} ms, silent pairs flagged", worst * 1000.0))
}

// ── split / balance ─────────────────────────────────────────────────

fn sample(session: &str, k: usize, label: bool) -> SampleRef {
    SampleRef {
        session: session.into(),
        tick_s: k as f64,
        infant_s: k as f64,
        parent_s: k as f64 + 0.25,
        label,
        eligibility: Eligibility::Any,
    }
}

fn split_balance() -> Outcome {
    let mut samples: Vec<SampleRef> = (0..100).rev().map(|k| sample("a", k, k % 3 == 0)).collect();
    samples.extend((0..40).map(|k| sample("h", k, k % 4 == 0)));
    let split = ok(temporal_split(&samples, &["h".to_string()], 0.10, Task::MutualGaze), "split")?;
    let val: Vec<f64> = split.validation.iter().map(|s| s.tick_s).collect();
    ensure!(val == (0..10).map(|k| k as f64).collect::<Vec<_>>(), "validation ticks {val:?}");
    ensure!(split.train.len() == 90 && split.train.iter().all(|s| s.session == "a" && s.tick_s >= 10.0), "train is not the 90 later ticks");
    ensure!(split.test.len() == 40 && split.test.iter().all(|s| s.session == "h"), "held-out session not wholly in test");

    let pos = split.test.iter().filter(|s| s.label).count();
    let neg = split.test.len() - pos;
    let a = ok(balance_test(&split.test, 5), "balance")?;
    let b = ok(balance_test(&split.test, 5), "balance")?;
    let bp = a.iter().filter(|s| s.label).count();
    ensure!(bp == pos.min(neg) && a.len() == 2 * pos.min(neg), "balanced {bp}/{} from {pos}/{neg}", a.len() - bp);
    let bits = |v: &[SampleRef]| v.iter().map(|s| (s.session.clone(), s.tick_s.to_bits(), s.parent_s.to_bits(), s.label)).collect::<Vec<_>>();
    ensure!(bits(&a) == bits(&b), "same seed gave different balanced sets");
    Ok(format!("10 val + 90 train, test 40, balanced {bp}+{bp} from {pos}/{neg}"))
}

// ── AUC oracle ──────────────────────────────────────────────────────

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn auc_oracle() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    let mut instances = 0;
    while instances < 50 {
        let n = r.random_range(2..=200);
        // Coarse grid forces ties.
        let scores: Vec<f64> = (0..n).map(|_| (r.random_range(0..20) as f64) / 20.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let auc = ok(roc_auc(&scores, &labels), "auc")?;
        let oracle = pairwise_auc(&scores, &labels);
        ensure!(auc == oracle, "n={n}: rank AUC {auc} vs pairwise {oracle}");
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        ensure!(ok(roc_auc(&warped, &labels), "auc")? == auc, "monotone transform changed AUC at n={n}");
        instances += 1;
    }
    Ok(format!("{instances} instances exact, monotone invariance holds"))
}

// ── format round-trips ──────────────────────────────────────────────

fn format_round_trips() -> Outcome {
    let dir = ok(tempfile::tempdir(), "tempdir")?;

    let seq = ok(TokenSequence::new("s01", View::Parent, 12.345, random(&[4, 8], 3)), "tokens")?;
    let store = FeatureStore::new(dir.path().join("features"));
    ok(store.write(&seq), "store write")?;
    let back = ok(store.read("s01", View::Parent, 12.345), "store read")?;
    ensure!(back == seq, "feature record changed in the store");
    let bytes = ok(encode_record(&seq), "encode")?;
    ensure!(decode_record(&bytes[..bytes.len() - 3], "t").is_err(), "truncated feature record decoded");
    let mut flipped = bytes.clone();
    flipped[0] ^= 0xff;
    ensure!(decode_record(&flipped, "t").is_err(), "bad magic decoded");

    let model = ok(FusionModel::new(FusionModelConfig::tiny(), 4), "model")?;
    let meta = TrainingMeta {
        task: Task::JointAttention,
        epoch: 3,
        seed: 4,
        val_f1: Some(0.5),
    };
    let ckpt = ModelCheckpoint::from_model(&model, meta);
    let path = dir.path().join("m.gfck");
    ok(save_checkpoint(&ckpt, &path), "save checkpoint")?;
    let loaded = ok(load_checkpoint(&path), "load checkpoint")?;
    ensure!(ok(loaded.to_bytes(), "bytes")? == ok(ckpt.to_bytes(), "bytes")?, "checkpoint bytes changed");
    let raw = ok(fs::read(&path), "read")?;
    match ModelCheckpoint::from_bytes(&raw[..raw.len() / 2]) {
        Err(Error::CorruptCheckpoint(_) | Error::Format { .. }) => {}
        other => return Err(format!("truncated checkpoint: {other:?}")),
    }

    let events = vec![
        ok(EventAnnotation::new(Task::MutualGaze, 0.1, 2.345, Quality::Confident), "event")?,
        ok(EventAnnotation::new(Task::JointAttention, 10.0 / 3.0, 7.25, Quality::Ambiguous), "event")?,
    ];
    let text = annotations_to_csv(&events);
    let parsed = ok(parse_annotations(&text, "a"), "annotations")?;
    ensure!(parsed == events && annotations_to_csv(&parsed) == text, "annotation CSV changed");
    let broken = text.replace("7.25", "x7");
    ensure!(matches!(parse_annotations(&broken, "a"), Err(Error::Row { .. })), "bad annotation row accepted");

    let preds = vec![
        PredictionRecord {
            session: "s03".into(),
            timestamp_s: 4.0,
            task: Task::MutualGaze,
            probability: 0.1 + 0.2,
            label: Some(true),
        },
        PredictionRecord {
            session: "s03".into(),
            timestamp_s: 5.0,
            task: Task::JointAttention,
            probability: 1.0 / 7.0,
            label: None,
        },
    ];
    let text = predictions_to_csv(&preds);
    let parsed = ok(parse_predictions(&text, "p"), "predictions")?;
    ensure!(parsed == preds, "prediction CSV changed");
    ensure!(parsed.iter().zip(&preds).all(|(a, b)| a.probability.to_bits() == b.probability.to_bits()), "probability bits changed");
    let broken = text.replace("0.30000000000000004", "1.5");
    ensure!(parse_predictions(&broken, "p").is_err(), "out-of-range probability accepted");
    Ok("feature store, checkpoint, annotation and prediction CSV bit-exact; corrupt inputs rejected".into())
}

// ── end-to-end fixture ──────────────────────────────────────────────

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end() -> Outcome {
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    ok(cli::generate_fixture(dir.path(), &FixtureSpec::default()), "fixture")?;
    let cfg = dir.path().join("gazefuse.toml");
    let stages: &[&[&str]] = &[
        &["sync"],
        &["sample"],
        &["featurize", "--backbone", "toy"],
        &["dataset", "build"],
        &["dataset", "split"],
        &["dataset", "balance"],
        &["train", "--seeds", "0,1"],
        &["eval"],
        &["predict"],
        &["export-timeline"],
    ];
    let run_all = || -> Result<(), String> {
        for args in stages {
            let mut argv = vec!["gazefuse", "--config", cfg.to_str().unwrap()];
            argv.extend_from_slice(args);
            ok(cli::run(argv), &args.join(" "))?;
        }
        Ok(())
    };
    run_all()?;
    let mut summary = Vec::new();
    for task in Task::ALL {
        let path = dir.path().join("out").join(format!("eval_{task}.json"));
        let report: EvalOutput = ok(serde_json::from_str(&ok(fs::read_to_string(&path), "eval report")?), "eval report")?;
        ensure!(report.aggregate.runs == 2, "{task}: {} runs", report.aggregate.runs);
        for m in &report.aggregate.metrics {
            ensure!(m.min <= m.mean && m.mean <= m.max, "{task} {}: min {} mean {} max {}", m.metric, m.min, m.mean, m.max);
        }
        let f1 = report.aggregate.get("f1").map_or(f64::NAN, |m| m.mean);
        summary.push(format!("{task} F1 {f1:.3}"));
    }
    ensure!(dir.path().join("out/timeline_s03.txt").exists(), "no timeline written");
    let first = snapshot(dir.path());
    run_all()?;
    let second = snapshot(dir.path());
    ensure!(first.len() == second.len(), "rerun changed the file set");
    if let Some((k, _)) = first.iter().find(|(k, v)| second.get(*k) != Some(v)) {
        return Err(format!("{k} differs on rerun"));
    }
    Ok(format!("{}, {} files byte-identical on rerun", summary.join(", "), first.len()))
}

fn main() {
    // Stage summaries from the CLI are noise here; failures carry their own detail.
    let criteria: &[(&str, fn() -> Outcome)] = &[
        ("gradient fidelity", gradient_fidelity),
        ("analytic values", analytic_values),
        ("synthetic relational task", synthetic_relational),
        ("default-config fidelity", default_config),
        ("sync recovery", sync_recovery),
        ("split/balance determinism", split_balance),
        ("AUC oracle equivalence", auc_oracle),
        ("format round-trips", format_round_trips),
        ("end-to-end fixture", end_to_end),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{:.1?}]", start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
