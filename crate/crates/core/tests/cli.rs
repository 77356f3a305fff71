use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gazefuse::cli::stages::{self, EvalOutput};
use gazefuse::cli::{generate_fixture, run, FixtureSpec, ProjectConfig};
use gazefuse::eval::{read_predictions, TimelineDocument};
use gazefuse::pipeline::{write_wav_i16, MonoAudio};
use gazefuse::{Error, Task};

fn fixture(seconds: u32) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        duration_s: seconds,
        ..FixtureSpec::default()
    };
    generate_fixture(dir.path(), &spec).unwrap();
    let cfg = dir.path().join("gazefuse.toml");
    (dir, cfg)
}

fn gf(cfg: &Path, args: &[&str]) -> gazefuse::Result<()> {
    let mut argv = vec!["gazefuse", "--config", cfg.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

const PIPELINE: &[&[&str]] = &[
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

#[test]
fn full_fixture_pipeline_reports_and_reruns_byte_identically() {
    let (dir, cfg) = fixture(60);
    for args in PIPELINE {
        gf(&cfg, args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    }
    let out = dir.path().join("out");
    for task in Task::ALL {
        let report: EvalOutput = serde_json::from_str(&fs::read_to_string(out.join(stages::report_file(task))).unwrap()).unwrap();
        assert_eq!(report.runs.len(), 2);
        assert_eq!(report.aggregate.seeds, vec![0, 1]);
        assert!(!report.aggregate.metrics.is_empty());
        for m in &report.aggregate.metrics {
            assert!(m.min <= m.mean && m.mean <= m.max, "{task} {}: {m:?}", m.metric);
        }
        let preds = read_predictions(&out.join(stages::predictions_file(task))).unwrap();
        assert!(preds.iter().all(|p| p.session == "s03" && (0.0..=1.0).contains(&p.probability)));
    }
    let doc = TimelineDocument::parse(&fs::read_to_string(out.join("timeline_s03.txt")).unwrap()).unwrap();
    assert_eq!(doc.tracks.len(), 2);

    let offsets: BTreeMap<String, gazefuse::pipeline::SyncEstimate> =
        serde_json::from_str(&fs::read_to_string(out.join("offsets.json")).unwrap()).unwrap();
    for (s, want) in [("s01", 0.37), ("s02", -0.52), ("s03", 0.8)] {
        assert!((offsets[s].offset_s - want).abs() <= 0.02, "{s}: {}", offsets[s].offset_s);
    }

    let before = snapshot(dir.path());
    for args in PIPELINE {
        gf(&cfg, args).unwrap();
    }
    let after = snapshot(dir.path());
    assert_eq!(before.keys().collect::<Vec<_>>(), after.keys().collect::<Vec<_>>());
    for (k, v) in &before {
        assert!(after[k] == *v, "{} changed on rerun", k.display());
    }
}

#[test]
fn worker_count_does_not_change_artifacts() {
    let (a, cfg_a) = fixture(12);
    let (b, cfg_b) = fixture(12);
    for args in &PIPELINE[..6] {
        gf(&cfg_a, args).unwrap();
        let mut more = vec!["--workers", "3"];
        more.extend_from_slice(args);
        gf(&cfg_b, &more).unwrap();
    }
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn split_with_absent_held_out_session_is_a_config_error() {
    let (_dir, cfg) = fixture(10);
    for args in &PIPELINE[..4] {
        gf(&cfg, args).unwrap();
    }
    let err = gf(&cfg, &["dataset", "split", "--held-out", "s09"]).unwrap_err();
    assert!(matches!(err, Error::Config { .. }), "{err}");
}

#[test]
fn missing_upstream_artifact_names_its_producer() {
    let (_dir, cfg) = fixture(10);
    let cases: &[(&[&str], &str)] = &[
        (&["sample"], "sync"),
        (&["featurize"], "sample"),
        (&["dataset", "build"], "sample"),
        (&["dataset", "split", "--task", "mg"], "dataset build"),
        (&["dataset", "balance", "--task", "ja"], "dataset split"),
        (&["train", "--task", "mg"], "dataset split"),
        (&["eval", "--task", "mg"], "dataset balance"),
        (&["export-timeline"], "predict"),
    ];
    for (args, producer) in cases {
        match gf(&cfg, args) {
            Err(e @ Error::MissingArtifact { .. }) => {
                let Error::MissingArtifact { producer: p, .. } = &e else { unreachable!() };
                assert_eq!(p, producer, "{args:?}");
                assert!(e.to_string().contains(&format!("gazefuse {producer}")));
            }
            other => panic!("{args:?}: {other:?}"),
        }
    }
}

#[test]
fn silent_session_is_a_partial_failure_naming_it() {
    let (dir, cfg) = fixture(10);
    let wav = dir.path().join("media/s02/parent.wav");
    write_wav_i16(&wav, &MonoAudio { rate: 8000, samples: vec![0.0; 8000 * 10] }).unwrap();
    match gf(&cfg, &["sync"]) {
        Err(Error::PartialFailure { total, failed, sessions }) => {
            assert_eq!((total, failed), (3, 1));
            assert_eq!(sessions, vec!["s02".to_string()]);
        }
        other => panic!("{other:?}"),
    }
    assert!(!dir.path().join("out/offsets.json").exists());
}

#[test]
fn manifests_hash_every_input_and_track_changes() {
    let (dir, cfg) = fixture(10);
    gf(&cfg, &["sync"]).unwrap();
    let m = fs::read_to_string(dir.path().join("out/offsets.json.manifest")).unwrap();
    let lines: Vec<&str> = m.lines().collect();
    assert_eq!(lines[0], "gazefuse-manifest 1");
    assert_eq!(lines[1], "command sync");
    let inputs: Vec<&str> = lines.iter().filter(|l| l.starts_with("input ")).copied().collect();
    assert_eq!(inputs.len(), 6);
    let paths: Vec<&str> = inputs.iter().map(|l| l.split(' ').nth(2).unwrap()).collect();
    let mut sorted = paths.clone();
    sorted.sort();
    assert_eq!(paths, sorted);
    for l in &inputs {
        let f: Vec<&str> = l.split(' ').collect();
        assert_eq!(f[1], gazefuse::cli::project::sha256_file(&dir.path().join(f[2])).unwrap());
    }

    // A flag override changes the recorded config hash.
    gf(&cfg, &["sync", "--max-lag-s", "3"]).unwrap();
    let m2 = fs::read_to_string(dir.path().join("out/offsets.json.manifest")).unwrap();
    assert_ne!(m.lines().nth(2), m2.lines().nth(2));
    assert_eq!(m.lines().skip(3).collect::<Vec<_>>(), m2.lines().skip(3).collect::<Vec<_>>());
}

#[test]
fn import_and_bench_run_on_pipeline_outputs() {
    let (dir, cfg) = fixture(20);
    for args in &PIPELINE[..6] {
        gf(&cfg, args).unwrap();
    }
    gf(&cfg, &["train", "--task", "mg", "--seeds", "3", "--epochs", "2"]).unwrap();
    gf(&cfg, &["predict", "--task", "mg", "--seed", "3"]).unwrap();
    let preds = dir.path().join("out").join(stages::predictions_file(Task::MutualGaze));
    gf(&cfg, &["import-predictions", "--input", preds.to_str().unwrap()]).unwrap();
    let imported: Vec<gazefuse::eval::MetricReport> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/imported_predictions_MG.json")).unwrap()).unwrap();
    assert_eq!(imported.len(), 1);
    assert_eq!(imported[0].task, Some(Task::MutualGaze));
    gf(&cfg, &["bench", "--task", "mg", "--seed", "3", "--batch-size", "4"]).unwrap();
    assert!(dir.path().join("out/bench_MG.json").exists());
}

#[test]
fn bad_command_lines_are_rejected() {
    assert!(matches!(run(["gazefuse", "launch"]), Err(Error::Input(_))));
    assert!(matches!(run(["gazefuse", "train", "--task", "xx"]), Err(Error::Input(_))));
    let missing = run(["gazefuse", "--config", "/nonexistent/gazefuse.toml", "sync"]).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }), "{missing}");
}

#[test]
fn config_round_trips_losslessly() {
    let mut cfg = gazefuse::cli::fixture_config(&FixtureSpec::default());
    cfg.workers = 3;
    cfg.sync.max_lag_s = 2.75;
    cfg.train.learning_rate = 1.0 / 3.0;
    cfg.paths.outputs = "/abs/out".into();
    let text = cfg.to_toml().unwrap();
    assert_eq!(ProjectConfig::from_toml(&text, "t").unwrap(), cfg);
    assert_eq!(ProjectConfig::from_toml(&text, "t").unwrap().to_toml().unwrap(), text);
}

#[test]
fn config_rejects_unknown_keys_and_inconsistent_shapes() {
    let cfg = gazefuse::cli::fixture_config(&FixtureSpec::default());
    let text = cfg.to_toml().unwrap();
    let typo = text.replace("[sync]\n", "[sync]\nmax_lagg_s = 1.0\n");
    assert!(matches!(ProjectConfig::from_toml(&typo, "t"), Err(Error::Format { .. })));

    let mut bad = cfg.clone();
    bad.model.feature_dim_in = 9;
    assert!(matches!(bad.validate(), Err(Error::Config { .. })));
    let mut bad = cfg.clone();
    bad.sessions.held_out = vec!["s77".into()];
    assert!(matches!(bad.validate(), Err(Error::Config { .. })));
    let mut bad = cfg;
    bad.seeds.clear();
    assert!(matches!(bad.validate(), Err(Error::Config { .. })));
}

#[test]
fn default_project_uses_reference_hyperparameters() {
    let cfg = ProjectConfig::default();
    let m = &cfg.model;
    assert_eq!((m.encoder_layers, m.attention_heads, m.embed_dim), (3, 4, 512));
    assert_eq!(m.dropout, 0.426);
    assert_eq!(m.head_layer_sizes, vec![512, 128, 64, 1]);
    assert_eq!(cfg.train.learning_rate, 6.1e-6);
    assert_eq!(cfg.train.batch_size, 8);
    assert_eq!((cfg.backbone.out_dim, cfg.backbone.tokens()), (m.feature_dim_in, m.tokens_per_view));
    assert_eq!(cfg.sample.rate_hz, 1.0);
    assert_eq!(cfg.split.val_fraction, 0.10);
}
