//! One function per subcommand. Each reads upstream artifacts from the
//! output directory, fails with [`Error::MissingArtifact`] naming the
//! producing subcommand when one is absent, and writes its own artifacts
//! with manifests.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::project::{collect_sessions, par_map, Project};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_runs, bench_throughput, export_timeline, read_predictions, scored_pairs, threshold_metrics, AggregateReport,
    BenchReport, MetricReport, PredictionRecord, predictions_to_csv,
};
use crate::features::{FeatureStore, HeadBox, RgbImage, ToyBackbone};
use crate::model::{load_checkpoint, save_checkpoint, Example, FusionModel, ViewPair};
use crate::optim::{evaluate, predict_probabilities, run_multiseed, Experiment};
use crate::pipeline::{
    balance_test, estimate_audio_offset, filter_by_heads, label_frames, parse_wav, read_annotations, read_head_manifest,
    read_samples, samples_to_csv, scan_frames, temporal_split, DatasetSplit, FrameIndex, FramePair, HeadManifest,
    HeadedPair, SampleRef, SyncEstimate,
};
use crate::{Task, View};

pub const OFFSETS_FILE: &str = "offsets.json";
pub const FRAMES_FILE: &str = "frames.csv";
/// Manifest standing in for the feature store directory.
pub const FEATURES_MANIFEST: &str = "features.manifest";

pub fn dataset_file(task: Task) -> String {
    format!("dataset_{task}.csv")
}
pub fn split_file(task: Task) -> String {
    format!("split_{task}.csv")
}
pub fn balanced_file(task: Task) -> String {
    format!("test_balanced_{task}.csv")
}
pub fn checkpoint_file(task: Task, seed: u64) -> String {
    format!("models/{task}/seed{seed}.gfck")
}
pub fn history_file(task: Task, seed: u64) -> String {
    format!("models/{task}/history_seed{seed}.csv")
}
pub fn report_file(task: Task) -> String {
    format!("eval_{task}.json")
}
pub fn aggregate_file(task: Task) -> String {
    format!("aggregate_{task}.csv")
}
pub fn predictions_file(task: Task) -> String {
    format!("predictions_{task}.csv")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

// ── sync ────────────────────────────────────────────────────────────

pub fn wav_path(p: &Project, session: &str, view: View) -> PathBuf {
    p.paths.media_root.join(session).join(format!("{view}.wav"))
}

pub fn sync(p: &Project) -> Result<BTreeMap<String, SyncEstimate>> {
    p.require_input(&p.paths.media_root, "paths.media_root")?;
    let sessions = &p.cfg.sessions.all;
    let s = &p.cfg.sync;
    let results = par_map(sessions, p.workers, |session| -> Result<SyncEstimate> {
        let a = parse_wav(&wav_path(p, session, View::Infant))?;
        let b = parse_wav(&wav_path(p, session, View::Parent))?;
        estimate_audio_offset(&a, &b, s.max_lag_s, s.min_confidence)?.require_confident()
    });
    let estimates = collect_sessions(sessions, results)?;
    let map: BTreeMap<String, SyncEstimate> = sessions.iter().cloned().zip(estimates).collect();
    for (session, e) in &map {
        println!("{session}: offset {:+.3} s (confidence {:.3})", e.offset_s, e.confidence);
    }
    let inputs: Vec<PathBuf> = sessions
        .iter()
        .flat_map(|s| View::BOTH.map(|v| wav_path(p, s, v)))
        .collect();
    p.emit("sync", &p.out(OFFSETS_FILE), &json(&map)?, &inputs)?;
    Ok(map)
}

fn read_offsets(p: &Project) -> Result<BTreeMap<String, SyncEstimate>> {
    let path = p.out(OFFSETS_FILE);
    p.require(&path, "sync")?;
    Ok(serde_json::from_str(&read_text(&path)?)?)
}

// ── sample ──────────────────────────────────────────────────────────

/// One row of the paired frame index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub session: String,
    pub tick_s: f64,
    pub infant_s: f64,
    pub parent_s: f64,
    pub infant_x0: f64,
    pub infant_y0: f64,
    pub infant_x1: f64,
    pub infant_y1: f64,
    pub parent_x0: f64,
    pub parent_y0: f64,
    pub parent_x1: f64,
    pub parent_y1: f64,
}

impl FrameRow {
    fn new(session: &str, h: &HeadedPair) -> Self {
        let (a, b) = (h.infant_box, h.parent_box);
        Self {
            session: session.to_string(),
            tick_s: h.pair.tick_s,
            infant_s: h.pair.infant_s,
            parent_s: h.pair.parent_s,
            infant_x0: a.x0,
            infant_y0: a.y0,
            infant_x1: a.x1,
            infant_y1: a.y1,
            parent_x0: b.x0,
            parent_y0: b.y0,
            parent_x1: b.x1,
            parent_y1: b.y1,
        }
    }

    pub fn boxes(&self) -> Result<(HeadBox, HeadBox)> {
        Ok((
            HeadBox::new(self.infant_x0, self.infant_y0, self.infant_x1, self.infant_y1)?,
            HeadBox::new(self.parent_x0, self.parent_y0, self.parent_x1, self.parent_y1)?,
        ))
    }
}

pub fn sample(p: &Project) -> Result<usize> {
    let offsets = read_offsets(p)?;
    p.require_input(&p.paths.head_manifest, "paths.head_manifest")?;
    let manifest = HeadManifest::new(read_head_manifest(&p.paths.head_manifest)?);
    let sessions = &p.cfg.sessions.all;
    let settings = &p.cfg.sample;
    let results = par_map(sessions, p.workers, |session| -> Result<Vec<FrameRow>> {
        let offset = offsets
            .get(session)
            .ok_or_else(|| Error::Lookup(format!("no offset for session {session}; rerun `sync`")))?
            .offset_s;
        let stamps = |v| -> Result<Vec<f64>> {
            Ok(scan_frames(&p.paths.media_root, session, v)?.into_iter().map(|(ms, _)| ms as f64 / 1000.0).collect())
        };
        let index = FrameIndex::new(session.clone(), stamps(View::Infant)?, stamps(View::Parent)?, offset)?;
        let pairs: Vec<FramePair> = index.sample(settings.rate_hz)?;
        let outcome = filter_by_heads(session, &pairs, &manifest, settings.min_head_confidence);
        log::info!(
            "{session}: {} ticks, {} kept, {} without heads, {} below confidence",
            pairs.len(),
            outcome.kept.len(),
            outcome.missing,
            outcome.low_confidence
        );
        Ok(outcome.kept.iter().map(|h| FrameRow::new(session, h)).collect())
    });
    let rows: Vec<FrameRow> = collect_sessions(sessions, results)?.into_iter().flatten().collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("buffering CSV")(e.into_error()))?;
    println!("{} paired frames", rows.len());
    p.emit("sample", &p.out(FRAMES_FILE), &bytes, &[p.out(OFFSETS_FILE), p.paths.head_manifest.clone()])?;
    Ok(rows.len())
}

pub fn read_frame_rows(p: &Project) -> Result<Vec<FrameRow>> {
    let path = p.out(FRAMES_FILE);
    p.require(&path, "sample")?;
    let mut r = csv::Reader::from_path(&path)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

// ── featurize ───────────────────────────────────────────────────────

pub fn featurize(p: &Project) -> Result<usize> {
    let rows = read_frame_rows(p)?;
    let backbone = ToyBackbone::new(p.cfg.backbone.clone())?;
    let store = FeatureStore::new(&p.paths.features);
    let sessions = &p.cfg.sessions.all;
    let results = par_map(sessions, p.workers, |session| -> Result<Vec<PathBuf>> {
        let frames = |v| -> Result<HashMap<i64, PathBuf>> { Ok(scan_frames(&p.paths.media_root, session, v)?.into_iter().collect()) };
        let (infant, parent) = (frames(View::Infant)?, frames(View::Parent)?);
        let mut used = Vec::new();
        for row in rows.iter().filter(|r| &r.session == session) {
            let (ib, pb) = row.boxes()?;
            for (view, t, head, files) in [(View::Infant, row.infant_s, ib, &infant), (View::Parent, row.parent_s, pb, &parent)] {
                let ms = crate::pipeline::to_ms(t);
                let path = files
                    .get(&ms)
                    .ok_or_else(|| Error::Lookup(format!("{session} {view} frame at {ms} ms is gone; rerun `sample`")))?;
                let image = RgbImage::read_ppm(path)?;
                store.write(&backbone.extract(&image, &head, session, view, t)?)?;
                used.push(path.clone());
            }
        }
        Ok(used)
    });
    let mut inputs: Vec<PathBuf> = collect_sessions(sessions, results)?.into_iter().flatten().collect();
    let n = inputs.len();
    inputs.push(p.out(FRAMES_FILE));
    println!("{n} token sequences in {}", p.paths.features.display());
    let path = p.out(FEATURES_MANIFEST);
    super::project::write_file(&path, p.manifest_text("featurize", &inputs)?.as_bytes())?;
    Ok(n)
}

// ── dataset ─────────────────────────────────────────────────────────

pub fn dataset_build(p: &Project, task: Task) -> Result<Vec<SampleRef>> {
    let rows = read_frame_rows(p)?;
    let mut samples = Vec::new();
    let mut inputs = vec![p.out(FRAMES_FILE)];
    for session in &p.cfg.sessions.all {
        let path = p.annotation_file(session);
        p.require_input(&path, "paths.annotations")?;
        let anns = read_annotations(&path)?;
        inputs.push(path);
        let mine: Vec<&FrameRow> = rows.iter().filter(|r| &r.session == session).collect();
        let ticks: Vec<f64> = mine.iter().map(|r| r.tick_s).collect();
        let labeling = label_frames(&ticks, &anns, task)?;
        for w in &labeling.warnings {
            log::warn!("{session}: {w}");
        }
        for (r, l) in mine.iter().zip(&labeling.labels) {
            samples.push(SampleRef {
                session: session.clone(),
                tick_s: r.tick_s,
                infant_s: r.infant_s,
                parent_s: r.parent_s,
                label: l.label,
                eligibility: l.eligibility,
            });
        }
    }
    let positives = samples.iter().filter(|s| s.label).count();
    println!("{task}: {} samples, {positives} positive", samples.len());
    p.emit("dataset build", &p.out(&dataset_file(task)), samples_to_csv(&samples)?.as_bytes(), &inputs)?;
    Ok(samples)
}

pub fn dataset_split(p: &Project, task: Task) -> Result<DatasetSplit> {
    let src = p.out(&dataset_file(task));
    p.require(&src, "dataset build")?;
    let samples = read_samples(&src)?;
    let split = temporal_split(&samples, &p.cfg.sessions.held_out, p.cfg.split.val_fraction, task)?;
    println!(
        "{task}: train {}, validation {}, test {}, excluded {}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.excluded.len()
    );
    p.emit("dataset split", &p.out(&split_file(task)), split.to_csv()?.as_bytes(), &[src])?;
    Ok(split)
}

pub fn read_split(p: &Project, task: Task) -> Result<DatasetSplit> {
    let path = p.out(&split_file(task));
    p.require(&path, "dataset split")?;
    DatasetSplit::from_csv(&read_text(&path)?, task, &path.display().to_string())
}

pub fn dataset_balance(p: &Project, task: Task) -> Result<Vec<SampleRef>> {
    let split = read_split(p, task)?;
    let balanced = balance_test(&split.test, p.cfg.split.balance_seed)?;
    println!("{task}: balanced test set of {} from {}", balanced.len(), split.test.len());
    p.emit(
        "dataset balance",
        &p.out(&balanced_file(task)),
        samples_to_csv(&balanced)?.as_bytes(),
        &[p.out(&split_file(task))],
    )?;
    Ok(balanced)
}

fn read_balanced(p: &Project, task: Task) -> Result<Vec<SampleRef>> {
    let path = p.out(&balanced_file(task));
    p.require(&path, "dataset balance")?;
    read_samples(&path)
}

// ── models ──────────────────────────────────────────────────────────

fn feature_store(p: &Project) -> Result<FeatureStore> {
    p.require(&p.out(FEATURES_MANIFEST), "featurize")?;
    Ok(FeatureStore::new(&p.paths.features))
}

pub fn load_examples(store: &FeatureStore, samples: &[SampleRef]) -> Result<Vec<Example>> {
    samples
        .iter()
        .map(|s| {
            Ok(Example {
                pair: ViewPair {
                    infant: store.read(&s.session, View::Infant, s.infant_s)?.tokens,
                    parent: store.read(&s.session, View::Parent, s.parent_s)?.tokens,
                },
                label: if s.label { 1.0 } else { 0.0 },
            })
        })
        .collect()
}

pub fn train(p: &Project, task: Task) -> Result<Vec<MetricReport>> {
    let split = read_split(p, task)?;
    let balanced = read_balanced(p, task)?;
    let store = feature_store(p)?;
    let train_set = load_examples(&store, &split.train)?;
    let val_set = load_examples(&store, &split.validation)?;
    let test_set = load_examples(&store, &balanced)?;
    let exp = Experiment {
        task,
        train: &train_set,
        val: &val_set,
        test: &test_set,
        config: &p.cfg.train,
    };
    let model_cfg = p.cfg.model.clone();
    let runs = run_multiseed(|seed| FusionModel::new(model_cfg.clone(), seed), &p.cfg.seeds, &exp, p.workers)?;
    let inputs = vec![p.out(&split_file(task)), p.out(&balanced_file(task)), p.out(FEATURES_MANIFEST)];
    let mut reports = Vec::new();
    for run in runs {
        let ckpt = p.out(&checkpoint_file(task, run.seed));
        if let Some(dir) = ckpt.parent() {
            fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        }
        save_checkpoint(&run.best, &ckpt)?;
        p.write_manifest("train", &ckpt, &inputs)?;
        p.emit("train", &p.out(&history_file(task, run.seed)), run.history.to_csv().as_bytes(), &inputs)?;
        println!(
            "{task} seed {}: best epoch {}, validation F1 {}",
            run.seed,
            run.best.meta.epoch,
            run.best.meta.val_f1.map_or("n/a".into(), |f| format!("{f:.3}"))
        );
        reports.push(run.report);
    }
    Ok(reports)
}

fn load_model(p: &Project, task: Task, seed: u64) -> Result<FusionModel> {
    let path = p.out(&checkpoint_file(task, seed));
    p.require(&path, "train")?;
    let ckpt = load_checkpoint(&path)?;
    if ckpt.meta.task != task {
        return Err(Error::Input(format!("{} was trained for {}, not {task}", path.display(), ckpt.meta.task)));
    }
    ckpt.into_fusion()
}

/// Per-seed test reports plus their aggregate, as written by `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub runs: Vec<MetricReport>,
    pub aggregate: AggregateReport,
}

pub fn eval(p: &Project, task: Task) -> Result<EvalOutput> {
    let balanced = read_balanced(p, task)?;
    let store = feature_store(p)?;
    let test_set = load_examples(&store, &balanced)?;
    let mut runs = Vec::new();
    let mut inputs = vec![p.out(&balanced_file(task)), p.out(FEATURES_MANIFEST)];
    for &seed in &p.cfg.seeds {
        let model = load_model(p, task, seed)?;
        inputs.push(p.out(&checkpoint_file(task, seed)));
        runs.push(evaluate(&model, &test_set, p.cfg.train.threshold_for_val_f1)?.with_run(task, seed));
    }
    let aggregate = aggregate_runs(&runs)?;
    print!("{}", aggregate.render());
    p.emit("eval", &p.out(&aggregate_file(task)), aggregate.to_csv().as_bytes(), &inputs)?;
    let out = EvalOutput { runs, aggregate };
    p.emit("eval", &p.out(&report_file(task)), &json(&out)?, &inputs)?;
    Ok(out)
}

/// Probabilities for the full (unbalanced) test split, labels attached.
pub fn predict(p: &Project, task: Task, seed: Option<u64>) -> Result<Vec<PredictionRecord>> {
    let seed = seed.unwrap_or(p.cfg.seeds[0]);
    let split = read_split(p, task)?;
    let store = feature_store(p)?;
    let model = load_model(p, task, seed)?;
    let examples = load_examples(&store, &split.test)?;
    let probs = predict_probabilities(&model, &examples)?;
    let records: Vec<PredictionRecord> = split
        .test
        .iter()
        .zip(probs)
        .map(|(s, probability)| PredictionRecord {
            session: s.session.clone(),
            timestamp_s: s.tick_s,
            task,
            probability,
            label: Some(s.label),
        })
        .collect();
    println!("{task}: {} predictions from seed {seed}", records.len());
    p.emit(
        "predict",
        &p.out(&predictions_file(task)),
        predictions_to_csv(&records).as_bytes(),
        &[p.out(&split_file(task)), p.out(FEATURES_MANIFEST), p.out(&checkpoint_file(task, seed))],
    )?;
    Ok(records)
}

/// Scores an external prediction file against its own labels.
pub fn import_predictions(p: &Project, input: &Path, tasks: &[Task], threshold: f64) -> Result<Vec<MetricReport>> {
    p.require_input(input, "--input")?;
    let records = read_predictions(input)?;
    let mut reports = Vec::new();
    for &task in tasks {
        let (scores, labels) = scored_pairs(&records, task);
        if scores.is_empty() {
            log::warn!("{}: no labeled {task} rows", input.display());
            continue;
        }
        let report = threshold_metrics(&scores, &labels, threshold)?;
        println!(
            "{task}: n {} accuracy {:.3} precision {:.3} recall {:.3} f1 {:.3} auc {}",
            report.samples,
            report.accuracy,
            report.precision,
            report.recall,
            report.f1,
            report.roc_auc.map_or("undefined".into(), |a| format!("{a:.3}"))
        );
        reports.push(MetricReport { task: Some(task), ..report });
    }
    if reports.is_empty() {
        return Err(Error::Input(format!("{} has no labeled rows for the selected tasks", input.display())));
    }
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    p.emit("import-predictions", &p.out(&format!("imported_{stem}.json")), &json(&reports)?, &[input.to_path_buf()])?;
    Ok(reports)
}

pub fn export_timelines(p: &Project, sessions: &[String]) -> Result<Vec<PathBuf>> {
    let mut preds = Vec::new();
    let mut inputs = Vec::new();
    for task in &p.cfg.tasks {
        let path = p.out(&predictions_file(*task));
        if path.exists() {
            preds.extend(read_predictions(&path)?);
            inputs.push(path);
        }
    }
    if inputs.is_empty() {
        p.require(&p.out(&predictions_file(p.cfg.tasks[0])), "predict")?;
    }
    let mut written = Vec::new();
    for session in sessions {
        let ann_path = p.annotation_file(session);
        p.require_input(&ann_path, "paths.annotations")?;
        let anns: Vec<_> = read_annotations(&ann_path)?
            .into_iter()
            .filter(|a| p.cfg.tasks.contains(&a.event_type))
            .collect();
        let doc = export_timeline(session, &preds, &anns, p.cfg.timeline.window_s, p.cfg.timeline.threshold)?;
        let mut ins = inputs.clone();
        ins.push(ann_path);
        let txt = p.out(&format!("timeline_{session}.txt"));
        let svg = p.out(&format!("timeline_{session}.svg"));
        p.emit("export-timeline", &txt, doc.to_text().as_bytes(), &ins)?;
        p.emit("export-timeline", &svg, doc.render_svg().as_bytes(), &ins)?;
        println!("{session}: {}", txt.display());
        written.push(txt);
    }
    Ok(written)
}

/// Inference throughput on the balanced test pairs. Timing varies between
/// runs, so this artifact is the one exception to byte-identical reruns.
pub fn bench(p: &Project, task: Task, seed: Option<u64>, batch_size: usize) -> Result<BenchReport> {
    let seed = seed.unwrap_or(p.cfg.seeds[0]);
    let balanced = read_balanced(p, task)?;
    let store = feature_store(p)?;
    let model = load_model(p, task, seed)?;
    let inputs: Vec<ViewPair> = load_examples(&store, &balanced)?.into_iter().map(|e| e.pair).collect();
    let report = bench_throughput(&model, &inputs, batch_size)?;
    println!(
        "{task}: {:.1} samples/s, mean batch latency {:.3} ms over {} samples",
        report.samples_per_second, report.latency_mean_ms, report.samples
    );
    p.emit(
        "bench",
        &p.out(&format!("bench_{task}.json")),
        &json(&report)?,
        &[p.out(&balanced_file(task)), p.out(&checkpoint_file(task, seed))],
    )?;
    Ok(report)
}
