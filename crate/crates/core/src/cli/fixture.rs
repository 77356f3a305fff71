//! Scripted offline fixture: a few short sessions with WAV audio, raster
//! frames, a head manifest, annotations and a matching `gazefuse.toml`.
//!
//! Each second of a session has a hidden state per task. In both views a
//! marker lights one image quadrant (red channel for MG, blue for JA); the task is
//! positive exactly when both views put their marker in the same quadrant,
//! so the label is only recoverable by comparing the two views. The parent
//! camera lags the infant camera by a per-session offset, in audio and
//! video alike.

use std::fs;
use std::path::Path;

use rand::Rng;

use super::config::{Paths, ProjectConfig, SampleSettings, Sessions, SplitSettings};
use crate::error::{Error, Result};
use crate::features::{HeadBox, RgbImage, ToyBackboneConfig};
use crate::model::FusionModelConfig;
use crate::optim::TrainConfig;
use crate::pipeline::{
    head_manifest_to_csv, write_annotations, write_wav_i16, EventAnnotation, HeadBoxRecord, MonoAudio, Quality,
};
use crate::rng::{self, Stream, StreamRng};
use crate::{Task, View};

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureSpec {
    pub sessions: Vec<String>,
    pub held_out: Vec<String>,
    /// Parent-minus-infant offset per session, seconds.
    pub offsets_s: Vec<f64>,
    pub duration_s: u32,
    pub fps: u32,
    pub image_size: usize,
    pub audio_rate: u32,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            sessions: vec!["s01".into(), "s02".into(), "s03".into()],
            held_out: vec!["s03".into()],
            offsets_s: vec![0.37, -0.52, 0.8],
            duration_s: 60,
            fps: 5,
            image_size: 16,
            audio_rate: 8000,
            seed: 0,
        }
    }
}

/// Per-second hidden state of one session.
struct Script {
    /// `positive[task][k]`
    positive: [Vec<bool>; 2],
    /// `quadrant[task][view][k]`
    quadrant: [[Vec<usize>; 2]; 2],
}

/// Alternating runs of 2 to 6 seconds.
fn runs(n: usize, r: &mut StreamRng) -> Vec<bool> {
    let mut out = Vec::with_capacity(n);
    let mut on = r.random_bool(0.5);
    while out.len() < n {
        let len = r.random_range(2..=6);
        out.extend(std::iter::repeat_n(on, len));
        on = !on;
    }
    out.truncate(n);
    out
}

fn script(seconds: usize, r: &mut StreamRng) -> Script {
    let mut positive = [Vec::new(), Vec::new()];
    let mut quadrant = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    for t in 0..2 {
        positive[t] = runs(seconds, r);
        for k in 0..seconds {
            let qa = r.random_range(0..4);
            let qb = if positive[t][k] { qa } else { (qa + r.random_range(1..4)) % 4 };
            quadrant[t][0].push(qa);
            quadrant[t][1].push(qb);
        }
    }
    Script { positive, quadrant }
}

fn task_index(task: Task) -> usize {
    match task {
        Task::MutualGaze => 0,
        Task::JointAttention => 1,
    }
}

fn draw_frame(s: &Script, view: usize, k: usize, size: usize, r: &mut StreamRng) -> RgbImage {
    let mut img = RgbImage::new(size, size, (0..size * size * 3).map(|_| r.random_range(90..110)).collect())
        .expect("positive extents");
    let half = size / 2;
    // MG lights the red channel of its quadrant, JA the blue one.
    for (t, channel) in [(0, 0), (1, 2)] {
        let q = s.quadrant[t][view][k];
        let (qx, qy) = ((q % 2) * half, (q / 2) * half);
        for y in qy..qy + half {
            for x in qx..qx + half {
                let mut px = img.pixel(x, y);
                px[channel] = 230;
                img.set_pixel(x, y, px);
            }
        }
    }
    img
}

/// Noise carrier gated by random 50-400 ms bursts.
fn burst_track(seconds: f64, rate: u32, r: &mut StreamRng) -> Vec<f32> {
    let n = (seconds * rate as f64) as usize;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = r.random_range(rate as usize / 20..rate as usize * 2 / 5);
        let amp = if r.random_bool(0.5) { r.random_range(0.2f32..0.7) } else { 0.01 };
        out.extend((0..len).map(|_| amp * r.random_range(-1.0f32..1.0)));
    }
    out.truncate(n);
    out
}

fn events(s: &Script, task: Task, r: &mut StreamRng) -> Result<Vec<EventAnnotation>> {
    let pos = &s.positive[task_index(task)];
    let mut out = Vec::new();
    let mut k = 0;
    while k < pos.len() {
        let start = k;
        while k < pos.len() && pos[k] == pos[start] {
            k += 1;
        }
        let last = k - 1;
        if pos[start] {
            let a = (start as f64 - 0.25).max(0.0);
            out.push(EventAnnotation::new(task, a, last as f64 + 0.25, Quality::Confident)?);
        } else if last - start >= 3 && r.random_bool(0.3) {
            // An annotator unsure about a stretch of negatives.
            let a = start as f64 + 0.5;
            out.push(EventAnnotation::new(task, a, a + 1.0, Quality::Ambiguous)?);
        }
    }
    Ok(out)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(Error::io(format!("writing {}", path.display())))
}

/// Config matching the fixture: 2×2 toy grid, tiny model, short training.
pub fn fixture_config(spec: &FixtureSpec) -> ProjectConfig {
    let backbone = ToyBackboneConfig {
        grid: 2,
        out_dim: 8,
        projection_seed: 0,
    };
    ProjectConfig {
        tasks: vec![Task::MutualGaze, Task::JointAttention],
        seeds: vec![0, 1],
        workers: 1,
        paths: Paths::default(),
        sessions: Sessions {
            all: spec.sessions.clone(),
            held_out: spec.held_out.clone(),
        },
        sample: SampleSettings::default(),
        split: SplitSettings::default(),
        model: FusionModelConfig {
            feature_dim_in: backbone.out_dim,
            tokens_per_view: backbone.tokens(),
            dropout: 0.1,
            ..FusionModelConfig::tiny()
        },
        backbone,
        train: TrainConfig {
            learning_rate: 3e-3,
            max_epochs: 40,
            ..TrainConfig::default()
        },
        ..ProjectConfig::default()
    }
}

/// Writes the fixture under `root` and returns its config (also saved as
/// `root/gazefuse.toml`).
pub fn generate_fixture(root: &Path, spec: &FixtureSpec) -> Result<ProjectConfig> {
    if spec.offsets_s.len() != spec.sessions.len() {
        return Err(Error::config("offsets_s", "need one offset per session"));
    }
    if spec.fps == 0 || spec.duration_s == 0 || spec.image_size < 4 {
        return Err(Error::config("fixture", "fps, duration and image size must be positive"));
    }
    let cfg = fixture_config(spec);
    let paths = cfg.resolve(root);
    let mut heads: Vec<HeadBoxRecord> = Vec::new();
    for (i, (session, &offset)) in spec.sessions.iter().zip(&spec.offsets_s).enumerate() {
        let mut r = rng::stream(spec.seed.wrapping_mul(1000).wrapping_add(i as u64), Stream::Fixture);
        let seconds = spec.duration_s as usize + 1;
        let sc = script(seconds, &mut r);

        // Audio: the parent track hears every burst `offset` seconds later.
        let lead = 2.0;
        let scene = burst_track(spec.duration_s as f64 + 2.0 * lead + 2.0, spec.audio_rate, &mut r);
        let rate = spec.audio_rate as f64;
        let at = |scene_t: f64| -> f32 {
            let j = ((scene_t + lead) * rate).round();
            if j >= 0.0 && (j as usize) < scene.len() { scene[j as usize] } else { 0.0 }
        };
        let len = |secs: f64| (secs * rate) as usize;
        let infant_audio: Vec<f32> = (0..len(spec.duration_s as f64 + 1.0)).map(|n| at(n as f64 / rate)).collect();
        let parent_len = len(spec.duration_s as f64 + 1.0 + offset.max(0.0));
        let parent_audio: Vec<f32> = (0..parent_len)
            .map(|n| at(n as f64 / rate - offset) + 0.005 * r.random_range(-1.0f32..1.0))
            .collect();
        for (view, samples) in [(View::Infant, infant_audio), (View::Parent, parent_audio)] {
            let path = paths.media_root.join(session).join(format!("{view}.wav"));
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
            }
            write_wav_i16(&path, &MonoAudio { rate: spec.audio_rate, samples })?;
        }

        // Frames on each camera's own clock; the parent clock runs `offset` ahead.
        for (v, view) in View::BOTH.into_iter().enumerate() {
            let shift = if view == View::Parent { offset } else { 0.0 };
            let last = spec.duration_s as f64 + shift.max(0.0) + 0.5;
            let n_frames = (last * spec.fps as f64).floor() as usize + 1;
            for f in 0..n_frames {
                let ms = (f as u64 * 1000) / spec.fps as u64;
                let t = ms as f64 / 1000.0;
                let k = (t - shift).round().clamp(0.0, spec.duration_s as f64) as usize;
                let img = draw_frame(&sc, v, k, spec.image_size, &mut r);
                write_bytes(&paths.media_root.join(session).join(view.name()).join(format!("{ms}.ppm")), &img.to_ppm())?;

                let u = r.random::<f64>();
                if u < 0.03 {
                    continue;
                }
                let confidence = if u < 0.08 { 0.5 } else { 0.9 + 0.1 * r.random::<f64>() };
                let (x, y) = (0.3 + 0.1 * r.random::<f64>(), 0.2 + 0.1 * r.random::<f64>());
                heads.push(HeadBoxRecord {
                    session: session.clone(),
                    view,
                    timestamp_s: t,
                    bbox: HeadBox::new(x, y, x + 0.3, y + 0.35)?,
                    confidence,
                });
            }
        }

        let mut anns = events(&sc, Task::MutualGaze, &mut r)?;
        anns.extend(events(&sc, Task::JointAttention, &mut r)?);
        fs::create_dir_all(&paths.annotations).map_err(Error::io("creating annotation directory"))?;
        write_annotations(&paths.annotations.join(format!("{session}.csv")), &anns)?;
    }
    write_bytes(&paths.head_manifest, head_manifest_to_csv(&heads)?.as_bytes())?;
    write_bytes(&root.join(super::config::DEFAULT_CONFIG_FILE), cfg.to_toml()?.as_bytes())?;
    Ok(cfg)
}
