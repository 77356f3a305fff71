//! `gazefuse.toml`: paths, sessions, seeds and every stage's settings.
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{DEFAULT_TIMELINE_THRESHOLD, DEFAULT_WINDOW_S};
use crate::features::ToyBackboneConfig;
use crate::model::FusionModelConfig;
use crate::optim::TrainConfig;
use crate::pipeline::{DEFAULT_MAX_LAG_S, DEFAULT_MIN_CONFIDENCE, DEFAULT_MIN_HEAD_CONFIDENCE, DEFAULT_VAL_FRACTION};
use crate::Task;

/// Environment variable naming the config file when `--config` is absent.
pub const CONFIG_ENV: &str = "GAZEFUSE_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "gazefuse.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// `<media_root>/<session>/<view>/<ms>.ppm` frames and
    /// `<media_root>/<session>/<view>.wav` audio.
    pub media_root: PathBuf,
    pub head_manifest: PathBuf,
    /// One `<session>.csv` per session.
    pub annotations: PathBuf,
    pub features: PathBuf,
    pub outputs: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            media_root: "media".into(),
            head_manifest: "heads.csv".into(),
            annotations: "annotations".into(),
            features: "features".into(),
            outputs: "out".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sessions {
    pub all: Vec<String>,
    pub held_out: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncSettings {
    pub max_lag_s: f64,
    pub min_confidence: f64,
}

impl Default for SyncSettings {
    fn default() -> Self {
        Self {
            max_lag_s: DEFAULT_MAX_LAG_S,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    pub rate_hz: f64,
    pub min_head_confidence: f64,
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self {
            rate_hz: 1.0,
            min_head_confidence: DEFAULT_MIN_HEAD_CONFIDENCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub val_fraction: f64,
    pub balance_seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            val_fraction: DEFAULT_VAL_FRACTION,
            balance_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimelineSettings {
    pub window_s: f64,
    pub threshold: f64,
}

impl Default for TimelineSettings {
    fn default() -> Self {
        Self {
            window_s: DEFAULT_WINDOW_S,
            threshold: DEFAULT_TIMELINE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub tasks: Vec<Task>,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub paths: Paths,
    pub sessions: Sessions,
    pub sync: SyncSettings,
    pub sample: SampleSettings,
    pub split: SplitSettings,
    pub backbone: ToyBackboneConfig,
    pub model: FusionModelConfig,
    pub train: TrainConfig,
    pub timeline: TimelineSettings,
}

impl Default for ProjectConfig {
    /// Published model and training settings; the toy backbone is sized to
    /// feed that model.
    fn default() -> Self {
        let model = FusionModelConfig::default();
        let backbone = ToyBackboneConfig {
            grid: (model.tokens_per_view as f64).sqrt().round() as usize,
            out_dim: model.feature_dim_in,
            ..ToyBackboneConfig::default()
        };
        Self {
            tasks: Task::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            workers: 1,
            paths: Paths::default(),
            sessions: Sessions::default(),
            sync: SyncSettings::default(),
            sample: SampleSettings::default(),
            split: SplitSettings::default(),
            backbone,
            model,
            train: TrainConfig::default(),
            timeline: TimelineSettings::default(),
        }
    }
}

impl ProjectConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("config", e.to_string()))
    }

    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::format(source, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(format!("reading config {}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sessions.all.is_empty() {
            return Err(Error::config("sessions.all", "list at least one session"));
        }
        for s in &self.sessions.all {
            crate::features::validate_session_id(s)?;
        }
        if let Some(h) = self.sessions.held_out.iter().find(|h| !self.sessions.all.contains(h)) {
            return Err(Error::config("sessions.held_out", format!("`{h}` is not listed in sessions.all")));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.tasks.is_empty() {
            return Err(Error::config("tasks", "select at least one task"));
        }
        if self.model.feature_dim_in != self.backbone.out_dim {
            return Err(Error::config(
                "model.feature_dim_in",
                format!("must equal backbone.out_dim ({})", self.backbone.out_dim),
            ));
        }
        if self.model.tokens_per_view != self.backbone.tokens() {
            return Err(Error::config(
                "model.tokens_per_view",
                format!("must equal backbone.grid² ({})", self.backbone.tokens()),
            ));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.backbone.validate()
    }

    /// Absolute paths, resolved against `base`.
    pub fn resolve(&self, base: &Path) -> Paths {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Paths {
            media_root: r(&self.paths.media_root),
            head_manifest: r(&self.paths.head_manifest),
            annotations: r(&self.paths.annotations),
            features: r(&self.paths.features),
            outputs: r(&self.paths.outputs),
        }
    }
}
