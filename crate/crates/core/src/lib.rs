//! Dual-view token-fusion classification of mutual gaze (MG) and joint
//! attention (JA) in two-camera recordings, together with the data pipeline
//! that feeds it and the evaluation protocol that scores it.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense `f32` tensors and a reverse-mode autodiff tape.
//! - [`model`]: the fusion transformer and the two-stream CNN baseline,
//!   plus the `GFCK` checkpoint format.
//! - [`optim`]: Adam, BCE-with-logits and the F1-selected training loop.
//! - [`features`]: token sequences, a deterministic toy backbone and the
//!   `GZFS` on-disk feature store.
//! - [`pipeline`]: audio synchronization, 1 Hz frame sampling, head-box
//!   filtering, annotation labeling, temporal splitting and test balancing.
//! - [`eval`]: threshold metrics, rank-statistic ROC-AUC, multi-run
//!   aggregation, prediction import, timeline export and throughput.
//! - [`cli`]: the `gazefuse` command-line workflow and the synthetic fixture.

pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Tape, Tensor, Var};

use serde::{Deserialize, Serialize};

/// Which behavior a model or label refers to. Each task gets its own model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "MG")]
    MutualGaze,
    #[serde(rename = "JA")]
    JointAttention,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::MutualGaze, Task::JointAttention];

    pub fn tag(self) -> &'static str {
        match self {
            Task::MutualGaze => "MG",
            Task::JointAttention => "JA",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MG" => Ok(Task::MutualGaze),
            "JA" => Ok(Task::JointAttention),
            other => Err(Error::Input(format!("unknown task `{other}` (expected MG or JA)"))),
        }
    }
}

/// Camera stream. The infant camera is the reference clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Infant,
    Parent,
}

impl View {
    pub const BOTH: [View; 2] = [View::Infant, View::Parent];

    pub fn name(self) -> &'static str {
        match self {
            View::Infant => "infant",
            View::Parent => "parent",
        }
    }

    pub fn byte(self) -> u8 {
        match self {
            View::Infant => 0,
            View::Parent => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(View::Infant),
            1 => Some(View::Parent),
            _ => None,
        }
    }
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infant" => Ok(View::Infant),
            "parent" => Ok(View::Parent),
            other => Err(Error::Input(format!("unknown view `{other}`"))),
        }
    }
}
