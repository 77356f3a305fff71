//! Adam, the binary cross-entropy loss, the training loop with
//! validation-F1 checkpoint selection, and multi-seed runs.

mod adam;
mod multiseed;
pub mod synthetic;
mod train;

pub use adam::{Adam, AdamConfig};
pub use multiseed::{run_multiseed, run_seed, Experiment, SeedRun};
pub use train::{evaluate, predict_probabilities, train, EpochRecord, TrainConfig, TrainHistory, TrainOutcome};

use crate::error::{Error, Result};

/// Mean binary cross-entropy of raw logits against 0/1 targets, in the
/// stable form `max(z, 0) - z·y + ln(1 + e^{-|z|})`, accumulated in `f64`.
pub fn bce_with_logits(logits: &[f32], targets: &[f32]) -> Result<f64> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(Error::Dimension {
            op: "bce_with_logits",
            lhs: vec![logits.len()],
            rhs: vec![targets.len()],
        });
    }
    if let Some(t) = targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::Contract(format!("BCE targets must be 0 or 1, found {t}")));
    }
    let z: Vec<f64> = logits.iter().map(|&z| z as f64).collect();
    let y: Vec<f64> = targets.iter().map(|&y| y as f64).collect();
    Ok(crate::tensor::bce_sum(&z, &y) / z.len() as f64)
}
