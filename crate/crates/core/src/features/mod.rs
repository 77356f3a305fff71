//! Backbone outputs: token sequences, the deterministic toy backbone, raster
//! input and the on-disk `GZFS` feature store.

mod backbone;
mod raster;
mod store;

pub use backbone::{ToyBackbone, ToyBackboneConfig, CELL_FEATURES};
pub use raster::{HeadBox, RgbImage};
pub use store::{
    decode_record, encode_record, validate_session_id, FeatureStore, RecordKey, VerifyReport, FEATURE_MAGIC, FEATURE_VERSION,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::View;

/// Backbone output for one frame of one view: `N` tokens of width `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenSequence {
    pub session: String,
    pub view: View,
    /// Seconds from session start.
    pub timestamp_s: f64,
    pub tokens: Tensor,
}

impl TokenSequence {
    pub fn new(session: impl Into<String>, view: View, timestamp_s: f64, tokens: Tensor) -> Result<Self> {
        let session = session.into();
        if tokens.rank() != 2 || tokens.numel() == 0 {
            return Err(Error::Shape(format!("token sequence must be a non-empty N×D matrix, got {:?}", tokens.shape())));
        }
        if !tokens.is_finite() {
            return Err(Error::NonFinite { op: "token sequence" });
        }
        if !timestamp_s.is_finite() || timestamp_s < 0.0 {
            return Err(Error::Input(format!("timestamp {timestamp_s} must be finite and non-negative")));
        }
        Ok(Self {
            session,
            view,
            timestamp_s,
            tokens,
        })
    }

    /// Timestamp rounded to whole milliseconds, the store's key.
    pub fn timestamp_ms(&self) -> i64 {
        (self.timestamp_s * 1000.0).round() as i64
    }

    pub fn len(&self) -> usize {
        self.tokens.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.tokens.shape()[1]
    }
}
