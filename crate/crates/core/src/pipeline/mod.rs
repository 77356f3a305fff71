//! Preprocessing from raw session media to labeled, split sample lists:
//! audio offset estimation, 1 Hz frame pairing, head-detection filtering,
//! annotation labeling, temporal splitting and test balancing.
//!
//! Frames are consumed from `<root>/<session>/<view>/<timestamp_ms>.<ext>`
//! so any external decoder can hand them over.

mod annotations;
mod audio;
mod frames;
mod heads;
mod split;

pub use annotations::{
    annotations_to_csv, label_frames, parse_annotations, read_annotations, write_annotations, Eligibility,
    EventAnnotation, FrameLabel, Labeling, Quality, ANNOTATION_HEADER, DURATION_TOLERANCE_S,
};
pub use audio::{
    envelope, estimate_audio_offset, parse_wav, write_wav_i16, MonoAudio, SyncEstimate, DEFAULT_MIN_CONFIDENCE,
    ENVELOPE_RATE_HZ, SILENCE_VARIANCE,
};
pub use frames::{frame_dir, sample_frames, scan_frames, to_ms, FrameIndex, FramePair};
pub use heads::{
    filter_by_heads, head_manifest_to_csv, parse_head_manifest, read_head_manifest, HeadBoxRecord, HeadFilterOutcome,
    HeadManifest, HeadedPair, DEFAULT_MIN_HEAD_CONFIDENCE, HEAD_MANIFEST_HEADER,
};
pub use split::{
    balance_test, parse_samples, read_samples, samples_to_csv, temporal_split, validation_count, DatasetSplit, SampleRef, SplitPart,
    DEFAULT_VAL_FRACTION,
};

/// Default search window for the audio offset, seconds.
pub const DEFAULT_MAX_LAG_S: f64 = 5.0;
