//! WAV input and audio cross-correlation synchronization.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitude envelopes are compared at 100 Hz (10 ms resolution).
pub const ENVELOPE_RATE_HZ: u32 = 100;

/// Envelope variance below this counts as silence.
pub const SILENCE_VARIANCE: f64 = 1e-9;

/// Peaks weaker than this are flagged for manual validation.
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.4;

#[derive(Clone, Debug, PartialEq)]
pub struct MonoAudio {
    pub rate: u32,
    /// Samples in [-1, 1].
    pub samples: Vec<f32>,
}

impl MonoAudio {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(format!("reading {}", path.display()))(io),
        other => Error::format(path.display().to_string(), other.to_string()),
    }
}

/// Reads a PCM WAV file, averaging channels to mono. Integer samples are
/// scaled by `2^(bits-1)`, so 32767 in a 16-bit file reads as 32767/32768.
pub fn parse_wav(path: &Path) -> Result<MonoAudio> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.sample_rate == 0 {
        return Err(Error::format(path.display().to_string(), "zero channels or sample rate"));
    }
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_error(path, e))?
        }
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
    };
    let ch = spec.channels as usize;
    let samples = interleaved.chunks_exact(ch).map(|f| f.iter().sum::<f32>() / ch as f32).collect();
    Ok(MonoAudio {
        rate: spec.sample_rate,
        samples,
    })
}

/// Writes mono 16-bit PCM; values are clamped to [-1, 1) and rounded.
pub fn write_wav_i16(path: &Path, audio: &MonoAudio) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in &audio.samples {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    w.finalize().map_err(|e| wav_error(path, e))
}

/// Mean absolute amplitude per 10 ms window.
pub fn envelope(audio: &MonoAudio) -> Vec<f64> {
    let rate = audio.rate as usize;
    let windows = audio.samples.len() * ENVELOPE_RATE_HZ as usize / rate;
    (0..windows)
        .map(|k| {
            let lo = k * rate / ENVELOPE_RATE_HZ as usize;
            let hi = ((k + 1) * rate / ENVELOPE_RATE_HZ as usize).min(audio.samples.len());
            audio.samples[lo..hi].iter().map(|s| s.abs() as f64).sum::<f64>() / (hi - lo).max(1) as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncEstimate {
    /// Time of an event in stream B minus its time in stream A: positive
    /// when B lags A (B started recording earlier relative to the event).
    pub offset_s: f64,
    /// Envelope lag in 10 ms steps.
    pub lag: i64,
    /// Normalized correlation at the peak, in [0, 1].
    pub confidence: f64,
    pub low_confidence: bool,
}

impl SyncEstimate {
    /// Turns a flagged estimate into an error that asks for manual review.
    pub fn require_confident(self) -> Result<Self> {
        if self.low_confidence {
            return Err(Error::LowConfidenceSync {
                reason: format!("weak correlation peak at {:+.2} s", self.offset_s),
                confidence: self.confidence,
            });
        }
        Ok(self)
    }
}

/// Full linear cross-correlation `c[l] = Σ a[n]·b[n+l]` for
/// `l ∈ [-max_lag, max_lag]`, via zero-padded FFTs.
fn cross_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let n = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(n, Complex::new(0.0, 0.0));
        v
    };
    let (mut fa, mut fb) = (pad(a), pad(b));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut prod);
    (-(max_lag as i64)..=max_lag as i64)
        .map(|l| prod[l.rem_euclid(n as i64) as usize].re / n as f64)
        .collect()
}

/// Estimates how far stream B lags stream A from their amplitude envelopes.
///
/// Near-silent input is an error; a weak but defined peak is returned with
/// `low_confidence` set when its confidence is below `min_confidence`.
pub fn estimate_audio_offset(a: &MonoAudio, b: &MonoAudio, max_lag_s: f64, min_confidence: f64) -> Result<SyncEstimate> {
    if a.samples.is_empty() || b.samples.is_empty() {
        return Err(Error::Input("audio stream is empty".into()));
    }
    if !(max_lag_s > 0.0) {
        return Err(Error::config("max_lag_s", "must be positive"));
    }
    let prepare = |audio: &MonoAudio, name: &str| -> Result<Vec<f64>> {
        let env = envelope(audio);
        if env.len() < 2 {
            return Err(Error::Input(format!("stream {name} is shorter than two envelope windows")));
        }
        let mean = env.iter().sum::<f64>() / env.len() as f64;
        let centered: Vec<f64> = env.iter().map(|v| v - mean).collect();
        let var = centered.iter().map(|v| v * v).sum::<f64>() / centered.len() as f64;
        if var < SILENCE_VARIANCE {
            return Err(Error::LowConfidenceSync {
                reason: format!("stream {name} is near-silent (envelope variance {var:.2e})"),
                confidence: 0.0,
            });
        }
        Ok(centered)
    };
    let ea = prepare(a, "A")?;
    let eb = prepare(b, "B")?;
    let max_lag = ((max_lag_s * ENVELOPE_RATE_HZ as f64).round() as usize).min(ea.len().max(eb.len()) - 1);
    let corr = cross_correlation(&ea, &eb, max_lag);
    let (best, peak) = corr
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
    let norm = (ea.iter().map(|v| v * v).sum::<f64>() * eb.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let confidence = (peak / norm).clamp(0.0, 1.0);
    let lag = best as i64 - max_lag as i64;
    Ok(SyncEstimate {
        offset_s: lag as f64 / ENVELOPE_RATE_HZ as f64,
        lag,
        confidence,
        low_confidence: confidence < min_confidence,
    })
}
