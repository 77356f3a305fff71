//! Frame directories and 1 Hz tick sampling on the infant clock.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::View;

/// One sampled tick: the nearest frame of each view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePair {
    /// Tick time on the reference (infant) clock.
    pub tick_s: f64,
    pub infant_s: f64,
    pub parent_s: f64,
}

/// Candidate frame timestamps of one session, per view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameIndex {
    pub session: String,
    pub infant: Vec<f64>,
    pub parent: Vec<f64>,
    /// Parent clock minus infant clock, seconds.
    pub offset_s: f64,
}

impl FrameIndex {
    pub fn new(session: impl Into<String>, infant: Vec<f64>, parent: Vec<f64>, offset_s: f64) -> Result<Self> {
        check_increasing(&infant, View::Infant)?;
        check_increasing(&parent, View::Parent)?;
        Ok(Self {
            session: session.into(),
            infant,
            parent,
            offset_s,
        })
    }

    pub fn sample(&self, rate_hz: f64) -> Result<Vec<FramePair>> {
        sample_frames(&self.infant, &self.parent, self.offset_s, rate_hz)
    }
}

fn check_increasing(ts: &[f64], view: View) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::Input(format!("{view} view has no frames")));
    }
    if ts.iter().any(|t| !t.is_finite()) || ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input(format!("{view} frame timestamps are not strictly increasing")));
    }
    Ok(())
}

/// Index of the timestamp closest to `t`; ties go to the earlier frame.
fn nearest(ts: &[f64], t: f64) -> usize {
    let i = ts.partition_point(|&x| x < t);
    if i == 0 {
        0
    } else if i == ts.len() || t - ts[i - 1] <= ts[i] - t {
        i - 1
    } else {
        i
    }
}

/// Pairs frames at ticks `t = k / rate_hz` (k = 0, 1, …) up to the last
/// infant frame plus half a period. The parent frame is looked up at
/// `t + offset_s`. Ticks where either nearest frame is more than
/// `0.5 / rate_hz` away are dropped.
pub fn sample_frames(infant: &[f64], parent: &[f64], offset_s: f64, rate_hz: f64) -> Result<Vec<FramePair>> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::config("rate_hz", "must be positive"));
    }
    if !offset_s.is_finite() {
        return Err(Error::Input("audio offset is not finite".into()));
    }
    check_increasing(infant, View::Infant)?;
    check_increasing(parent, View::Parent)?;
    let tol = 0.5 / rate_hz;
    let last = infant[infant.len() - 1] + tol;
    let mut out = Vec::new();
    for k in 0u64.. {
        let t = k as f64 / rate_hz;
        if t > last {
            break;
        }
        let a = infant[nearest(infant, t)];
        let target = t + offset_s;
        let b = parent[nearest(parent, target)];
        if (a - t).abs() <= tol && (b - target).abs() <= tol {
            out.push(FramePair {
                tick_s: t,
                infant_s: a,
                parent_s: b,
            });
        }
    }
    Ok(out)
}

/// `<root>/<session>/<view>/`
pub fn frame_dir(root: &Path, session: &str, view: View) -> PathBuf {
    root.join(session).join(view.name())
}

/// Frame files of one view, sorted by their millisecond-timestamp names.
/// Files whose stem is not an integer are skipped.
pub fn scan_frames(root: &Path, session: &str, view: View) -> Result<Vec<(i64, PathBuf)>> {
    let dir = frame_dir(root, session, view);
    let entries = fs::read_dir(&dir).map_err(Error::io(format!("listing frames in {}", dir.display())))?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(Error::io(format!("listing frames in {}", dir.display())))?.path();
        if let Some(ms) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<i64>().ok()) {
            if path.is_file() {
                out.push((ms, path));
            }
        }
    }
    out.sort();
    if out.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Input(format!("duplicate frame timestamps in {}", dir.display())));
    }
    Ok(out)
}

/// Seconds to the millisecond key used in file names and manifests.
pub fn to_ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}
