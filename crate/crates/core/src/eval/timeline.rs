//! Review timeline: ground-truth intervals and per-second probabilities for
//! one session, in a line-oriented text document.
//!
//! ```text
//! gazefuse-timeline 1
//! session <id>
//! window_s <seconds shown by the scrolling view>
//! threshold <probability>
//! duration_s <seconds>
//! task <MG|JA>                      (zero or more task blocks, MG first)
//! interval <start_s> <end_s> <duration_s> <confident|ambiguous>
//! slots <n>                         (n = round(duration_s) + 1)
//! <k> <probability or ->            (n lines, k = 0..n-1)
//! end_task
//! end
//! ```
//!
//! Fields are separated by one space and lines end with `\n`. Numbers use
//! shortest round-trip form. Slot `k` holds the prediction whose timestamp
//! rounds to `k` seconds (the latest one wins); `-` marks a gap.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::PredictionRecord;
use crate::pipeline::{EventAnnotation, Quality};
use crate::Task;

pub const TIMELINE_MAGIC: &str = "gazefuse-timeline";
pub const TIMELINE_VERSION: u32 = 1;
pub const DEFAULT_WINDOW_S: f64 = 15.0;
pub const DEFAULT_TIMELINE_THRESHOLD: f64 = 0.5;

/// Opacity of probability bars below the threshold in rendered plots.
pub const BELOW_THRESHOLD_OPACITY: f64 = 0.35;

#[derive(Clone, Debug, PartialEq)]
pub struct TaskTrack {
    pub task: Task,
    pub intervals: Vec<EventAnnotation>,
    pub slots: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimelineDocument {
    pub session: String,
    pub window_s: f64,
    pub threshold: f64,
    pub duration_s: f64,
    pub tracks: Vec<TaskTrack>,
}

/// Builds the document for `session`. Predictions of other sessions are
/// skipped; every annotation is taken to belong to `session`.
pub fn export_timeline(
    session: &str,
    predictions: &[PredictionRecord],
    annotations: &[EventAnnotation],
    window_s: f64,
    threshold: f64,
) -> Result<TimelineDocument> {
    if session.is_empty() || session.contains(char::is_whitespace) {
        return Err(Error::Input(format!("session id `{session}` cannot be stored in a timeline")));
    }
    let preds: Vec<&PredictionRecord> = predictions.iter().filter(|p| p.session == session).collect();
    let duration_s = preds
        .iter()
        .map(|p| p.timestamp_s)
        .chain(annotations.iter().map(|a| a.end_s))
        .fold(0.0, f64::max);
    let n_slots = duration_s.round() as usize + 1;
    let mut tracks = Vec::new();
    for task in Task::ALL {
        let intervals: Vec<EventAnnotation> = annotations.iter().filter(|a| a.event_type == task).copied().collect();
        let mut task_preds: Vec<&&PredictionRecord> = preds.iter().filter(|p| p.task == task).collect();
        if intervals.is_empty() && task_preds.is_empty() {
            continue;
        }
        task_preds.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
        let mut slots = vec![None; n_slots];
        for p in task_preds {
            let k = p.timestamp_s.round() as usize;
            if k < n_slots {
                slots[k] = Some(p.probability);
            }
        }
        tracks.push(TaskTrack { task, intervals, slots });
    }
    Ok(TimelineDocument {
        session: session.to_string(),
        window_s,
        threshold,
        duration_s,
        tracks,
    })
}

impl TimelineDocument {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{TIMELINE_MAGIC} {TIMELINE_VERSION}").unwrap();
        writeln!(s, "session {}", self.session).unwrap();
        writeln!(s, "window_s {}", self.window_s).unwrap();
        writeln!(s, "threshold {}", self.threshold).unwrap();
        writeln!(s, "duration_s {}", self.duration_s).unwrap();
        for t in &self.tracks {
            writeln!(s, "task {}", t.task).unwrap();
            for iv in &t.intervals {
                writeln!(s, "interval {} {} {} {}", iv.start_s, iv.end_s, iv.duration_s, iv.quality.name()).unwrap();
            }
            writeln!(s, "slots {}", t.slots.len()).unwrap();
            for (k, p) in t.slots.iter().enumerate() {
                match p {
                    Some(p) => writeln!(s, "{k} {p}").unwrap(),
                    None => writeln!(s, "{k} -").unwrap(),
                }
            }
            s.push_str("end_task\n");
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
        let bad = |line: usize, reason: String| Error::format("timeline", format!("line {line}: {reason}"));
        let mut next = |want: &str| -> Result<(usize, Vec<&str>)> {
            let (n, l) = lines.next().ok_or_else(|| bad(0, format!("unexpected end of document, expected `{want}`")))?;
            Ok((n, l.split(' ').collect()))
        };
        let num = |n: usize, v: &str| -> Result<f64> { v.parse().map_err(|_| bad(n, format!("`{v}` is not a number"))) };

        let (n, f) = next(TIMELINE_MAGIC)?;
        if f.len() != 2 || f[0] != TIMELINE_MAGIC {
            return Err(bad(n, "missing timeline header".into()));
        }
        let version: u32 = f[1].parse().map_err(|_| bad(n, "bad version".into()))?;
        if version != TIMELINE_VERSION {
            return Err(Error::Version {
                what: "timeline",
                found: version,
                expected: TIMELINE_VERSION,
            });
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (n, f) = next(key)?;
            if f.len() != 2 || f[0] != key {
                return Err(bad(n, format!("expected `{key} <value>`")));
            }
            Ok((n, f[1].to_string()))
        };
        let (_, session) = field("session")?;
        let (n, w) = field("window_s")?;
        let window_s = num(n, &w)?;
        let (n, t) = field("threshold")?;
        let threshold = num(n, &t)?;
        let (n, d) = field("duration_s")?;
        let duration_s = num(n, &d)?;

        let mut tracks: Vec<TaskTrack> = Vec::new();
        loop {
            let (n, f) = next("task or end")?;
            match f.as_slice() {
                ["end"] => break,
                ["task", tag] => {
                    let task: Task = tag.parse().map_err(|e: Error| bad(n, e.to_string()))?;
                    if tracks.iter().any(|t| t.task == task) {
                        return Err(bad(n, format!("task {task} appears twice")));
                    }
                    let mut intervals = Vec::new();
                    let count = loop {
                        let (n, f) = next("interval or slots")?;
                        match f.as_slice() {
                            ["interval", s, e, d, q] => {
                                let quality: Quality = q.parse().map_err(|e: Error| bad(n, e.to_string()))?;
                                let ev = EventAnnotation {
                                    event_type: task,
                                    start_s: num(n, s)?,
                                    end_s: num(n, e)?,
                                    duration_s: num(n, d)?,
                                    quality,
                                };
                                ev.validate().map_err(|e| bad(n, e.to_string()))?;
                                intervals.push(ev);
                            }
                            ["slots", c] => break c.parse::<usize>().map_err(|_| bad(n, format!("bad slot count `{c}`")))?,
                            _ => return Err(bad(n, "expected `interval …` or `slots <n>`".into())),
                        }
                    };
                    let mut slots = Vec::new();
                    for k in 0..count {
                        let (n, f) = next("slot")?;
                        if f.len() != 2 || f[0] != k.to_string() {
                            return Err(bad(n, format!("expected slot {k}")));
                        }
                        slots.push(match f[1] {
                            "-" => None,
                            v => {
                                let p = num(n, v)?;
                                if !(0.0..=1.0).contains(&p) {
                                    return Err(bad(n, format!("probability {p} outside [0, 1]")));
                                }
                                Some(p)
                            }
                        });
                    }
                    let (n, f) = next("end_task")?;
                    if f != ["end_task"] {
                        return Err(bad(n, "expected `end_task`".into()));
                    }
                    tracks.push(TaskTrack { task, intervals, slots });
                }
                _ => return Err(bad(n, "expected `task <MG|JA>` or `end`".into())),
            }
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(bad(n, "content after `end`".into()));
        }
        Ok(Self {
            session,
            window_s,
            threshold,
            duration_s,
            tracks,
        })
    }

    /// Static plot: one row per task with white ground-truth bars above
    /// per-second probability bars (green JA, orange MG), drawn at reduced
    /// opacity below the threshold.
    pub fn render_svg(&self) -> String {
        const PX_PER_S: f64 = 12.0;
        const ROW: f64 = 60.0;
        let width = (self.duration_s.round() + 1.0) * PX_PER_S + 40.0;
        let height = ROW * self.tracks.len().max(1) as f64 + 20.0;
        let mut s = String::new();
        writeln!(
            s,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"##
        )
        .unwrap();
        writeln!(s, r##"<rect width="100%" height="100%" fill="#202020"/>"##).unwrap();
        for (row, t) in self.tracks.iter().enumerate() {
            let y = 10.0 + row as f64 * ROW;
            let colour = match t.task {
                Task::JointAttention => "#2ca02c",
                Task::MutualGaze => "#ff7f0e",
            };
            writeln!(s, r##"<text x="2" y="{}" fill="#ffffff" font-size="10">{}</text>"##, y + 30.0, t.task).unwrap();
            for iv in &t.intervals {
                let opacity = if iv.quality == Quality::Confident { 1.0 } else { 0.5 };
                writeln!(
                    s,
                    r##"<rect class="truth" x="{}" y="{y}" width="{}" height="8" fill="#ffffff" fill-opacity="{opacity}"/>"##,
                    30.0 + iv.start_s * PX_PER_S,
                    (iv.end_s - iv.start_s) * PX_PER_S
                )
                .unwrap();
            }
            for (k, p) in t.slots.iter().enumerate() {
                let Some(p) = p else { continue };
                let opacity = if *p >= self.threshold { 1.0 } else { BELOW_THRESHOLD_OPACITY };
                let h = p * (ROW - 24.0);
                writeln!(
                    s,
                    r##"<rect class="prob" data-t="{k}" x="{}" y="{}" width="{}" height="{h}" fill="{colour}" fill-opacity="{opacity}"/>"##,
                    30.0 + k as f64 * PX_PER_S,
                    y + ROW - 12.0 - h,
                    PX_PER_S - 1.0
                )
                .unwrap();
            }
        }
        s.push_str("</svg>\n");
        s
    }
}
