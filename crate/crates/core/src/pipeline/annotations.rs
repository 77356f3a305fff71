//! Behavioural event annotations and per-tick labeling.
//!
//! CSV header: `event_type,start_s,end_s,duration_s,quality`. `event_type`
//! is `MG` or `JA`, `quality` is `confident` or `ambiguous`. Numbers are
//! written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Task;

pub const ANNOTATION_HEADER: &str = "event_type,start_s,end_s,duration_s,quality";

/// Largest accepted gap between `duration_s` and `end_s - start_s`.
pub const DURATION_TOLERANCE_S: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Confident,
    Ambiguous,
}

impl Quality {
    pub fn name(self) -> &'static str {
        match self {
            Quality::Confident => "confident",
            Quality::Ambiguous => "ambiguous",
        }
    }
}

impl std::str::FromStr for Quality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confident" => Ok(Quality::Confident),
            "ambiguous" => Ok(Quality::Ambiguous),
            other => Err(Error::Input(format!("unknown quality `{other}` (confident or ambiguous)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventAnnotation {
    pub event_type: Task,
    pub start_s: f64,
    pub end_s: f64,
    pub duration_s: f64,
    pub quality: Quality,
}

impl EventAnnotation {
    /// Builds an event with `duration_s` rounded to whole milliseconds.
    pub fn new(event_type: Task, start_s: f64, end_s: f64, quality: Quality) -> Result<Self> {
        let ev = Self {
            event_type,
            start_s,
            end_s,
            duration_s: ((end_s - start_s) * 1000.0).round() / 1000.0,
            quality,
        };
        ev.validate()?;
        Ok(ev)
    }

    pub fn validate(&self) -> Result<()> {
        let (s, e, d) = (self.start_s, self.end_s, self.duration_s);
        if !(s.is_finite() && e.is_finite() && d.is_finite()) || s < 0.0 {
            return Err(Error::Input(format!("event times must be finite and non-negative ({s}, {e}, {d})")));
        }
        if s >= e {
            return Err(Error::Input(format!("event start {s} is not before its end {e}")));
        }
        if (d - (e - s)).abs() > DURATION_TOLERANCE_S {
            return Err(Error::Input(format!("duration {d} disagrees with end - start = {}", e - s)));
        }
        Ok(())
    }

    /// Inclusive on both ends.
    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t <= self.end_s
    }
}

pub fn annotations_to_csv(events: &[EventAnnotation]) -> String {
    let mut s = format!("{ANNOTATION_HEADER}\n");
    for ev in events {
        writeln!(s, "{},{},{},{},{}", ev.event_type, ev.start_s, ev.end_s, ev.duration_s, ev.quality.name()).unwrap();
    }
    s
}

pub fn write_annotations(path: &Path, events: &[EventAnnotation]) -> Result<()> {
    fs::write(path, annotations_to_csv(events)).map_err(Error::io(format!("writing {}", path.display())))
}

pub fn read_annotations(path: &Path) -> Result<Vec<EventAnnotation>> {
    let text = fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
    parse_annotations(&text, &path.display().to_string())
}

/// Parses and validates annotation CSV text; `source` names it in errors.
pub fn parse_annotations(text: &str, source: &str) -> Result<Vec<EventAnnotation>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != ANNOTATION_HEADER {
        return Err(Error::format(source, format!("expected header `{ANNOTATION_HEADER}`, found `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::Row {
            path: source.to_string(),
            line,
            reason,
        };
        let num = |i: usize| -> Result<f64> { row[i].parse().map_err(|_| bad(format!("`{}` is not a number", &row[i]))) };
        let ev = EventAnnotation {
            event_type: row[0].parse().map_err(|e: Error| bad(e.to_string()))?,
            start_s: num(1)?,
            end_s: num(2)?,
            duration_s: num(3)?,
            quality: row[4].parse().map_err(|e: Error| bad(e.to_string()))?,
        };
        ev.validate().map_err(|e| bad(e.to_string()))?;
        out.push(ev);
    }
    Ok(out)
}

/// Where a labeled tick may be used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eligibility {
    Any,
    /// Inside an ambiguous event but covered by a confident one.
    TestOnly,
    /// Inside an ambiguous event with no confident label.
    Excluded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLabel {
    pub label: bool,
    pub eligibility: Eligibility,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Labeling {
    /// One entry per input tick, in order.
    pub labels: Vec<FrameLabel>,
    pub warnings: Vec<String>,
}

/// Sorted union of the intervals; each merge of overlapping (or touching)
/// intervals adds a warning.
fn merge_intervals(mut iv: Vec<(f64, f64)>, task: Task, warnings: &mut Vec<String>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (s, e) in iv {
        match out.last_mut() {
            Some(last) if s <= last.1 => {
                warnings.push(format!(
                    "overlapping confident {task} events [{}, {}] and [{s}, {e}] merged",
                    last.0, last.1
                ));
                last.1 = last.1.max(e);
            }
            _ => out.push((s, e)),
        }
    }
    out
}

fn inside(iv: &[(f64, f64)], t: f64) -> bool {
    let i = iv.partition_point(|&(s, _)| s <= t);
    i > 0 && t <= iv[i - 1].1
}

/// Labels each tick for `task`: positive iff it lies in a confident event
/// of that type. Ticks inside an ambiguous event of that type are kept
/// for testing only when positive, otherwise excluded.
pub fn label_frames(ticks: &[f64], annotations: &[EventAnnotation], task: Task) -> Result<Labeling> {
    for ev in annotations {
        ev.validate()?;
    }
    let mut warnings = Vec::new();
    let pick = |q: Quality| -> Vec<(f64, f64)> {
        annotations
            .iter()
            .filter(|e| e.event_type == task && e.quality == q)
            .map(|e| (e.start_s, e.end_s))
            .collect()
    };
    let confident = merge_intervals(pick(Quality::Confident), task, &mut warnings);
    // Ambiguous spans may overlap each other freely; merge without warnings.
    let ambiguous = merge_intervals(pick(Quality::Ambiguous), task, &mut Vec::new());
    for w in &warnings {
        log::warn!("{w}");
    }
    let labels = ticks
        .iter()
        .map(|&t| {
            let label = inside(&confident, t);
            let eligibility = match (inside(&ambiguous, t), label) {
                (false, _) => Eligibility::Any,
                (true, true) => Eligibility::TestOnly,
                (true, false) => Eligibility::Excluded,
            };
            FrameLabel { label, eligibility }
        })
        .collect();
    Ok(Labeling { labels, warnings })
}
