//! Prediction CSV: `session,timestamp_s,task,probability,label`.
//!
//! `label` may be empty. Numbers are written in shortest round-trip form, so
//! export followed by import returns identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Task;

pub const PREDICTION_HEADER: &str = "session,timestamp_s,task,probability,label";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub session: String,
    pub timestamp_s: f64,
    pub task: Task,
    pub probability: f64,
    pub label: Option<bool>,
}

pub fn predictions_to_csv(records: &[PredictionRecord]) -> String {
    let mut s = format!("{PREDICTION_HEADER}\n");
    for r in records {
        let label = match r.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(s, "{},{},{},{},{}", r.session, r.timestamp_s, r.task, r.probability, label).unwrap();
    }
    s
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    if records.iter().any(|r| r.session.contains([',', '"', '\n'])) {
        return Err(Error::Input("session ids in prediction files may not contain commas, quotes or newlines".into()));
    }
    fs::write(path, predictions_to_csv(records)).map_err(Error::io(format!("writing {}", path.display())))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
    parse_predictions(&text, &path.display().to_string())
}

/// Parses prediction CSV text; `source` names the file in row errors.
pub fn parse_predictions(text: &str, source: &str) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let want: Vec<&str> = PREDICTION_HEADER.split(',').collect();
    if header != want && header != want[..4] {
        return Err(Error::format(source, format!("expected header `{PREDICTION_HEADER}`, found `{}`", header.join(","))));
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
        if row.len() != header.len() {
            return Err(bad(format!("expected {} fields, found {}", header.len(), row.len())));
        }
        let session = row[0].to_string();
        if session.is_empty() {
            return Err(bad("empty session".into()));
        }
        let timestamp_s: f64 = row[1].parse().map_err(|_| bad(format!("timestamp `{}` is not a number", &row[1])))?;
        if !timestamp_s.is_finite() || timestamp_s < 0.0 {
            return Err(bad(format!("timestamp {timestamp_s} must be finite and non-negative")));
        }
        let task: Task = row[2].parse().map_err(|_| bad(format!("unknown task `{}` (MG or JA)", &row[2])))?;
        let probability: f64 = row[3].parse().map_err(|_| bad(format!("probability `{}` is not a number", &row[3])))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(bad(format!("probability {probability} outside [0, 1]")));
        }
        let label = match row.get(4).unwrap_or("") {
            "" => None,
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            other => return Err(bad(format!("label `{other}` must be 0, 1 or empty"))),
        };
        out.push(PredictionRecord {
            session,
            timestamp_s,
            task,
            probability,
            label,
        });
    }
    Ok(out)
}

/// Probabilities and labels of the labeled records for one task, ready for
/// [`threshold_metrics`](super::threshold_metrics).
pub fn scored_pairs(records: &[PredictionRecord], task: Task) -> (Vec<f64>, Vec<bool>) {
    records
        .iter()
        .filter(|r| r.task == task)
        .filter_map(|r| r.label.map(|y| (r.probability, y)))
        .unzip()
}
