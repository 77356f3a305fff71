//! Head-box manifests and the detection-confidence filter.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::frames::{to_ms, FramePair};
use crate::error::{Error, Result};
use crate::features::HeadBox;
use crate::View;

pub const HEAD_MANIFEST_HEADER: &str = "session,view,timestamp_s,x0,y0,x1,y1,confidence";
pub const DEFAULT_MIN_HEAD_CONFIDENCE: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadBoxRecord {
    pub session: String,
    pub view: View,
    pub timestamp_s: f64,
    pub bbox: HeadBox,
    pub confidence: f64,
}

impl HeadBoxRecord {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Input(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        if !(self.timestamp_s.is_finite() && self.timestamp_s >= 0.0) {
            return Err(Error::Input(format!("bad timestamp {}", self.timestamp_s)));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Row {
    session: String,
    view: View,
    timestamp_s: f64,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    confidence: f64,
}

pub fn parse_head_manifest(text: &str, source: &str) -> Result<Vec<HeadBoxRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != HEAD_MANIFEST_HEADER {
        return Err(Error::format(source, format!("expected header `{HEAD_MANIFEST_HEADER}`")));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |reason: String| Error::Row {
            path: source.to_string(),
            line,
            reason,
        };
        let row: Row = row.deserialize(Some(&headers)).map_err(|e| bad(e.to_string()))?;
        let rec = HeadBoxRecord {
            session: row.session,
            view: row.view,
            timestamp_s: row.timestamp_s,
            bbox: HeadBox {
                x0: row.x0,
                y0: row.y0,
                x1: row.x1,
                y1: row.y1,
            },
            confidence: row.confidence,
        };
        rec.validate().map_err(|e| bad(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_head_manifest(path: &Path) -> Result<Vec<HeadBoxRecord>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
    parse_head_manifest(&text, &path.display().to_string())
}

pub fn head_manifest_to_csv(records: &[HeadBoxRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(Row {
            session: r.session.clone(),
            view: r.view,
            timestamp_s: r.timestamp_s,
            x0: r.bbox.x0,
            y0: r.bbox.y0,
            x1: r.bbox.x1,
            y1: r.bbox.y1,
            confidence: r.confidence,
        })?;
    }
    if records.is_empty() {
        return Ok(format!("{HEAD_MANIFEST_HEADER}\n"));
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::io("buffering CSV")(e.into_error()))?).expect("csv writes UTF-8"))
}

/// Records keyed by `(session, view, timestamp_ms)`; when a key repeats, the
/// most confident detection wins.
#[derive(Clone, Debug, Default)]
pub struct HeadManifest {
    records: HashMap<(String, View, i64), HeadBoxRecord>,
}

impl HeadManifest {
    pub fn new(records: impl IntoIterator<Item = HeadBoxRecord>) -> Self {
        let mut map: HashMap<(String, View, i64), HeadBoxRecord> = HashMap::new();
        for r in records {
            let key = (r.session.clone(), r.view, to_ms(r.timestamp_s));
            match map.get(&key) {
                Some(old) if old.confidence >= r.confidence => {}
                _ => {
                    map.insert(key, r);
                }
            }
        }
        Self { records: map }
    }

    pub fn get(&self, session: &str, view: View, timestamp_s: f64) -> Option<&HeadBoxRecord> {
        self.records.get(&(session.to_string(), view, to_ms(timestamp_s)))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadedPair {
    pub pair: FramePair,
    pub infant_box: HeadBox,
    pub parent_box: HeadBox,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadFilterOutcome {
    pub kept: Vec<HeadedPair>,
    /// Pairs where at least one view had no record.
    pub missing: usize,
    /// Pairs where both records exist but one is below the threshold.
    pub low_confidence: usize,
}

impl HeadFilterOutcome {
    pub fn discarded(&self) -> usize {
        self.missing + self.low_confidence
    }
}

/// Keeps pairs whose frames both have a detection at or above
/// `min_confidence`, looked up at each view's own frame timestamp.
pub fn filter_by_heads(session: &str, pairs: &[FramePair], manifest: &HeadManifest, min_confidence: f64) -> HeadFilterOutcome {
    let mut out = HeadFilterOutcome::default();
    for p in pairs {
        let (Some(a), Some(b)) = (
            manifest.get(session, View::Infant, p.infant_s),
            manifest.get(session, View::Parent, p.parent_s),
        ) else {
            out.missing += 1;
            continue;
        };
        if a.confidence < min_confidence || b.confidence < min_confidence {
            out.low_confidence += 1;
            continue;
        }
        out.kept.push(HeadedPair {
            pair: *p,
            infant_box: a.bbox,
            parent_box: b.bbox,
        });
    }
    out
}
