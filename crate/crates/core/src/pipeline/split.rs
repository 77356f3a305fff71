//! Labeled sample references, the temporal train/validation split and
//! test-set balancing.
//!
//! Sample CSV header: `session,tick_s,infant_s,parent_s,label,eligibility`.
//! A split file adds a leading `split` column
//! (`train`, `validation`, `test` or `excluded`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::annotations::Eligibility;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::Task;

pub const DEFAULT_VAL_FRACTION: f64 = 0.10;

/// Reference to one labeled dual-view sample; the token sequences live in
/// the feature store under `(session, view, infant_s / parent_s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRef {
    pub session: String,
    pub tick_s: f64,
    pub infant_s: f64,
    pub parent_s: f64,
    pub label: bool,
    pub eligibility: Eligibility,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Validation,
    Test,
    Excluded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub task: Task,
    pub train: Vec<SampleRef>,
    pub validation: Vec<SampleRef>,
    pub test: Vec<SampleRef>,
    /// Samples purged by ambiguity rules; with the other three lists this
    /// partitions the input exactly.
    pub excluded: Vec<SampleRef>,
}

impl DatasetSplit {
    pub fn parts(&self) -> [(SplitPart, &[SampleRef]); 4] {
        [
            (SplitPart::Train, &self.train),
            (SplitPart::Validation, &self.validation),
            (SplitPart::Test, &self.test),
            (SplitPart::Excluded, &self.excluded),
        ]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["split", "session", "tick_s", "infant_s", "parent_s", "label", "eligibility"])?;
        for (part, samples) in self.parts() {
            for s in samples {
                w.serialize(SplitRow::new(part, s))?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::io("buffering CSV")(e.into_error()))?).expect("csv writes UTF-8"))
    }

    pub fn from_csv(text: &str, task: Task, source: &str) -> Result<Self> {
        let mut split = DatasetSplit {
            task,
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
            excluded: Vec::new(),
        };
        for row in parse_rows::<SplitRow>(text, source)? {
            let (part, s) = row.into_parts();
            match part {
                SplitPart::Train => split.train.push(s),
                SplitPart::Validation => split.validation.push(s),
                SplitPart::Test => split.test.push(s),
                SplitPart::Excluded => split.excluded.push(s),
            }
        }
        Ok(split)
    }
}

#[derive(Serialize, Deserialize)]
struct SplitRow {
    split: SplitPart,
    session: String,
    tick_s: f64,
    infant_s: f64,
    parent_s: f64,
    label: bool,
    eligibility: Eligibility,
}

impl SplitRow {
    fn new(split: SplitPart, s: &SampleRef) -> Self {
        Self {
            split,
            session: s.session.clone(),
            tick_s: s.tick_s,
            infant_s: s.infant_s,
            parent_s: s.parent_s,
            label: s.label,
            eligibility: s.eligibility,
        }
    }

    fn into_parts(self) -> (SplitPart, SampleRef) {
        let sample = SampleRef {
            session: self.session,
            tick_s: self.tick_s,
            infant_s: self.infant_s,
            parent_s: self.parent_s,
            label: self.label,
            eligibility: self.eligibility,
        };
        (self.split, sample)
    }
}

fn parse_rows<T: serde::de::DeserializeOwned>(text: &str, source: &str) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        out.push(row.deserialize(Some(&headers)).map_err(|e| Error::Row {
            path: source.to_string(),
            line,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn samples_to_csv(samples: &[SampleRef]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["session", "tick_s", "infant_s", "parent_s", "label", "eligibility"])?;
    for s in samples {
        w.serialize(s)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::io("buffering CSV")(e.into_error()))?).expect("csv writes UTF-8"))
}

pub fn parse_samples(text: &str, source: &str) -> Result<Vec<SampleRef>> {
    parse_rows(text, source)
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRef>> {
    let text = fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
    parse_samples(&text, &path.display().to_string())
}

/// Held-out sessions go to test in full (less samples excluded everywhere).
/// Every other session is sorted by tick time; its first
/// `ceil(val_fraction · n)` eligible samples go to validation and the rest
/// to train. Samples flagged test-only or excluded never enter train or
/// validation.
pub fn temporal_split(samples: &[SampleRef], held_out: &[String], val_fraction: f64, task: Task) -> Result<DatasetSplit> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::config("val_fraction", "must lie in [0, 1)"));
    }
    if samples.is_empty() {
        return Err(Error::config("sessions", "no labeled samples to split"));
    }
    let mut by_session: BTreeMap<&str, Vec<&SampleRef>> = BTreeMap::new();
    for s in samples {
        by_session.entry(s.session.as_str()).or_default().push(s);
    }
    let held: BTreeSet<&str> = held_out.iter().map(String::as_str).collect();
    if let Some(missing) = held.iter().find(|h| !by_session.contains_key(*h)) {
        return Err(Error::config(
            "held_out_sessions",
            format!("session `{missing}` has no samples (known: {:?})", by_session.keys().collect::<Vec<_>>()),
        ));
    }
    let mut split = DatasetSplit {
        task,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        excluded: Vec::new(),
    };
    for (session, mut rows) in by_session {
        rows.sort_by(|a, b| a.tick_s.total_cmp(&b.tick_s));
        if held.contains(session) {
            for s in rows {
                match s.eligibility {
                    Eligibility::Excluded => split.excluded.push(s.clone()),
                    _ => split.test.push(s.clone()),
                }
            }
            continue;
        }
        let (eligible, purged): (Vec<&SampleRef>, Vec<&SampleRef>) =
            rows.into_iter().partition(|s| s.eligibility == Eligibility::Any);
        split.excluded.extend(purged.into_iter().cloned());
        let n_val = validation_count(eligible.len(), val_fraction);
        split.validation.extend(eligible[..n_val].iter().map(|s| (*s).clone()));
        split.train.extend(eligible[n_val..].iter().map(|s| (*s).clone()));
    }
    Ok(split)
}

/// `ceil(fraction · n)`, ignoring float noise such as `0.1 · 30 = 3.0000000000000004`.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Downsamples the majority class without replacement to the minority
/// count. Selected samples keep their original order.
pub fn balance_test(test: &[SampleRef], seed: u64) -> Result<Vec<SampleRef>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..test.len()).partition(|&i| test[i].label);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Balancing {
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut r = rng::stream(seed, Stream::Balance);
    let mut keep: Vec<usize> = index::sample(&mut r, majority.len(), minority.len())
        .into_iter()
        .map(|i| majority[i])
        .chain(minority)
        .collect();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| test[i].clone()).collect())
}
