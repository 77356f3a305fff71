use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Task;

/// Classification metrics for one run at one threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the labels contain a single class.
    pub roc_auc: Option<f64>,
    pub threshold: f64,
    pub samples: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub task: Option<Task>,
    pub seed: Option<u64>,
}

impl MetricReport {
    pub fn with_run(mut self, task: Task, seed: u64) -> Self {
        self.task = Some(task);
        self.seed = Some(seed);
        self
    }

    /// `(name, value)` pairs in a fixed order; AUC only when defined.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
        ];
        if let Some(auc) = self.roc_auc {
            v.push(("roc_auc", auc));
        }
        v
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            op: "metrics",
            lhs: vec![scores.len()],
            rhs: vec![labels.len()],
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { op: "metrics" });
    }
    Ok(())
}

/// Confusion-matrix metrics with `score ≥ threshold` counted as positive.
/// AUC is filled in when both classes are present.
pub fn threshold_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricReport> {
    check_scores(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::Input("metrics need at least one sample".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(MetricReport {
        accuracy: ratio(tp + tn, scores.len()),
        precision,
        recall,
        f1: f1_score(precision, recall),
        roc_auc: roc_auc(scores, labels).ok(),
        threshold,
        samples: scores.len(),
        tp,
        fp,
        fn_,
        tn,
        task: None,
        seed: None,
    })
}

/// Twice the Mann–Whitney U of the positives, and the number of
/// positive/negative pairs. Ties get midranks, so `2U` is an integer.
pub fn mann_whitney_u2(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    check_scores(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc {
            positives: pos as usize,
            negatives: neg as usize,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Ranks are 1-based; a tie group spanning sorted positions i..=j has
    // midrank (i + j + 2) / 2, kept doubled to stay integral.
    let mut rank_sum2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid2 = (i + j + 2) as u64;
        rank_sum2 += mid2 * order[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        i = j + 1;
    }
    Ok((rank_sum2 - pos * (pos + 1), pos * neg))
}

/// Area under the ROC curve via the rank statistic.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (u2, pairs) = mann_whitney_u2(scores, labels)?;
    Ok(u2 as f64 / (2 * pairs) as f64)
}

/// One metric across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpread {
    pub metric: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSpread {
    pub fn minus(&self) -> f64 {
        self.mean - self.min
    }

    pub fn plus(&self) -> f64 {
        self.max - self.mean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub task: Option<Task>,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub metrics: Vec<MetricSpread>,
}

impl AggregateReport {
    pub fn get(&self, metric: &str) -> Option<&MetricSpread> {
        self.metrics.iter().find(|m| m.metric == metric)
    }

    /// `metric,mean,eminus,eplus,min,max`, six decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,mean,eminus,eplus,min,max\n");
        for m in &self.metrics {
            writeln!(s, "{},{:.6},{:.6},{:.6},{:.6},{:.6}", m.metric, m.mean, m.minus(), m.plus(), m.min, m.max).unwrap();
        }
        s
    }

    /// Human-readable rows such as `accuracy  0.808 -0.023/+0.018`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for m in &self.metrics {
            writeln!(s, "{:<10} {:.3} -{:.3}/+{:.3}", m.metric, m.mean, m.minus(), m.plus()).unwrap();
        }
        s
    }
}

/// Mean, min and max of each metric over runs. F1 is the mean of per-run
/// F1s. AUC is included only if every run has one.
pub fn aggregate_runs(reports: &[MetricReport]) -> Result<AggregateReport> {
    let first = reports.first().ok_or_else(|| Error::Contract("aggregate_runs needs at least one report".into()))?;
    for r in reports {
        if r.task != first.task {
            return Err(Error::Contract(format!("cannot aggregate {:?} with {:?} runs", r.task, first.task)));
        }
        if r.samples != first.samples {
            return Err(Error::Contract(format!(
                "runs scored on different test sets ({} vs {} samples)",
                r.samples, first.samples
            )));
        }
    }
    let mut names: Vec<&str> = vec!["accuracy", "precision", "recall", "f1"];
    if reports.iter().all(|r| r.roc_auc.is_some()) {
        names.push("roc_auc");
    }
    let metrics = names
        .into_iter()
        .map(|name| {
            let vals: Vec<f64> = reports
                .iter()
                .map(|r| r.values().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v).unwrap())
                .collect();
            // Sorting first makes the mean independent of run order.
            let mut sorted = vals.clone();
            sorted.sort_by(f64::total_cmp);
            let mean = (sorted.iter().sum::<f64>() / sorted.len() as f64).clamp(sorted[0], sorted[sorted.len() - 1]);
            MetricSpread {
                metric: name.to_string(),
                mean,
                min: sorted[0],
                max: sorted[sorted.len() - 1],
            }
        })
        .collect();
    Ok(AggregateReport {
        task: first.task,
        runs: reports.len(),
        seeds: reports.iter().filter_map(|r| r.seed).collect(),
        metrics,
    })
}
