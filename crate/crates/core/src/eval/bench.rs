use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Network, ViewPair};

/// Fewest samples a measurement covers; smaller inputs are cycled.
pub const MIN_BENCH_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub samples: usize,
    pub batch_size: usize,
    pub elapsed_s: f64,
    pub samples_per_second: f64,
    /// Per-batch wall-clock latency in milliseconds.
    pub latency_mean_ms: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
    pub latency_max_ms: f64,
}

/// Eval-mode inference throughput. One warm-up batch runs before timing.
/// Results depend on the machine and are reported, not asserted.
pub fn bench_throughput<N: Network>(model: &N, inputs: &[ViewPair], batch_size: usize) -> Result<BenchReport> {
    if inputs.is_empty() {
        return Err(Error::Input("bench needs at least one input".into()));
    }
    if batch_size == 0 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    let total = inputs.len().max(MIN_BENCH_SAMPLES);
    let cycled: Vec<&ViewPair> = inputs.iter().cycle().take(total).collect();

    for x in cycled.iter().take(batch_size) {
        model.logit(x)?;
    }

    let mut latencies = Vec::with_capacity(total.div_ceil(batch_size));
    let start = Instant::now();
    for batch in cycled.chunks(batch_size) {
        let t = Instant::now();
        for x in batch {
            std::hint::black_box(model.logit(x)?);
        }
        latencies.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let elapsed_s = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);

    let mut sorted = latencies.clone();
    sorted.sort_by(f64::total_cmp);
    let pct = |q: f64| sorted[((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)];
    Ok(BenchReport {
        samples: total,
        batch_size,
        elapsed_s,
        samples_per_second: total as f64 / elapsed_s,
        latency_mean_ms: latencies.iter().sum::<f64>() / latencies.len() as f64,
        latency_p50_ms: pct(0.5),
        latency_p95_ms: pct(0.95),
        latency_max_ms: sorted[sorted.len() - 1],
    })
}
