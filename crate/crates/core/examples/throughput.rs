// Batched inference throughput of the tiny fusion model.

use gazefuse::eval::bench_throughput;
use gazefuse::model::{FusionModel, FusionModelConfig, ViewPair};
use gazefuse::Tensor;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = FusionModelConfig::tiny();
    let model = FusionModel::new(cfg.clone(), 0)?;
    let s = [cfg.tokens_per_view, cfg.feature_dim_in];
    let inputs: Vec<ViewPair> = (0..32)
        .map(|i| ViewPair {
            infant: Tensor::full(s.to_vec(), i as f32 / 32.0),
            parent: Tensor::full(s.to_vec(), -(i as f32) / 32.0),
        })
        .collect();
    let r = bench_throughput(&model, &inputs, 8)?;
    println!("{} samples in batches of {}: {:.0} samples/s, mean batch latency {:.3} ms", r.samples, r.batch_size, r.samples_per_second, r.latency_mean_ms);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
