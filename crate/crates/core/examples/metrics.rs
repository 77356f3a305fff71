// Threshold metrics, rank AUC and the mean with min/max spread across seeds.

use gazefuse::eval::{aggregate_runs, roc_auc, threshold_metrics};
use gazefuse::Task;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let labels = [true, true, false, true, false, false, true, false];
    let mut reports = Vec::new();
    for seed in 0..3u64 {
        let scores: Vec<f64> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| if l { 0.6 } else { 0.4 } + 0.25 * ((i as f64 + seed as f64) * 1.7).sin())
            .collect();
        let r = threshold_metrics(&scores, &labels, 0.5)?.with_run(Task::JointAttention, seed);
        println!("seed {seed}: f1 {:.3} auc {:.3}", r.f1, roc_auc(&scores, &labels)?);
        reports.push(r);
    }
    print!("{}", aggregate_runs(&reports)?.render());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
