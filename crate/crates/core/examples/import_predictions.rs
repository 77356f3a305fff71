// Scores predictions made by another system, with probabilities or with
// hard 0/1 outputs.

use gazefuse::eval::{parse_predictions, scored_pairs, threshold_metrics};
use gazefuse::Task;

const CSV: &str = "\
session,timestamp_s,task,probability,label
s03,0,MG,0.91,1
s03,1,MG,0.40,1
s03,2,MG,0.12,0
s03,3,MG,0.66,0
s03,4,MG,1,1
s03,5,MG,0,0
s03,0,JA,0.7,
";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let records = parse_predictions(CSV, "external.csv")?;
    let (scores, labels) = scored_pairs(&records, Task::MutualGaze);
    let r = threshold_metrics(&scores, &labels, 0.5)?;
    println!("MG over {} labeled rows: precision {:.3} recall {:.3} f1 {:.3} auc {:?}", r.samples, r.precision, r.recall, r.f1, r.roc_auc);
    let (ja, _) = scored_pairs(&records, Task::JointAttention);
    println!("JA rows with labels: {}", ja.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
