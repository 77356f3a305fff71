// Trains the tiny fusion model on planted token pairs whose label depends
// on both views, then the two-stream CNN on planted rasters.

use gazefuse::model::{BaselineCnnConfig, CnnBaseline};
use gazefuse::optim::synthetic::{planted_image_task, PlantedSetup};
use gazefuse::optim::{train, TrainConfig};
use gazefuse::Task;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let r = PlantedSetup::default().run(0)?;
    println!("fusion: train F1 {:.3}, held-out AUC {:.3}", r.train_f1, r.test_auc);
    let last = r.history.epochs.last().expect("trained");
    println!("final epoch {} loss {:.4}", last.epoch, last.train_loss);

    let data = planted_image_task(16, 16, 3);
    let mut cnn = CnnBaseline::new(BaselineCnnConfig::tiny(), 0)?;
    let cfg = TrainConfig { learning_rate: 1e-2, max_epochs: 3, ..Default::default() };
    let out = train(&mut cnn, Task::MutualGaze, &data[..12], &data[12..], &cfg)?;
    println!("cnn: {} steps, last loss {:.4}", out.history.step_losses.len(), out.history.step_losses.last().unwrap());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
