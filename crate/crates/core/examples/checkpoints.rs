// Saves a model checkpoint, reloads it and checks the predictions agree.

use gazefuse::model::{load_checkpoint, save_checkpoint, FusionModel, FusionModelConfig, ModelCheckpoint, Network, TrainingMeta, ViewPair};
use gazefuse::{Task, Tensor};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = FusionModelConfig::tiny();
    let model = FusionModel::new(cfg.clone(), 3)?;
    let meta = TrainingMeta { task: Task::MutualGaze, epoch: 12, seed: 3, val_f1: Some(0.8) };

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("mg_seed3.gfck");
    save_checkpoint(&ModelCheckpoint::from_model(&model, meta), &path)?;
    let loaded = load_checkpoint(&path)?;
    println!("{}: {:?}, {} bytes", path.display(), loaded.meta, std::fs::metadata(&path)?.len());

    let x = ViewPair {
        infant: Tensor::full([cfg.tokens_per_view, cfg.feature_dim_in], 0.2),
        parent: Tensor::full([cfg.tokens_per_view, cfg.feature_dim_in], -0.1),
    };
    let restored = loaded.into_fusion()?;
    assert_eq!(model.predict_proba(&x)?.to_bits(), restored.predict_proba(&x)?.to_bits());
    println!("p = {:.4} before and after", restored.predict_proba(&x)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
