use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::eval::{threshold_metrics, MetricReport};
use crate::model::{Example, Mode, ModelCheckpoint, Network, TrainingMeta};
use crate::rng::{self, Stream};
use crate::tensor::{Tape, Tensor};
use crate::Task;

/// Training hyperparameters. Defaults are the reference setup: Adam at
/// 6.1e-6, batch 8, up to 80 epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub threshold_for_val_f1: f64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 6.1e-6,
            batch_size: 8,
            max_epochs: 80,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            threshold_for_val_f1: 0.5,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is accepted so a run can be checked for weight immutability.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be at least 1"));
        }
        for (field, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(field, format!("{b} outside (0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::config("adam_eps", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold_for_val_f1) {
            return Err(Error::config("threshold_for_val_f1", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch.
    pub train_loss: f64,
    pub val: Option<MetricReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Mean batch loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

impl TrainHistory {
    /// `epoch,train_loss,val_accuracy,val_precision,val_recall,val_f1`;
    /// validation columns are empty when there was no validation set.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_accuracy,val_precision,val_recall,val_f1\n");
        for e in &self.epochs {
            match &e.val {
                Some(v) => writeln!(
                    s,
                    "{},{:.8},{:.6},{:.6},{:.6},{:.6}",
                    e.epoch, e.train_loss, v.accuracy, v.precision, v.recall, v.f1
                ),
                None => writeln!(s, "{},{:.8},,,,", e.epoch, e.train_loss),
            }
            .unwrap();
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights of the epoch with the highest validation F1 (earliest on
    /// ties), or of the last epoch when there is no validation set.
    pub best: ModelCheckpoint,
    pub history: TrainHistory,
}

/// Sigmoid probabilities of every example in eval mode.
pub fn predict_probabilities<N: Network>(model: &N, examples: &[Example]) -> Result<Vec<f64>> {
    examples.iter().map(|e| model.predict_proba(&e.pair).map(f64::from)).collect()
}

/// Eval-mode metrics of a model on labeled examples.
pub fn evaluate<N: Network>(model: &N, examples: &[Example], threshold: f64) -> Result<MetricReport> {
    let scores = predict_probabilities(model, examples)?;
    let labels: Vec<bool> = examples.iter().map(|e| e.label >= 0.5).collect();
    threshold_metrics(&scores, &labels, threshold)
}

/// Minibatch Adam on mean BCE. The model ends holding the final-epoch
/// weights; the returned checkpoint holds the selected epoch's.
pub fn train<N: Network>(model: &mut N, task: Task, train_set: &[Example], val_set: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if let Some(e) = train_set.iter().chain(val_set).find(|e| e.label != 0.0 && e.label != 1.0) {
        return Err(Error::Contract(format!("labels must be 0 or 1, found {}", e.label)));
    }
    if val_set.is_empty() {
        log::warn!("no validation samples; the last epoch's weights will be kept");
    }

    let mut shuffle_rng = rng::stream(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = rng::stream(cfg.seed, Stream::Dropout);
    let mut opt = Adam::new(model.params().tensors(), cfg.adam());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(ModelCheckpoint, f64)> = None;

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut shuffle_rng);
        }
        let mut loss_sum = 0.0f64;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let step = history.step_losses.len() + 1;
            let as_step_error = |e: Error| match e {
                Error::NonFinite { .. } => Error::NonFiniteLoss { epoch, step },
                other => other,
            };
            let mut tape = Tape::new();
            let bound = model.params().bind(&mut tape);
            let mut logits = Vec::with_capacity(batch.len());
            for &i in batch {
                let mut mode = Mode::Train(&mut dropout_rng);
                logits.push(model.forward(&mut tape, &bound, &train_set[i].pair, &mut mode).map_err(as_step_error)?);
            }
            let z = tape.concat(&logits, 0).map_err(as_step_error)?;
            let targets: Vec<f32> = batch.iter().map(|&i| train_set[i].label).collect();
            let loss = tape.bce_with_logits(z, &targets).map_err(as_step_error)?;
            let value = tape.value(loss).item()? as f64;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            tape.backward(loss)?;
            let grads: Vec<Tensor> = bound
                .vars
                .iter()
                .zip(model.params().tensors())
                .map(|(&v, p)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(p.shape().to_vec())))
                .collect();
            opt.step(model.params_mut().tensors_mut(), &grads)?;
            history.step_losses.push(value);
            loss_sum += value * batch.len() as f64;
            log::trace!("epoch {epoch} batch {b}: loss {value:.6}");
        }

        let val = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(model, val_set, cfg.threshold_for_val_f1)?)
        };
        let f1 = val.as_ref().map(|v| v.f1);
        let train_loss = loss_sum / train_set.len() as f64;
        log::debug!("epoch {epoch}: train loss {train_loss:.6}, val f1 {f1:?}");
        history.epochs.push(EpochRecord { epoch, train_loss, val });

        let improves = match (&best, f1) {
            (None, _) => true,
            (Some(_), None) => true,
            (Some((_, b)), Some(f)) => f > *b,
        };
        if improves {
            let meta = TrainingMeta {
                task,
                epoch: epoch as u32,
                seed: cfg.seed,
                val_f1: f1,
            };
            best = Some((ModelCheckpoint::from_model(model, meta), f1.unwrap_or(f64::NEG_INFINITY)));
        }
    }

    Ok(TrainOutcome {
        best: best.expect("at least one epoch").0,
        history,
    })
}
