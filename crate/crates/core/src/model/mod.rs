//! Trainable networks: the dual-view fusion transformer and the two-stream
//! CNN baseline, plus the checkpoint format they share.

mod checkpoint;
mod cnn;
mod config;
mod fusion;

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, TrainingMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use cnn::CnnBaseline;
pub use config::{BaselineCnnConfig, FusionModelConfig, ModelSpec};
pub use fusion::FusionModel;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Named weight arrays in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(value);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.position(name).map(|i| &mut self.tensors[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar weights.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Records every weight as a trainable leaf, in order.
    pub fn bind<T: Scalar>(&self, tape: &mut Tape<T>) -> Bound {
        Bound {
            vars: self.tensors.iter().map(|t| tape.param(t.cast())).collect(),
        }
    }

    /// Replaces the weights with `other`'s after checking names and shapes.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.names != other.names {
            return Err(Error::CorruptCheckpoint(format!(
                "parameter names differ: expected {} entries, found {}",
                self.names.len(),
                other.names.len()
            )));
        }
        for ((name, mine), theirs) in self.names.iter().zip(&self.tensors).zip(&other.tensors) {
            if mine.shape() != theirs.shape() {
                return Err(Error::CorruptCheckpoint(format!(
                    "{name}: expected shape {:?}, found {:?}",
                    mine.shape(),
                    theirs.shape()
                )));
            }
        }
        self.tensors = other.tensors.clone();
        Ok(())
    }
}

/// Tape handles for a bound [`ParamSet`], in parameter order.
#[derive(Clone, Debug)]
pub struct Bound {
    pub vars: Vec<Var>,
}

impl Bound {
    pub fn get(&self, params: &ParamSet, name: &str) -> Var {
        let i = params.position(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.vars[i]
    }
}

/// One synchronized input: the infant-view and parent-view tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewPair {
    pub infant: Tensor,
    pub parent: Tensor,
}

/// A [`ViewPair`] with its binary label.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub pair: ViewPair,
    pub label: f32,
}

/// Forward-pass mode. Dropout draws from the supplied stream in training.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut StreamRng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    pub(crate) fn dropout<T: Scalar>(&mut self, tape: &mut Tape<T>, x: Var, p: f64) -> Result<Var> {
        match self {
            Mode::Eval if (0.0..1.0).contains(&p) => Ok(x),
            Mode::Eval => Err(Error::config("dropout", format!("probability {p} outside [0, 1)"))),
            Mode::Train(rng) => tape.dropout(x, p, true, *rng),
        }
    }
}

/// A classifier mapping a [`ViewPair`] to one logit.
pub trait Network {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn spec(&self) -> ModelSpec;

    /// Records the forward pass and returns the raw logit (shape `[1]`).
    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, input: &ViewPair, mode: &mut Mode<'_>) -> Result<Var>;

    /// Eval-mode logit for one input.
    fn logit(&self, input: &ViewPair) -> Result<f32> {
        let mut tape = Tape::new();
        let bound = self.params().bind(&mut tape);
        let out = self.forward(&mut tape, &bound, input, &mut Mode::Eval)?;
        tape.value(out).item()
    }

    /// Eval-mode probability `σ(logit)`.
    fn predict_proba(&self, input: &ViewPair) -> Result<f32> {
        self.logit(input).map(crate::tensor::sigmoid)
    }
}

// ── Initialization ──────────────────────────────────────────────────

/// Glorot-uniform draw in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot(rng: &mut StreamRng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-bound..=bound)).collect()).expect("valid shape")
}

/// Normal draw with σ = 0.02 for tokens and embeddings.
pub(crate) fn small_normal(rng: &mut StreamRng, shape: &[usize]) -> Tensor {
    let dist = Normal::new(0.0f32, 0.02).expect("valid sigma");
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("valid shape")
}

/// `x·W + b` with `W` stored as `in×out`.
pub(crate) fn linear<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_bias(y, b)
}
