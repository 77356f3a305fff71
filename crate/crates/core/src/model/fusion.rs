//! Token-fusion transformer.
//!
//! Both views go through one shared linear projection; the projected
//! sequences are concatenated behind a learnable `[CLS]` token, optionally
//! tagged with learned positional and per-view segment embeddings, and fed
//! through a pre-norm encoder. The final `[CLS]` row goes through the MLP
//! head (Linear → LayerNorm → ReLU → Dropout between layers) to one logit.

use super::{glorot, linear, small_normal, Bound, FusionModelConfig, Mode, ModelSpec, Network, ParamSet, ViewPair};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::{Scalar, Tape, Tensor, Var};

const LN_EPS: f32 = 1e-5;
const FF_MULT: usize = 4;

#[derive(Clone, Debug)]
pub struct FusionModel {
    config: FusionModelConfig,
    params: ParamSet,
}

impl FusionModel {
    /// Builds and initializes the model; all draws come from the seed's
    /// init stream in parameter order.
    pub fn new(config: FusionModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, Stream::Init);
        let (d_in, e) = (config.feature_dim_in, config.embed_dim);
        let ff = FF_MULT * e;
        let mut p = ParamSet::default();

        p.push("proj.weight", glorot(&mut rng, &[d_in, e], d_in, e));
        p.push("proj.bias", Tensor::zeros([e]));
        p.push("cls_token", small_normal(&mut rng, &[1, e]));
        if config.use_positional_embedding {
            p.push("pos_embedding", small_normal(&mut rng, &[config.sequence_len(), e]));
        }
        if config.use_view_segment_embedding {
            p.push("segment_embedding", small_normal(&mut rng, &[2, e]));
        }
        for l in 0..config.encoder_layers {
            let n = |s: &str| format!("encoder.{l}.{s}");
            p.push(n("ln1.gamma"), Tensor::full([e], 1.0));
            p.push(n("ln1.beta"), Tensor::zeros([e]));
            for w in ["q", "k", "v", "o"] {
                p.push(n(&format!("attn.w{w}")), glorot(&mut rng, &[e, e], e, e));
                p.push(n(&format!("attn.b{w}")), Tensor::zeros([e]));
            }
            p.push(n("ln2.gamma"), Tensor::full([e], 1.0));
            p.push(n("ln2.beta"), Tensor::zeros([e]));
            p.push(n("ff1.weight"), glorot(&mut rng, &[e, ff], e, ff));
            p.push(n("ff1.bias"), Tensor::zeros([ff]));
            p.push(n("ff2.weight"), glorot(&mut rng, &[ff, e], ff, e));
            p.push(n("ff2.bias"), Tensor::zeros([e]));
        }
        p.push("final_ln.gamma", Tensor::full([e], 1.0));
        p.push("final_ln.beta", Tensor::zeros([e]));
        for (i, w) in config.head_layer_sizes.windows(2).enumerate() {
            p.push(format!("head.{i}.weight"), glorot(&mut rng, &[w[0], w[1]], w[0], w[1]));
            p.push(format!("head.{i}.bias"), Tensor::zeros([w[1]]));
            if i + 2 < config.head_layer_sizes.len() {
                p.push(format!("head.{i}.ln.gamma"), Tensor::full([w[1]], 1.0));
                p.push(format!("head.{i}.ln.beta"), Tensor::zeros([w[1]]));
            }
        }
        Ok(Self { config, params: p })
    }

    pub fn config(&self) -> &FusionModelConfig {
        &self.config
    }

    fn check_view(&self, name: &str, t: &Tensor) -> Result<()> {
        let want = [self.config.tokens_per_view, self.config.feature_dim_in];
        if t.shape() != want {
            return Err(Error::Shape(format!(
                "{name} view has shape {:?}, expected {want:?} (tokens × width)",
                t.shape()
            )));
        }
        Ok(())
    }

    /// Applies the shared projection to one view's tokens (eval, no tape).
    pub fn project(&self, tokens: &Tensor) -> Result<Tensor> {
        self.check_view("input", tokens)?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let x = tape.constant(tokens.clone());
        let y = self.project_on(&mut tape, &bound, x)?;
        Ok(tape.value(y).clone())
    }

    fn project_on<T: Scalar>(&self, tape: &mut Tape<T>, b: &Bound, x: Var) -> Result<Var> {
        let p = &self.params;
        linear(tape, x, b.get(p, "proj.weight"), b.get(p, "proj.bias"))
    }

    fn attention<T: Scalar>(&self, tape: &mut Tape<T>, b: &Bound, l: usize, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        let p = &self.params;
        let w = |s: &str| b.get(p, &format!("encoder.{l}.attn.{s}"));
        let q = linear(tape, x, w("wq"), w("bq"))?;
        let k = linear(tape, x, w("wk"), w("bk"))?;
        let v = linear(tape, x, w("wv"), w("bv"))?;
        let dk = self.config.head_dim();
        let scale = 1.0 / (dk as f32).sqrt();
        let mut heads = Vec::with_capacity(self.config.attention_heads);
        for h in 0..self.config.attention_heads {
            let (lo, hi) = (h * dk, (h + 1) * dk);
            let qh = tape.slice_cols(q, lo, hi)?;
            let kh = tape.slice_cols(k, lo, hi)?;
            let vh = tape.slice_cols(v, lo, hi)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale)?;
            let probs = tape.softmax(scores, 1)?;
            let probs = mode.dropout(tape, probs, self.config.dropout)?;
            heads.push(tape.matmul(probs, vh)?);
        }
        let ctx = tape.concat(&heads, 1)?;
        linear(tape, ctx, w("wo"), w("bo"))
    }

    fn encoder_block<T: Scalar>(&self, tape: &mut Tape<T>, b: &Bound, l: usize, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        let p = &self.params;
        let w = |s: &str| b.get(p, &format!("encoder.{l}.{s}"));
        let h = tape.layer_norm(x, w("ln1.gamma"), w("ln1.beta"), LN_EPS)?;
        let a = self.attention(tape, b, l, h, mode)?;
        let x = tape.add(x, a)?;
        let h = tape.layer_norm(x, w("ln2.gamma"), w("ln2.beta"), LN_EPS)?;
        let h = linear(tape, h, w("ff1.weight"), w("ff1.bias"))?;
        let h = tape.relu(h)?;
        let h = linear(tape, h, w("ff2.weight"), w("ff2.bias"))?;
        let h = mode.dropout(tape, h, self.config.dropout)?;
        tape.add(x, h)
    }
}

impl Network for FusionModel {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec::Fusion(self.config.clone())
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &Bound, input: &ViewPair, mode: &mut Mode<'_>) -> Result<Var> {
        self.check_view("infant", &input.infant)?;
        self.check_view("parent", &input.parent)?;
        let p = &self.params;
        let cfg = &self.config;
        let n = cfg.tokens_per_view;

        let a = tape.constant(input.infant.cast());
        let c = tape.constant(input.parent.cast());
        let pa = self.project_on(tape, b, a)?;
        let pc = self.project_on(tape, b, c)?;

        let mut seq = tape.concat(&[b.get(p, "cls_token"), pa, pc], 0)?;
        if cfg.use_positional_embedding {
            seq = tape.add(seq, b.get(p, "pos_embedding"))?;
        }
        if cfg.use_view_segment_embedding {
            let ids: Vec<usize> = std::iter::repeat_n(0, n).chain(std::iter::repeat_n(1, n)).collect();
            let views = tape.embedding_lookup(b.get(p, "segment_embedding"), &ids)?;
            let cls_slot = tape.constant(Tensor::<T>::filled([1, cfg.embed_dim], T::zero()));
            let seg = tape.concat(&[cls_slot, views], 0)?;
            seq = tape.add(seq, seg)?;
        }

        let mut h = seq;
        for l in 0..cfg.encoder_layers {
            h = self.encoder_block(tape, b, l, h, mode)?;
        }
        h = tape.layer_norm(h, b.get(p, "final_ln.gamma"), b.get(p, "final_ln.beta"), LN_EPS)?;

        let mut x = tape.embedding_lookup(h, &[0])?;
        let layers = cfg.head_layer_sizes.len() - 1;
        for i in 0..layers {
            x = linear(tape, x, b.get(p, &format!("head.{i}.weight")), b.get(p, &format!("head.{i}.bias")))?;
            if i + 1 < layers {
                x = tape.layer_norm(x, b.get(p, &format!("head.{i}.ln.gamma")), b.get(p, &format!("head.{i}.ln.beta")), LN_EPS)?;
                x = tape.relu(x)?;
                x = mode.dropout(tape, x, cfg.dropout)?;
            }
        }
        tape.reshape(x, [1])
    }
}
