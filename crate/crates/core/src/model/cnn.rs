//! Two-stream convolutional baseline.

use super::{glorot, linear, BaselineCnnConfig, Bound, Mode, ModelSpec, Network, ParamSet, ViewPair};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::{Scalar, Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct CnnBaseline {
    config: BaselineCnnConfig,
    params: ParamSet,
}

const STREAMS: [&str; 2] = ["infant", "parent"];

impl CnnBaseline {
    pub fn new(config: BaselineCnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, Stream::Init);
        let mut p = ParamSet::default();
        for s in STREAMS {
            let mut c_in = config.in_channels;
            for (b, (&c_out, &k)) in config.block_channels.iter().zip(&config.kernel_sizes).enumerate() {
                let shape = [c_out, c_in, k, k];
                p.push(format!("{s}.conv{b}.weight"), glorot(&mut rng, &shape, c_in * k * k, c_out * k * k));
                p.push(format!("{s}.conv{b}.bias"), Tensor::zeros([c_out]));
                c_in = c_out;
            }
        }
        for (i, w) in config.fc_sizes.windows(2).enumerate() {
            p.push(format!("fc.{i}.weight"), glorot(&mut rng, &[w[0], w[1]], w[0], w[1]));
            p.push(format!("fc.{i}.bias"), Tensor::zeros([w[1]]));
        }
        Ok(Self { config, params: p })
    }

    pub fn config(&self) -> &BaselineCnnConfig {
        &self.config
    }

    fn check_image(&self, name: &str, t: &Tensor) -> Result<()> {
        let &[c, h, w] = t.shape() else {
            return Err(Error::Shape(format!("{name} image must be c×h×w, got {:?}", t.shape())));
        };
        if c != self.config.in_channels {
            return Err(Error::Shape(format!("{name} image has {c} channels, expected {}", self.config.in_channels)));
        }
        for extent in [h, w] {
            if let Err(block) = self.config.output_extent(extent) {
                return Err(Error::config(
                    "pool_size",
                    format!("{name} image {h}×{w} underflows after block {block}"),
                ));
            }
        }
        Ok(())
    }

    fn stream<T: Scalar>(&self, tape: &mut Tape<T>, b: &Bound, s: &str, image: &Tensor) -> Result<Var> {
        let p = &self.params;
        let mut x = tape.constant(image.cast());
        for (i, &k) in self.config.kernel_sizes.iter().enumerate() {
            let w = b.get(p, &format!("{s}.conv{i}.weight"));
            let bias = b.get(p, &format!("{s}.conv{i}.bias"));
            x = tape.conv2d(x, w, Some(bias), 1, k / 2)?;
            x = tape.relu(x)?;
            x = tape.max_pool2d(x, self.config.pool_size, self.config.pool_size)?;
        }
        let x = tape.adaptive_avg_pool2d(x)?;
        let c = self.config.block_channels[BaselineCnnConfig::BLOCKS - 1];
        tape.reshape(x, [1, c])
    }
}

impl Network for CnnBaseline {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec::Cnn(self.config.clone())
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, b: &Bound, input: &ViewPair, mode: &mut Mode<'_>) -> Result<Var> {
        self.check_image("infant", &input.infant)?;
        self.check_image("parent", &input.parent)?;
        let a = self.stream(tape, b, STREAMS[0], &input.infant)?;
        let c = self.stream(tape, b, STREAMS[1], &input.parent)?;
        let mut x = tape.concat(&[a, c], 1)?;
        let p = &self.params;
        let layers = self.config.fc_sizes.len() - 1;
        for i in 0..layers {
            x = linear(tape, x, b.get(p, &format!("fc.{i}.weight")), b.get(p, &format!("fc.{i}.bias")))?;
            if i + 1 < layers {
                x = tape.relu(x)?;
                x = mode.dropout(tape, x, self.config.dropout)?;
            }
        }
        tape.reshape(x, [1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn underflow_is_a_config_error() {
        let m = CnnBaseline::new(BaselineCnnConfig::tiny(), 0).unwrap();
        let img = Tensor::zeros([3, 4, 4]);
        let x = ViewPair {
            infant: img.clone(),
            parent: img,
        };
        assert!(matches!(m.logit(&x), Err(Error::Config { .. })));
    }

    #[test]
    fn streams_have_separate_weights() {
        let m = CnnBaseline::new(BaselineCnnConfig::tiny(), 0).unwrap();
        assert_ne!(m.params().get("infant.conv0.weight"), m.params().get("parent.conv0.weight"));
    }
}
