use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 6.1e-6,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moments are stored as `f32`; each element's update
/// is computed in `f64` and rounded once.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &[Tensor], config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::Dimension {
                op: "adam_step",
                lhs: vec![params.len(), grads.len()],
                rhs: vec![self.m.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
        } = self.config;
        let c1 = 1.0 - b1.powf(self.step as f64);
        let c2 = 1.0 - b2.powf(self.step as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let lanes = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
            for ((w, &g), (m, v)) in lanes {
                let g = g as f64;
                let m_new = b1 * *m as f64 + (1.0 - b1) * g;
                let v_new = b2 * *v as f64 + (1.0 - b2) * g * g;
                *m = m_new as f32;
                *v = v_new as f32;
                let update = lr * (m_new / c1) / ((v_new / c2).sqrt() + eps);
                *w = (*w as f64 - update) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameter() {
        let mut p = vec![Tensor::new([2], vec![1.5, -2.0]).unwrap()];
        let mut opt = Adam::new(&p, AdamConfig::default());
        opt.step(&mut p, &[Tensor::zeros([2])]).unwrap();
        assert_eq!(p[0].data(), &[1.5, -2.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = vec![Tensor::zeros([2])];
        let mut opt = Adam::new(&p, AdamConfig::default());
        assert!(opt.step(&mut p, &[Tensor::zeros([3])]).is_err());
    }
}
