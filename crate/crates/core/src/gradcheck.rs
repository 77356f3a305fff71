//! Central finite-difference gradient checking.
//!
//! The analytic side is the `f32` tape's backward pass. The numeric side
//! replays only the forward computation, in `f64`, so neither the backward
//! rules nor `f32` rounding leak into the reference. For a non-scalar
//! output `y` the checked function is the projection `Σ wᵢ·yᵢ` with fixed
//! random weights, and the analytic side backpropagates the same `w` as the
//! upstream gradient.

use rand::Rng;

use crate::error::Result;
use crate::rng::{self, Stream};
use crate::tensor::{Scalar, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    /// Perturbation applied to each input coordinate.
    pub eps: f64,
    /// Largest accepted relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so coordinates whose
    /// true gradient is ~0 are judged on absolute error.
    pub scale_floor: f64,
    /// Seed for the output projection weights.
    pub seed: u64,
    /// How many times a mismatching coordinate is re-checked with a step ten
    /// times smaller. A ReLU or max-pool kink inside `±eps` spoils the
    /// central difference; it leaves the stencil as the step shrinks, while a
    /// wrong backward rule disagrees at every step.
    pub refinements: u32,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            tolerance: 1e-3,
            scale_floor: 1e-6,
            seed: 0,
            refinements: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinates that only agreed after a smaller step.
    pub refined: usize,
    pub failures: Vec<Mismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// A computation that can be replayed at either precision.
pub trait Probe {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> Result<Var>;
}

/// Checks a [`Probe`]'s gradient with respect to every input coordinate.
pub fn check<P: Probe>(inputs: &[Tensor], cfg: &GradCheckConfig, probe: &P) -> Result<GradCheckReport> {
    check_pair(inputs, cfg, |t, v| probe.eval(t, v), |t, v| probe.eval(t, v))
}

/// Same as [`check`], for callers that supply the computation as two
/// closures (one per precision); the [`gradcheck!`](crate::gradcheck!)
/// macro writes both from one body.
pub fn check_pair<F32, F64>(inputs: &[Tensor], cfg: &GradCheckConfig, single: F32, double: F64) -> Result<GradCheckReport>
where
    F32: Fn(&mut Tape<f32>, &[Var]) -> Result<Var>,
    F64: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::<f32>::default();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = single(&mut tape, &vars)?;
    let n_out = tape.value(out).numel();
    let weights: Vec<f64> = if n_out == 1 {
        vec![1.0]
    } else {
        let mut r = rng::stream(cfg.seed, Stream::Synthetic);
        (0..n_out).map(|_| r.random_range(-1.0f32..1.0) as f64).collect()
    };
    tape.backward_from(out, weights.iter().map(|&w| w as f32).collect())?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(t.shape().to_vec())))
        .collect();

    let mut wide: Vec<Tensor<f64>> = inputs.iter().map(Tensor::cast).collect();
    let objective = |wide: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::<f64>::default();
        let vars: Vec<Var> = wide.iter().map(|t| tape.param(t.clone())).collect();
        let out = double(&mut tape, &vars)?;
        Ok(tape.value(out).data().iter().zip(&weights).map(|(y, w)| y * w).sum())
    };

    let mut report = GradCheckReport::default();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.numel() {
            let a = analytic[i].data()[j] as f64;
            let mut eps = cfg.eps;
            let mut attempt = 0;
            let (numeric, err) = loop {
                let x = wide[i].data()[j];
                wide[i].data_mut()[j] = x + eps;
                let f_plus = objective(&wide)?;
                wide[i].data_mut()[j] = x - eps;
                let f_minus = objective(&wide)?;
                wide[i].data_mut()[j] = x;

                let numeric = (f_plus - f_minus) / (2.0 * eps);
                let err = relative_error(a, numeric, cfg.scale_floor);
                if err <= cfg.tolerance || attempt == cfg.refinements {
                    break (numeric, err);
                }
                attempt += 1;
                eps /= 10.0;
            };
            if attempt > 0 && err <= cfg.tolerance {
                report.refined += 1;
            }
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(err);
            if err > cfg.tolerance {
                report.failures.push(Mismatch {
                    input: i,
                    index: j,
                    analytic: a,
                    numeric,
                    rel_error: err,
                });
            }
        }
    }
    Ok(report)
}

/// `gradcheck!(inputs, cfg, |tape, vars| body)` checks `body` with the
/// analytic side in `f32` and the finite-difference side in `f64`.
#[macro_export]
macro_rules! gradcheck {
    ($inputs:expr, $cfg:expr, |$t:ident, $v:ident| $body:expr) => {
        $crate::gradcheck::check_pair(
            $inputs,
            $cfg,
            |$t: &mut $crate::Tape<f32>, $v: &[$crate::Var]| $body,
            |$t: &mut $crate::Tape<f64>, $v: &[$crate::Var]| $body,
        )
    };
}
