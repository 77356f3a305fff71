// Finite-difference check of a small computation and of the whole tiny
// fusion model.

use gazefuse::gradcheck::{self, GradCheckConfig, Probe};
use gazefuse::model::{Bound, FusionModel, FusionModelConfig, Mode, Network, ViewPair};
use gazefuse::tensor::Scalar;
use gazefuse::{Tape, Tensor, Var};

struct Loss<'a> {
    model: &'a FusionModel,
    input: ViewPair,
}

impl Probe for Loss<'_> {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> gazefuse::Result<Var> {
        let bound = Bound { vars: inputs.to_vec() };
        let z = self.model.forward(tape, &bound, &self.input, &mut Mode::Eval)?;
        tape.bce_with_logits(z, &[1.0])
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = GradCheckConfig::default();

    let w = Tensor::new([2, 3], vec![0.3, -0.2, 0.5, 0.1, 0.4, -0.6])?;
    let x = Tensor::new([3, 1], vec![1.0, -1.5, 0.25])?;
    let r = gazefuse::gradcheck!(&[w, x], &cfg, |t, v| {
        let z = t.matmul(v[0], v[1])?;
        let s = t.sigmoid(z)?;
        t.sum(s)
    })?;
    println!("sum(sigmoid(Wx)): {} coordinates, max rel err {:.2e}", r.checked, r.max_rel_error);
    assert!(r.passed());

    let mcfg = FusionModelConfig::tiny();
    let model = FusionModel::new(mcfg.clone(), 7)?;
    let s = [mcfg.tokens_per_view, mcfg.feature_dim_in];
    let input = ViewPair {
        infant: Tensor::new(s, (0..32).map(|i| (i as f32 * 0.37).sin()).collect())?,
        parent: Tensor::new(s, (0..32).map(|i| (i as f32 * 0.11).cos()).collect())?,
    };
    let check = GradCheckConfig { scale_floor: 1e-4, ..cfg };
    let r = gradcheck::check(model.params().tensors(), &check, &Loss { model: &model, input })?;
    println!("tiny fusion model: {} weights, max rel err {:.2e}", r.checked, r.max_rel_error);
    assert!(r.passed());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
