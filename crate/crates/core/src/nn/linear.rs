use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{gemm, MatRef, Tensor2};

/// Fully connected layer `y = x·Wᵀ + b`, applied row-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(ps: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            inputs,
            outputs,
            weight: ps.add_uniform(format!("{name}.weight"), outputs, inputs, bound, rng),
            bias: ps.add_uniform(format!("{name}.bias"), 1, outputs, bound, rng),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor2) -> Tensor2 {
        let mut y = Tensor2::zeros(x.rows(), self.outputs);
        let b = ps.get(self.bias).data();
        for r in 0..y.rows() {
            y.row_mut(r).copy_from_slice(b);
        }
        gemm(1.0, MatRef::of(x), MatRef::of(ps.get(self.weight)).t(), 1.0, y.data_mut(), self.outputs);
        y
    }

    /// Accumulates parameter gradients and returns `dx`.
    pub fn backward(&self, ps: &ParamStore, x: &Tensor2, dy: &Tensor2, grads: &mut Grads) -> Tensor2 {
        gemm(1.0, MatRef::of(dy).t(), MatRef::of(x), 1.0, grads.get_mut(self.weight).data_mut(), self.inputs);
        dy.col_sums_into(grads.get_mut(self.bias).data_mut());
        let mut dx = Tensor2::zeros(x.rows(), self.inputs);
        gemm(1.0, MatRef::of(dy), MatRef::of(ps.get(self.weight)), 0.0, dx.data_mut(), self.inputs);
        dx
    }
}
