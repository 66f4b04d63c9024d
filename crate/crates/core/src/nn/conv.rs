//! Causal dilated convolution with kernel size 2.
//!
//! `y[t] = W_now·x[t] + W_past·x[t − dilation] + b`, where samples before the
//! start of the sequence are zero. In the time-major layout the delayed input
//! is just the same buffer offset by `dilation · batch` rows, so both taps are
//! plain matrix products on sub-slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{gemm, MatRef, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalConv {
    pub inputs: usize,
    pub outputs: usize,
    pub dilation: usize,
    pub w_now: ParamId,
    pub w_past: ParamId,
    pub bias: ParamId,
}

impl CausalConv {
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / ((2 * inputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            dilation,
            w_now: ps.add_uniform(format!("{name}.w_now"), outputs, inputs, bound, rng),
            w_past: ps.add_uniform(format!("{name}.w_past"), outputs, inputs, bound, rng),
            bias: ps.add_uniform(format!("{name}.bias"), 1, outputs, bound, rng),
        }
    }

    pub fn param_count(inputs: usize, outputs: usize) -> usize {
        outputs * (2 * inputs + 1)
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor2, steps: usize, batch: usize) -> Result<Tensor2> {
        if x.cols() != self.inputs || x.rows() != steps * batch {
            return Err(Error::Shape(format!(
                "conv expects {}x{} input, got {}x{}",
                steps * batch,
                self.inputs,
                x.rows(),
                x.cols()
            )));
        }
        let mut y = Tensor2::zeros(x.rows(), self.outputs);
        let b = ps.get(self.bias).data();
        for r in 0..y.rows() {
            y.row_mut(r).copy_from_slice(b);
        }
        gemm(1.0, MatRef::of(x), MatRef::of(ps.get(self.w_now)).t(), 1.0, y.data_mut(), self.outputs);
        if self.dilation < steps {
            let shift = self.dilation * batch;
            let n = x.rows() - shift;
            gemm(
                1.0,
                MatRef::new(x.rows_slice(0, n), n, self.inputs),
                MatRef::of(ps.get(self.w_past)).t(),
                1.0,
                y.rows_slice_mut(shift, n),
                self.outputs,
            );
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dx`.
    pub fn backward(&self, ps: &ParamStore, x: &Tensor2, dy: &Tensor2, steps: usize, batch: usize, grads: &mut Grads) -> Tensor2 {
        let (ci, co) = (self.inputs, self.outputs);
        gemm(1.0, MatRef::of(dy).t(), MatRef::of(x), 1.0, grads.get_mut(self.w_now).data_mut(), ci);
        dy.col_sums_into(grads.get_mut(self.bias).data_mut());
        let mut dx = Tensor2::zeros(x.rows(), ci);
        gemm(1.0, MatRef::of(dy), MatRef::of(ps.get(self.w_now)), 0.0, dx.data_mut(), ci);
        if self.dilation < steps {
            let shift = self.dilation * batch;
            let n = x.rows() - shift;
            let dy_late = MatRef::new(dy.rows_slice(shift, n), n, co);
            gemm(
                1.0,
                dy_late.t(),
                MatRef::new(x.rows_slice(0, n), n, ci),
                1.0,
                grads.get_mut(self.w_past).data_mut(),
                ci,
            );
            gemm(1.0, dy_late, MatRef::of(ps.get(self.w_past)), 1.0, dx.rows_slice_mut(0, n), ci);
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_direct_convolution() {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = CausalConv::new(&mut ps, "c", 2, 3, 2, &mut rng);
        let (steps, batch) = (7, 2);
        let x = Tensor2::from_fn(steps * batch, 2, |r, c| ((r * 2 + c) as f64 * 0.37).sin());
        let y = conv.forward(&ps, &x, steps, batch).unwrap();
        let (wn, wp, b) = (ps.get(conv.w_now), ps.get(conv.w_past), ps.get(conv.bias));
        for t in 0..steps {
            for bb in 0..batch {
                for o in 0..3 {
                    let mut v = b.get(0, o);
                    for i in 0..2 {
                        v += wn.get(o, i) * x.get(t * batch + bb, i);
                        if t >= 2 {
                            v += wp.get(o, i) * x.get((t - 2) * batch + bb, i);
                        }
                    }
                    assert!((v - y.get(t * batch + bb, o)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = CausalConv::new(&mut ps, "c", 3, 2, 4, &mut rng);
        let (steps, batch) = (9, 2);
        let x = Tensor2::from_fn(steps * batch, 3, |r, c| ((r * 3 + c) as f64 * 0.29).cos());
        let w = Tensor2::from_fn(steps * batch, 2, |r, c| ((r + 7 * c) as f64 * 0.11).sin());
        let loss = |ps: &ParamStore, x: &Tensor2| -> f64 {
            let y = conv.forward(ps, x, steps, batch).unwrap();
            y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
        };
        let mut grads = ps.zero_grads();
        let dx = conv.backward(&ps, &x, &w, steps, batch, &mut grads);
        let h = 1e-6;
        for id in [conv.w_now, conv.w_past, conv.bias] {
            for i in 0..ps.get(id).len() {
                let orig = ps.get(id).data()[i];
                ps.get_mut(id).data_mut()[i] = orig + h;
                let lp = loss(&ps, &x);
                ps.get_mut(id).data_mut()[i] = orig - h;
                let lm = loss(&ps, &x);
                ps.get_mut(id).data_mut()[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - grads.get(id).data()[i]).abs() < 1e-7 * fd.abs().max(1.0));
            }
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let fd = (loss(&ps, &xp) - loss(&ps, &xm)) / (2.0 * h);
            assert!((fd - dx.data()[i]).abs() < 1e-7 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn dilation_beyond_window_only_uses_present_tap() {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = CausalConv::new(&mut ps, "c", 1, 1, 8, &mut rng);
        let x = Tensor2::from_fn(4, 1, |r, _| r as f64);
        let y = conv.forward(&ps, &x, 4, 1).unwrap();
        let (wn, b) = (ps.get(conv.w_now).get(0, 0), ps.get(conv.bias).get(0, 0));
        for t in 0..4 {
            assert!((y.get(t, 0) - (wn * t as f64 + b)).abs() < 1e-12);
        }
    }
}
