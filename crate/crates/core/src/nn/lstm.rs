//! LSTM layer with hand-written backpropagation through time.
//!
//! Gate order in the stacked weight matrices is input, forget, cell, output.
//! Sequences use the time-major layout of [`Tensor2`]. The state carried in
//! and out of a window is a plain value: gradients never flow through it, which
//! is where truncated BPTT cuts the graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{gemm, MatRef, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: usize,
    /// `4H × inputs`
    pub w_ih: ParamId,
    /// `4H × H`
    pub w_hh: ParamId,
    /// `1 × 4H`
    pub bias: ParamId,
}

/// Hidden and cell state, each `batch × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor2,
    pub c: Tensor2,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self {
            h: Tensor2::zeros(batch, hidden),
            c: Tensor2::zeros(batch, hidden),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: usize,
    batch: usize,
    x: Tensor2,
    /// activated gates, `T·B × 4H`
    gates: Tensor2,
    /// cell states, `T·B × H`
    cells: Tensor2,
    /// `h_{t-1}` for every step, `T·B × H`
    h_prev: Tensor2,
    c0: Tensor2,
    /// effective recurrent weights (after weight dropout) and their mask scale
    w_hh: Tensor2,
    w_hh_mask: Option<Vec<f64>>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamStore,
        name: &str,
        inputs: usize,
        hidden: usize,
        horizon: Option<f64>,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let lstm = Self {
            inputs,
            hidden,
            w_ih: ps.add_uniform(format!("{name}.w_ih"), 4 * hidden, inputs, bound, rng),
            w_hh: ps.add_uniform(format!("{name}.w_hh"), 4 * hidden, hidden, bound, rng),
            bias: ps.add_uniform(format!("{name}.bias"), 1, 4 * hidden, bound, rng),
        };
        let b = ps.get_mut(lstm.bias).data_mut();
        match horizon {
            // chrono initialization: gate time constants spread up to `t` steps
            Some(t) => {
                for j in 0..hidden {
                    let bf = (1.0 + rng.random::<f64>() * (t - 2.0)).ln();
                    b[hidden + j] = bf;
                    b[j] = -bf;
                }
            }
            None => {
                for v in &mut b[hidden..2 * hidden] {
                    *v += 1.0;
                }
            }
        }
        lstm
    }

    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        4 * hidden * (inputs + hidden + 1)
    }

    fn check(&self, x: &Tensor2, steps: usize, batch: usize, state: &LstmState) -> Result<()> {
        if x.cols() != self.inputs || x.rows() != steps * batch {
            return Err(Error::Shape(format!(
                "lstm expects {}x{} input, got {}x{}",
                steps * batch,
                self.inputs,
                x.rows(),
                x.cols()
            )));
        }
        if state.h.shape() != (batch, self.hidden) || state.c.shape() != (batch, self.hidden) {
            return Err(Error::Shape(format!(
                "lstm state must be {batch}x{}, got {:?}/{:?}",
                self.hidden,
                state.h.shape(),
                state.c.shape()
            )));
        }
        Ok(())
    }

    /// Input projection `x·W_ihᵀ + b` for all steps at once.
    fn project(&self, ps: &ParamStore, x: &Tensor2) -> Tensor2 {
        let g = 4 * self.hidden;
        let mut pre = Tensor2::zeros(x.rows(), g);
        let b = ps.get(self.bias).data();
        for r in 0..pre.rows() {
            pre.row_mut(r).copy_from_slice(b);
        }
        gemm(1.0, MatRef::of(x), MatRef::of(ps.get(self.w_ih)).t(), 1.0, pre.data_mut(), g);
        pre
    }

    /// One recurrence step in place: `pre` holds the input projection for the
    /// step and is overwritten with the activated gates.
    fn step(&self, w_hh: &Tensor2, pre: &mut [f64], h: &mut [f64], c: &mut [f64], batch: usize) {
        let hd = self.hidden;
        gemm(1.0, MatRef::new(h, batch, hd), MatRef::of(w_hh).t(), 1.0, pre, 4 * hd);
        for b in 0..batch {
            let gates = &mut pre[b * 4 * hd..(b + 1) * 4 * hd];
            let (hr, cr) = (&mut h[b * hd..(b + 1) * hd], &mut c[b * hd..(b + 1) * hd]);
            for j in 0..hd {
                let i = sigmoid(gates[j]);
                let f = sigmoid(gates[hd + j]);
                let g = gates[2 * hd + j].tanh();
                let o = sigmoid(gates[3 * hd + j]);
                gates[j] = i;
                gates[hd + j] = f;
                gates[2 * hd + j] = g;
                gates[3 * hd + j] = o;
                cr[j] = f * cr[j] + i * g;
                hr[j] = o * cr[j].tanh();
            }
        }
    }

    /// Forward pass over a window without keeping a cache.
    pub fn forward_infer(
        &self,
        ps: &ParamStore,
        x: &Tensor2,
        steps: usize,
        batch: usize,
        state: &LstmState,
    ) -> Result<(Tensor2, LstmState)> {
        self.check(x, steps, batch, state)?;
        let hd = self.hidden;
        let mut pre = self.project(ps, x);
        let w_hh = ps.get(self.w_hh);
        let mut h = state.h.clone();
        let mut c = state.c.clone();
        let mut out = Tensor2::zeros(steps * batch, hd);
        for t in 0..steps {
            self.step(w_hh, pre.rows_slice_mut(t * batch, batch), h.data_mut(), c.data_mut(), batch);
            out.rows_slice_mut(t * batch, batch).copy_from_slice(h.data());
        }
        Ok((out, LstmState { h, c }))
    }

    /// Forward pass keeping what the backward pass needs.
    ///
    /// `w_hh_mask`, when given, is a DropConnect mask (already scaled by the
    /// inverse keep probability) applied elementwise to the recurrent weights.
    pub fn forward(
        &self,
        ps: &ParamStore,
        x: &Tensor2,
        steps: usize,
        batch: usize,
        state: &LstmState,
        w_hh_mask: Option<Vec<f64>>,
    ) -> Result<(Tensor2, LstmState, LstmCache)> {
        self.check(x, steps, batch, state)?;
        let hd = self.hidden;
        let mut w_hh = ps.get(self.w_hh).clone();
        if let Some(m) = &w_hh_mask {
            for (w, k) in w_hh.data_mut().iter_mut().zip(m) {
                *w *= k;
            }
        }
        let mut gates = self.project(ps, x);
        let mut h = state.h.clone();
        let mut c = state.c.clone();
        let mut out = Tensor2::zeros(steps * batch, hd);
        let mut cells = Tensor2::zeros(steps * batch, hd);
        let mut h_prev = Tensor2::zeros(steps * batch, hd);
        for t in 0..steps {
            h_prev.rows_slice_mut(t * batch, batch).copy_from_slice(h.data());
            self.step(&w_hh, gates.rows_slice_mut(t * batch, batch), h.data_mut(), c.data_mut(), batch);
            out.rows_slice_mut(t * batch, batch).copy_from_slice(h.data());
            cells.rows_slice_mut(t * batch, batch).copy_from_slice(c.data());
        }
        let cache = LstmCache {
            steps,
            batch,
            x: x.clone(),
            gates,
            cells,
            h_prev,
            c0: state.c.clone(),
            w_hh,
            w_hh_mask,
        };
        Ok((out, LstmState { h, c }, cache))
    }

    /// Backpropagation through the cached window. Returns `dx`.
    pub fn backward(&self, ps: &ParamStore, cache: &LstmCache, dy: &Tensor2, grads: &mut Grads) -> Tensor2 {
        let (steps, batch, hd) = (cache.steps, cache.batch, self.hidden);
        let g4 = 4 * hd;
        let mut d_pre = Tensor2::zeros(steps * batch, g4);
        let mut dh_next = vec![0.0; batch * hd];
        let mut dc_next = vec![0.0; batch * hd];
        for t in (0..steps).rev() {
            let gates = cache.gates.rows_slice(t * batch, batch);
            let cells = cache.cells.rows_slice(t * batch, batch);
            let c_prev = if t == 0 {
                cache.c0.data()
            } else {
                cache.cells.rows_slice((t - 1) * batch, batch)
            };
            let dyt = dy.rows_slice(t * batch, batch);
            let dpt = d_pre.rows_slice_mut(t * batch, batch);
            for b in 0..batch {
                for j in 0..hd {
                    let k = b * hd + j;
                    let gi = b * g4;
                    let (i, f, g, o) = (gates[gi + j], gates[gi + hd + j], gates[gi + 2 * hd + j], gates[gi + 3 * hd + j]);
                    let tc = cells[k].tanh();
                    let dh = dyt[k] + dh_next[k];
                    let d_o = dh * tc;
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                    let d_i = dc * g;
                    let d_g = dc * i;
                    let d_f = dc * c_prev[k];
                    dc_next[k] = dc * f;
                    dpt[gi + j] = d_i * i * (1.0 - i);
                    dpt[gi + hd + j] = d_f * f * (1.0 - f);
                    dpt[gi + 2 * hd + j] = d_g * (1.0 - g * g);
                    dpt[gi + 3 * hd + j] = d_o * o * (1.0 - o);
                }
            }
            gemm(
                1.0,
                MatRef::new(d_pre.rows_slice(t * batch, batch), batch, g4),
                MatRef::of(&cache.w_hh),
                0.0,
                &mut dh_next,
                hd,
            );
        }

        gemm(1.0, MatRef::of(&d_pre).t(), MatRef::of(&cache.x), 1.0, grads.get_mut(self.w_ih).data_mut(), self.inputs);
        match &cache.w_hh_mask {
            None => gemm(1.0, MatRef::of(&d_pre).t(), MatRef::of(&cache.h_prev), 1.0, grads.get_mut(self.w_hh).data_mut(), hd),
            Some(mask) => {
                let mut dw = vec![0.0; g4 * hd];
                gemm(1.0, MatRef::of(&d_pre).t(), MatRef::of(&cache.h_prev), 0.0, &mut dw, hd);
                for ((g, d), m) in grads.get_mut(self.w_hh).data_mut().iter_mut().zip(&dw).zip(mask) {
                    *g += d * m;
                }
            }
        }
        d_pre.col_sums_into(grads.get_mut(self.bias).data_mut());
        let mut dx = Tensor2::zeros(steps * batch, self.inputs);
        gemm(1.0, MatRef::of(&d_pre), MatRef::of(ps.get(self.w_ih)), 0.0, dx.data_mut(), self.inputs);
        dx
    }
}
