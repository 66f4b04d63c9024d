//! The attitude networks: a stack of LSTM or causal-convolution layers, an
//! optional batchnorm, a linear layer to four outputs and unit-length scaling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{mish_backward, mish_forward};
use super::batchnorm::{BatchNorm, BatchNormCache};
use super::conv::CausalConv;
use super::head::{head_backward, head_normalize, HeadCache};
use super::linear::Linear;
use super::lstm::{Lstm, LstmCache, LstmState};
use super::params::{Grads, ParamStore};
use super::tensor::Tensor2;
use crate::data::{Standardizer, CHANNELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Rnn,
    Tcn,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Rnn => "rnn",
            Arch::Tcn => "tcn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub arch: Arch,
    pub num_layers: usize,
    pub hidden: usize,
    /// Split the first layer into an accelerometer block and a gyroscope block.
    pub grouped_input: bool,
    /// DropConnect rate on the recurrent weights (RNN only).
    pub weight_dropout: f64,
    /// Dropout rate on every layer's output.
    pub activation_dropout: f64,
    /// Batchnorm in front of the output layer. Off by default: with time-major
    /// batches of correlated samples its running statistics track the batch
    /// statistics poorly and inference error is several times the training error.
    pub head_batchnorm: bool,
    /// LSTM gate-bias initialization. `Some(t)`: forget biases `ln U(1, t−1)`
    /// and input biases their negation, spreading memory time constants up
    /// to `t` samples. `None`: forget biases +1.
    pub memory_horizon: Option<f64>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::rnn(200)
    }
}

impl NetConfig {
    pub fn rnn(hidden: usize) -> Self {
        Self {
            arch: Arch::Rnn,
            num_layers: 2,
            hidden,
            grouped_input: false,
            weight_dropout: 0.0,
            activation_dropout: 0.0,
            head_batchnorm: false,
            memory_horizon: None,
        }
    }

    pub fn tcn(hidden: usize) -> Self {
        Self {
            arch: Arch::Tcn,
            num_layers: 10,
            ..Self::rnn(hidden)
        }
    }

    /// Samples seen by one output of the TCN, `2^num_layers`.
    pub fn receptive_field(&self) -> Option<usize> {
        match self.arch {
            Arch::Rnn => None,
            Arch::Tcn => Some(1usize << self.num_layers),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden size must be at least 1".into()));
        }
        if self.num_layers == 0 {
            return Err(Error::Config("at least one layer is required".into()));
        }
        if self.grouped_input && self.hidden < 2 {
            return Err(Error::Config("grouped input needs a hidden size of at least 2".into()));
        }
        if self.arch == Arch::Tcn && self.num_layers > 24 {
            return Err(Error::Config("tcn depth above 24 layers is not supported".into()));
        }
        for (name, p) in [("weight_dropout", self.weight_dropout), ("activation_dropout", self.activation_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        if let Some(t) = self.memory_horizon {
            if !(t > 2.0) || !t.is_finite() {
                return Err(Error::Config(format!("memory_horizon must exceed 2 samples, got {t}")));
            }
        }
        Ok(())
    }

    /// First-layer blocks as `(input column start, input width, output width)`.
    fn first_groups(&self) -> Vec<(usize, usize, usize)> {
        let h = self.hidden;
        if self.grouped_input {
            vec![(0, 3, h / 2), (3, 3, h - h / 2)]
        } else {
            vec![(0, CHANNELS, h)]
        }
    }

    fn groups(&self, layer: usize) -> Vec<(usize, usize, usize)> {
        if layer == 0 {
            self.first_groups()
        } else {
            vec![(0, self.hidden, self.hidden)]
        }
    }

    /// Number of trainable scalars, from the layer shapes alone.
    pub fn param_count(&self) -> usize {
        let h = self.hidden;
        let mut n = 0;
        for l in 0..self.num_layers {
            for (_, i, o) in self.groups(l) {
                n += match self.arch {
                    Arch::Rnn => Lstm::param_count(i, o),
                    Arch::Tcn => CausalConv::param_count(i, o),
                };
            }
            if self.arch == Arch::Tcn {
                n += 2 * h;
            }
        }
        if self.head_batchnorm {
            n += 2 * h;
        }
        n + 4 * h + 4
    }
}

/// One block of a layer: reads `in_len` input columns starting at `in_start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block<L> {
    pub in_start: usize,
    pub in_len: usize,
    pub layer: L,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Body {
    Rnn { layers: Vec<Vec<Block<Lstm>>> },
    Tcn { layers: Vec<(Vec<Block<CausalConv>>, BatchNorm)> },
}

/// Carried LSTM state, one entry per block of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnState {
    pub blocks: Vec<Vec<LstmState>>,
}

impl RnnState {
    pub fn batch(&self) -> usize {
        self.blocks.first().and_then(|l| l.first()).map_or(0, |s| s.h.rows())
    }

    /// Keeps only the given batch rows, in that order.
    pub fn select(&self, rows: &[usize]) -> RnnState {
        let pick = |t: &Tensor2| {
            let mut out = Tensor2::zeros(rows.len(), t.cols());
            for (i, &r) in rows.iter().enumerate() {
                out.row_mut(i).copy_from_slice(t.row(r));
            }
            out
        };
        RnnState {
            blocks: self
                .blocks
                .iter()
                .map(|l| l.iter().map(|s| LstmState { h: pick(&s.h), c: pick(&s.c) }).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub cfg: NetConfig,
    pub params: ParamStore,
    pub body: Body,
    pub head_bn: Option<BatchNorm>,
    pub head: Linear,
    pub standardizer: Standardizer,
}

enum LayerCache {
    Rnn(Vec<LstmCache>),
    Tcn { bn: BatchNormCache, pre_act: Tensor2 },
}

/// Everything the backward pass needs from one training forward pass.
pub struct ForwardCache {
    steps: usize,
    batch: usize,
    inputs: Vec<Tensor2>,
    layers: Vec<LayerCache>,
    masks: Vec<Option<Vec<f64>>>,
    head_bn: Option<BatchNormCache>,
    head_linear_in: Tensor2,
    head: HeadCache,
    /// Rows whose raw output norm was degenerate.
    pub head_events: usize,
}

fn add_cols(dst: &mut Tensor2, start: usize, src: &Tensor2) {
    for r in 0..dst.rows() {
        for (d, s) in dst.row_mut(r)[start..start + src.cols()].iter_mut().zip(src.row(r)) {
            *d += s;
        }
    }
}

fn set_cols(dst: &mut Tensor2, start: usize, src: &Tensor2) {
    for r in 0..dst.rows() {
        dst.row_mut(r)[start..start + src.cols()].copy_from_slice(src.row(r));
    }
}

fn dropout_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Option<Vec<f64>> {
    (p > 0.0).then(|| {
        let keep = 1.0 / (1.0 - p);
        (0..len).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect()
    })
}

fn apply_mask(t: &mut Tensor2, mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, k) in t.data_mut().iter_mut().zip(m) {
            *v *= k;
        }
    }
}

impl Network {
    pub fn new<R: Rng + ?Sized>(cfg: NetConfig, standardizer: Standardizer, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut ps = ParamStore::new();
        let h = cfg.hidden;
        let body = match cfg.arch {
            Arch::Rnn => Body::Rnn {
                layers: (0..cfg.num_layers)
                    .map(|l| {
                        cfg.groups(l)
                            .into_iter()
                            .enumerate()
                            .map(|(g, (s, i, o))| Block {
                                in_start: s,
                                in_len: i,
                                layer: Lstm::new(&mut ps, &format!("lstm{l}.{g}"), i, o, cfg.memory_horizon, rng),
                            })
                            .collect()
                    })
                    .collect(),
            },
            Arch::Tcn => Body::Tcn {
                layers: (0..cfg.num_layers)
                    .map(|l| {
                        let blocks = cfg
                            .groups(l)
                            .into_iter()
                            .enumerate()
                            .map(|(g, (s, i, o))| Block {
                                in_start: s,
                                in_len: i,
                                layer: CausalConv::new(&mut ps, &format!("conv{l}.{g}"), i, o, 1 << l, rng),
                            })
                            .collect();
                        (blocks, BatchNorm::new(&mut ps, &format!("conv{l}.bn"), h))
                    })
                    .collect(),
            },
        };
        let head_bn = cfg.head_batchnorm.then(|| BatchNorm::new(&mut ps, "head.bn", h));
        let head = Linear::new(&mut ps, "head.linear", h, 4, rng);
        Ok(Self {
            cfg,
            params: ps,
            body,
            head_bn,
            head,
            standardizer,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn zero_state(&self, batch: usize) -> Option<RnnState> {
        match &self.body {
            Body::Rnn { layers } => Some(RnnState {
                blocks: layers
                    .iter()
                    .map(|l| l.iter().map(|b| LstmState::zeros(batch, b.layer.hidden)).collect())
                    .collect(),
            }),
            Body::Tcn { .. } => None,
        }
    }

    fn check_input(&self, x: &Tensor2, steps: usize, batch: usize) -> Result<()> {
        if x.cols() != CHANNELS || x.rows() != steps * batch {
            return Err(Error::Shape(format!(
                "network expects {}x{CHANNELS} input, got {}x{}",
                steps * batch,
                x.rows(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn state_or_zero(&self, state: Option<&RnnState>, batch: usize) -> Result<Option<RnnState>> {
        match (state, &self.body) {
            (Some(s), Body::Rnn { .. }) => {
                if s.batch() != batch {
                    return Err(Error::Shape(format!("state batch {} differs from input batch {batch}", s.batch())));
                }
                Ok(Some(s.clone()))
            }
            _ => Ok(self.zero_state(batch)),
        }
    }

    /// Inference pass (batchnorm running statistics, no dropout, no cache).
    /// Returns unit quaternions, `steps·batch × 4`, and the state after the
    /// last step.
    pub fn forward_eval(
        &self,
        x: &Tensor2,
        steps: usize,
        batch: usize,
        state: Option<&RnnState>,
    ) -> Result<(Tensor2, Option<RnnState>)> {
        self.check_input(x, steps, batch)?;
        let mut state = self.state_or_zero(state, batch)?;
        let ps = &self.params;
        let h = self.cfg.hidden;
        let mut cur = x.clone();
        match &self.body {
            Body::Rnn { layers } => {
                let st = state.as_mut().expect("rnn state");
                for (l, blocks) in layers.iter().enumerate() {
                    let mut out = Tensor2::zeros(steps * batch, h);
                    let mut col = 0;
                    for (b, blk) in blocks.iter().enumerate() {
                        let xin = cur.cols_range(blk.in_start, blk.in_len);
                        let (y, s) = blk.layer.forward_infer(ps, &xin, steps, batch, &st.blocks[l][b])?;
                        set_cols(&mut out, col, &y);
                        col += y.cols();
                        st.blocks[l][b] = s;
                    }
                    cur = out;
                }
            }
            Body::Tcn { layers } => {
                for (blocks, bn) in layers {
                    let mut out = Tensor2::zeros(steps * batch, h);
                    let mut col = 0;
                    for blk in blocks {
                        let xin = cur.cols_range(blk.in_start, blk.in_len);
                        let y = blk.layer.forward(ps, &xin, steps, batch)?;
                        set_cols(&mut out, col, &y);
                        col += y.cols();
                    }
                    let z = bn.forward_eval(ps, &out);
                    mish_forward(z.data(), out.data_mut());
                    cur = out;
                }
            }
        }
        if let Some(bn) = &self.head_bn {
            cur = bn.forward_eval(ps, &cur);
        }
        let raw = self.head.forward(ps, &cur);
        let (q, _, _) = head_normalize(&raw);
        Ok((q, state))
    }

    /// Training pass: batch statistics in batchnorm (running statistics are
    /// updated), dropout masks drawn from `rng` when the rates are non-zero.
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor2,
        steps: usize,
        batch: usize,
        state: Option<&RnnState>,
        rng: &mut R,
    ) -> Result<(Tensor2, Option<RnnState>, ForwardCache)> {
        self.check_input(x, steps, batch)?;
        let mut state = self.state_or_zero(state, batch)?;
        let h = self.cfg.hidden;
        let (wd, ad) = (self.cfg.weight_dropout, self.cfg.activation_dropout);
        let ps = &self.params;
        let mut inputs = Vec::new();
        let mut caches = Vec::new();
        let mut masks = Vec::new();
        let mut cur = x.clone();
        match &mut self.body {
            Body::Rnn { layers } => {
                let st = state.as_mut().expect("rnn state");
                for (l, blocks) in layers.iter().enumerate() {
                    let mut out = Tensor2::zeros(steps * batch, h);
                    let mut col = 0;
                    let mut lc = Vec::new();
                    for (b, blk) in blocks.iter().enumerate() {
                        let xin = cur.cols_range(blk.in_start, blk.in_len);
                        let wmask = dropout_mask(ps.get(blk.layer.w_hh).len(), wd, rng);
                        let (y, s, c) = blk.layer.forward(ps, &xin, steps, batch, &st.blocks[l][b], wmask)?;
                        set_cols(&mut out, col, &y);
                        col += y.cols();
                        st.blocks[l][b] = s;
                        lc.push(c);
                    }
                    let mask = dropout_mask(out.len(), ad, rng);
                    apply_mask(&mut out, &mask);
                    inputs.push(std::mem::replace(&mut cur, out));
                    caches.push(LayerCache::Rnn(lc));
                    masks.push(mask);
                }
            }
            Body::Tcn { layers } => {
                for (blocks, bn) in layers.iter_mut() {
                    let mut out = Tensor2::zeros(steps * batch, h);
                    let mut col = 0;
                    for blk in blocks.iter() {
                        let xin = cur.cols_range(blk.in_start, blk.in_len);
                        let y = blk.layer.forward(ps, &xin, steps, batch)?;
                        set_cols(&mut out, col, &y);
                        col += y.cols();
                    }
                    let (z, bc) = bn.forward_train(ps, &out)?;
                    mish_forward(z.data(), out.data_mut());
                    let mask = dropout_mask(out.len(), ad, rng);
                    apply_mask(&mut out, &mask);
                    inputs.push(std::mem::replace(&mut cur, out));
                    caches.push(LayerCache::Tcn { bn: bc, pre_act: z });
                    masks.push(mask);
                }
            }
        }
        let head_in = cur;
        let (head_linear_in, head_bn) = match &mut self.head_bn {
            Some(bn) => {
                let (y, c) = bn.forward_train(ps, &head_in)?;
                (y, Some(c))
            }
            None => (head_in, None),
        };
        let raw = self.head.forward(ps, &head_linear_in);
        let (q, head, head_events) = head_normalize(&raw);
        let cache = ForwardCache {
            steps,
            batch,
            inputs,
            layers: caches,
            masks,
            head_bn,
            head_linear_in,
            head,
            head_events,
        };
        Ok((q, state, cache))
    }

    /// Accumulates the parameter gradients of a loss whose gradient with
    /// respect to the output quaternions is `dq`.
    pub fn backward(&self, cache: &ForwardCache, dq: &Tensor2, grads: &mut Grads) {
        let ps = &self.params;
        let (steps, batch) = (cache.steps, cache.batch);
        let draw = head_backward(&cache.head, dq);
        let mut d = self.head.backward(ps, &cache.head_linear_in, &draw, grads);
        if let (Some(bn), Some(bc)) = (&self.head_bn, &cache.head_bn) {
            d = bn.backward(ps, bc, &d, grads);
        }
        let nl = cache.layers.len();
        for l in (0..nl).rev() {
            apply_mask(&mut d, &cache.masks[l]);
            let xin = &cache.inputs[l];
            let mut dx = Tensor2::zeros(xin.rows(), xin.cols());
            match (&self.body, &cache.layers[l]) {
                (Body::Rnn { layers }, LayerCache::Rnn(lc)) => {
                    let mut col = 0;
                    for (blk, c) in layers[l].iter().zip(lc) {
                        let dy = d.cols_range(col, blk.layer.hidden);
                        col += blk.layer.hidden;
                        let dxb = blk.layer.backward(ps, c, &dy, grads);
                        add_cols(&mut dx, blk.in_start, &dxb);
                    }
                }
                (Body::Tcn { layers }, LayerCache::Tcn { bn: bc, pre_act }) => {
                    let (blocks, bn) = &layers[l];
                    let mut dz = Tensor2::zeros(d.rows(), d.cols());
                    mish_backward(pre_act.data(), d.data(), dz.data_mut());
                    let dconv = bn.backward(ps, bc, &dz, grads);
                    let mut col = 0;
                    for blk in blocks {
                        let dy = dconv.cols_range(col, blk.layer.outputs);
                        col += blk.layer.outputs;
                        let xb = xin.cols_range(blk.in_start, blk.in_len);
                        let dxb = blk.layer.backward(ps, &xb, &dy, steps, batch, grads);
                        add_cols(&mut dx, blk.in_start, &dxb);
                    }
                }
                _ => unreachable!("cache does not match the network body"),
            }
            d = dx;
        }
    }

    /// Standardized network input for a whole recording, `len × 6`.
    pub fn features(&self, rec: &crate::data::Recording) -> Tensor2 {
        let mut x = Tensor2::zeros(rec.len(), CHANNELS);
        for k in 0..rec.len() {
            x.row_mut(k).copy_from_slice(&self.standardizer.features(rec.acc[k], rec.gyr[k]));
        }
        x
    }
}
