//! Training loop (truncated BPTT for the RNN), prediction and the
//! learning-rate range test on a network.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, LossKind};
use super::model::{Arch, NetConfig, Network};
use super::optim::{OptimConfig, Optimizer};
use super::schedule::{cosine_schedule, lr_sweep, LrFindResult};
use super::tensor::Tensor2;
use crate::data::{augment_rotation, extract_windows, fit_standardizer, Recording, Window, CHANNELS};
use crate::error::{Error, Result};
use crate::eval::compute_rmse;
use crate::quat::{random_unit_quaternion, Quaternion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Truncated-BPTT window in samples.
    pub window_len: usize,
    /// Length of the overlapping training sequences, in windows. State is
    /// carried across the windows of one sequence.
    pub windows_per_seq: usize,
    /// Offset between consecutive training sequences, as a fraction of their
    /// length.
    pub seq_stride_frac: f64,
    pub batch_size: usize,
    pub max_lr: f64,
    /// Final learning rate as a fraction of `max_lr`.
    pub min_lr_frac: f64,
    pub epochs: usize,
    /// Fraction of all iterations trained at `max_lr` before the cosine decay.
    pub plateau_frac: f64,
    pub loss: LossKind,
    pub smoothl1_beta: f64,
    /// Random sensor rotation per training sequence and epoch.
    pub augment: bool,
    pub optimizer: OptimConfig,
    /// Gradients with a larger global norm are rescaled to it; 0 disables.
    pub clip_norm: f64,
    /// Run validation every this many epochs (and always after the last).
    pub val_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            windows_per_seq: 8,
            seq_stride_frac: 0.5,
            batch_size: 32,
            max_lr: 3e-3,
            min_lr_frac: 0.01,
            epochs: 100,
            plateau_frac: 0.2,
            loss: LossKind::LinearAttSmoothL1,
            smoothl1_beta: 0.01,
            augment: true,
            optimizer: OptimConfig::default(),
            clip_norm: 0.0,
            val_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.window_len < 2 {
            return bad("window_len must be at least 2");
        }
        if self.windows_per_seq == 0 || self.batch_size == 0 || self.val_every == 0 {
            return bad("windows_per_seq, batch_size and val_every must be positive");
        }
        if !(self.max_lr > 0.0) || !self.max_lr.is_finite() {
            return bad("max_lr must be positive");
        }
        if !(self.seq_stride_frac > 0.0 && self.seq_stride_frac <= 1.0) {
            return bad("seq_stride_frac must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.plateau_frac) || !(0.0..=1.0).contains(&self.min_lr_frac) {
            return bad("plateau_frac and min_lr_frac must lie in [0, 1]");
        }
        if !(self.smoothl1_beta > 0.0) {
            return bad("smoothl1_beta must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Mean validation e_RMS over the validation recordings, degrees.
    pub val_rmse_deg: Option<f64>,
    pub val_rmse_per_rec: Vec<(String, f64)>,
    pub lr_end: f64,
    pub head_events: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Recordings whose samples were used for standardization, augmentation
    /// or gradients.
    pub train_sources: BTreeSet<String>,
    pub param_count: usize,
    pub iterations: usize,
}

impl History {
    pub fn last_val_rmse(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.val_rmse_deg)
    }
}

/// Training sequences cut from the training recordings, each tagged with its
/// source recording.
fn training_sequences(recs: &[Recording], cfg: &TrainConfig, arch: Arch) -> Result<(usize, Vec<Window>)> {
    let shortest = recs.iter().map(|r| r.len()).min().unwrap_or(0);
    let w = cfg.window_len;
    let mut seq_len = (w * cfg.windows_per_seq).min(shortest);
    if arch == Arch::Rnn {
        seq_len -= seq_len % w;
    }
    if seq_len < 2 {
        return Err(Error::Config(format!(
            "training recordings ({shortest} samples) are shorter than one window ({w})"
        )));
    }
    let stride = ((seq_len as f64 * cfg.seq_stride_frac).round() as usize).max(1);
    let mut out = Vec::new();
    for (i, r) in recs.iter().enumerate() {
        out.extend(extract_windows(r, i, seq_len, stride)?);
    }
    Ok((seq_len, out))
}

/// Standardized inputs and sign-continuous targets of a batch of equally long
/// sequences, time-major.
fn assemble(net: &Network, parts: &[Recording]) -> (Tensor2, Tensor2) {
    let (b, t) = (parts.len(), parts[0].len());
    let mut x = Tensor2::zeros(t * b, CHANNELS);
    let mut y = Tensor2::zeros(t * b, 4);
    for (j, rec) in parts.iter().enumerate() {
        let mut prev: Option<Quaternion> = None;
        for k in 0..t {
            x.row_mut(k * b + j).copy_from_slice(&net.standardizer.features(rec.acc[k], rec.gyr[k]));
            let mut q = rec.q_ref[k];
            if prev.is_some_and(|p| p.dot(q) < 0.0) {
                q = q.scale(-1.0);
            }
            y.row_mut(k * b + j).copy_from_slice(&q.to_array());
            prev = Some(q);
        }
    }
    (x, y)
}

fn check_disjoint(train: &[Recording], val: &[Recording]) -> Result<()> {
    let names: BTreeSet<&str> = train.iter().map(|r| r.name.as_str()).collect();
    if let Some(v) = val.iter().find(|v| names.contains(v.name.as_str())) {
        return Err(Error::Config(format!("recording {} is in both the training and validation set", v.name)));
    }
    Ok(())
}

/// Builds a network from `net_cfg` (seeded by `cfg.seed`) and trains it.
pub fn train(train_recs: &[Recording], val_recs: &[Recording], net_cfg: &NetConfig, cfg: &TrainConfig) -> Result<(Network, History)> {
    train_with(train_recs, val_recs, net_cfg, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    train_recs: &[Recording],
    val_recs: &[Recording],
    net_cfg: &NetConfig,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Network, History)> {
    if train_recs.is_empty() {
        return Err(Error::Config("no training recordings".into()));
    }
    let std = fit_standardizer(train_recs)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = Network::new(net_cfg.clone(), std, &mut init_rng)?;
    train_network(net, train_recs, val_recs, cfg, on_epoch)
}

/// Trains an existing network. Its standardizer is refitted on the training
/// recordings.
pub fn train_network(
    mut net: Network,
    train_recs: &[Recording],
    val_recs: &[Recording],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Network, History)> {
    cfg.validate()?;
    check_disjoint(train_recs, val_recs)?;
    if train_recs.is_empty() {
        return Err(Error::Config("no training recordings".into()));
    }
    net.standardizer = fit_standardizer(train_recs)?;
    let arch = net.cfg.arch;
    let (seq_len, seqs) = training_sequences(train_recs, cfg, arch)?;
    let mut history = History {
        train_sources: train_recs
            .iter()
            .map(|r| r.name.clone())
            .chain(seqs.iter().map(|w| train_recs[w.source].name.clone()))
            .collect(),
        param_count: net.param_count(),
        ..History::default()
    };
    let w = if arch == Arch::Rnn { cfg.window_len } else { seq_len };
    let windows = seq_len / w;
    let batches_per_epoch = seqs.len().div_ceil(cfg.batch_size);
    let total = cfg.epochs * batches_per_epoch * windows;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_7a1e);
    let mut opt = Optimizer::new(cfg.optimizer, &net.params);
    let mut grads = net.params.zero_grads();
    let mut it = 0usize;
    let mut order: Vec<usize> = (0..seqs.len()).collect();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut loss_n = 0usize;
        let mut events = 0usize;
        let mut lr = cfg.max_lr;
        for chunk in order.chunks(cfg.batch_size) {
            let parts: Vec<Recording> = chunk
                .iter()
                .map(|&i| {
                    let win = seqs[i];
                    let piece = train_recs[win.source].slice(win.start, win.len);
                    if cfg.augment {
                        augment_rotation(&piece, random_unit_quaternion(&mut rng))
                    } else {
                        piece
                    }
                })
                .collect();
            let b = parts.len();
            let (x, y) = assemble(&net, &parts);
            let mut state = net.zero_state(b);
            for k in 0..windows {
                let xs = Tensor2::from_vec(w * b, CHANNELS, x.rows_slice(k * w * b, w * b).to_vec())?;
                let ys = Tensor2::from_vec(w * b, 4, y.rows_slice(k * w * b, w * b).to_vec())?;
                let (q, new_state, cache) = net.forward_train(&xs, w, b, state.as_ref(), &mut rng)?;
                let (l, dq) = loss_and_grad(cfg.loss, cfg.smoothl1_beta, &ys, &q);
                grads.zero();
                net.backward(&cache, &dq, &mut grads);
                if !l.is_finite() || !grads.all_finite() {
                    return Err(Error::Training {
                        epoch,
                        iteration: it,
                        msg: format!("non-finite loss or gradient (loss {l})"),
                    });
                }
                if cfg.clip_norm > 0.0 {
                    let n = grads.global_norm();
                    if n > cfg.clip_norm {
                        grads.scale(cfg.clip_norm / n);
                    }
                }
                lr = cosine_schedule(it, total, cfg.plateau_frac, cfg.max_lr, cfg.max_lr * cfg.min_lr_frac);
                opt.step(&mut net.params, &grads, lr);
                loss_sum += l;
                loss_n += 1;
                events += cache.head_events;
                state = new_state;
                it += 1;
            }
        }
        let mut rec = EpochRecord {
            epoch,
            train_loss: loss_sum / loss_n.max(1) as f64,
            val_loss: None,
            val_rmse_deg: None,
            val_rmse_per_rec: Vec::new(),
            lr_end: lr,
            head_events: events,
            seconds: 0.0,
        };
        let last = epoch + 1 == cfg.epochs;
        if !val_recs.is_empty() && ((epoch + 1) % cfg.val_every == 0 || last) {
            let (vl, per) = validate(&net, val_recs, cfg)?;
            rec.val_loss = Some(vl);
            rec.val_rmse_deg = Some(per.iter().map(|(_, e)| e).sum::<f64>() / per.len() as f64);
            rec.val_rmse_per_rec = per;
        }
        rec.seconds = started.elapsed().as_secs_f64();
        on_epoch(&rec);
        history.epochs.push(rec);
    }
    history.iterations = it;
    Ok((net, history))
}

/// Mean loss and per-recording e_RMS (degrees) on whole recordings.
pub fn validate(net: &Network, recs: &[Recording], cfg: &TrainConfig) -> Result<(f64, Vec<(String, f64)>)> {
    let mut loss_sum = 0.0;
    let mut per = Vec::with_capacity(recs.len());
    for r in recs {
        let q = predict(net, r)?;
        let est = Tensor2::from_vec(q.len(), 4, q.iter().flat_map(|q| q.to_array()).collect())?;
        let (_, y) = assemble(net, std::slice::from_ref(r));
        loss_sum += loss_and_grad(cfg.loss, cfg.smoothl1_beta, &y, &est).0;
        per.push((r.name.clone(), compute_rmse(&r.q_ref, &q, 0)?));
    }
    Ok((loss_sum / recs.len() as f64, per))
}

/// Samples per inference chunk for recurrent models.
const PREDICT_CHUNK: usize = 4096;

/// Causal attitude estimates for every sample of `rec`. The recurrent state
/// starts at zero; the network's own standardizer is applied.
pub fn predict(net: &Network, rec: &Recording) -> Result<Vec<Quaternion>> {
    let x = net.features(rec);
    let n = rec.len();
    let q = match net.cfg.arch {
        Arch::Tcn => net.forward_eval(&x, n, 1, None)?.0,
        Arch::Rnn => {
            let mut out = Tensor2::zeros(n, 4);
            let mut state = net.zero_state(1);
            let mut start = 0;
            while start < n {
                let len = PREDICT_CHUNK.min(n - start);
                let xs = Tensor2::from_vec(len, CHANNELS, x.rows_slice(start, len).to_vec())?;
                let (q, s) = net.forward_eval(&xs, len, 1, state.as_ref())?;
                out.rows_slice_mut(start, len).copy_from_slice(q.data());
                state = s;
                start += len;
            }
            out
        }
    };
    Ok(q.data().chunks(4).map(|c| Quaternion::new(c[0], c[1], c[2], c[3])).collect())
}

/// Learning-rate range test: trains a copy of `net` for `steps` iterations
/// while the learning rate grows exponentially from `lr_min` to `lr_max`, and
/// suggests the rate of steepest loss descent. `net` itself is not modified.
pub fn lr_find(net: &Network, train_recs: &[Recording], cfg: &TrainConfig, lr_min: f64, lr_max: f64, steps: usize) -> Result<LrFindResult> {
    if !(lr_min > 0.0 && lr_min < lr_max) {
        return Err(Error::Config(format!("lr_find needs 0 < lr_min < lr_max, got {lr_min}, {lr_max}")));
    }
    cfg.validate()?;
    let mut work = net.clone();
    work.standardizer = fit_standardizer(train_recs)?;
    let (seq_len, seqs) = training_sequences(train_recs, cfg, work.cfg.arch)?;
    let w = if work.cfg.arch == Arch::Rnn { cfg.window_len.min(seq_len) } else { seq_len };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1f_f1d);
    let mut opt = Optimizer::new(cfg.optimizer, &work.params);
    let mut grads = work.params.zero_grads();
    let mut failed: Option<Error> = None;
    let res = lr_sweep(lr_min, lr_max, steps, 2, |lr| {
        let b = cfg.batch_size.min(seqs.len());
        let parts: Vec<Recording> = (0..b)
            .map(|_| {
                let win = seqs[rng.random_range(0..seqs.len())];
                let off = if win.len > w { rng.random_range(0..=(win.len - w)) } else { 0 };
                let piece = train_recs[win.source].slice(win.start + off, w);
                if cfg.augment {
                    augment_rotation(&piece, random_unit_quaternion(&mut rng))
                } else {
                    piece
                }
            })
            .collect();
        let (x, y) = assemble(&work, &parts);
        let run = work.forward_train(&x, w, b, None, &mut rng);
        let (q, _, cache) = match run {
            Ok(v) => v,
            Err(e) => {
                failed = Some(e);
                return f64::NAN;
            }
        };
        let (l, dq) = loss_and_grad(cfg.loss, cfg.smoothl1_beta, &y, &q);
        grads.zero();
        work.backward(&cache, &dq, &mut grads);
        if !grads.all_finite() {
            return f64::NAN;
        }
        opt.step(&mut work.params, &grads, lr);
        l
    });
    match failed {
        Some(e) => Err(e),
        None => Ok(res),
    }
}
