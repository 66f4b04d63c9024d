//! Learning-rate schedule and the learning-rate range test.

use serde::{Deserialize, Serialize};

/// Constant `max_lr` for the first `plateau_frac · total` steps, then a
/// half-cosine down to `min_lr` at `step == total`.
pub fn cosine_schedule(step: usize, total: usize, plateau_frac: f64, max_lr: f64, min_lr: f64) -> f64 {
    let plateau = plateau_frac.clamp(0.0, 1.0) * total as f64;
    let s = step.min(total) as f64;
    if s <= plateau || total as f64 <= plateau {
        return if step >= total && (total as f64) > plateau { min_lr } else { max_lr };
    }
    let frac = (s - plateau) / (total as f64 - plateau);
    min_lr + (max_lr - min_lr) * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// `n` learning rates spaced exponentially from `lr_min` to `lr_max`.
pub fn exponential_sweep(lr_min: f64, lr_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lr_min];
    }
    let ratio = lr_max / lr_min;
    (0..n).map(|i| lr_min * ratio.powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrFindResult {
    pub lrs: Vec<f64>,
    pub losses: Vec<f64>,
    pub suggestion: f64,
}

/// Runs `step(lr)` for an exponential sweep of learning rates and suggests
/// the rate where the smoothed loss falls fastest. The sweep stops at the
/// first non-finite loss; restoring any state touched by `step` is the
/// caller's job.
pub fn lr_sweep(lr_min: f64, lr_max: f64, n: usize, smooth: usize, mut step: impl FnMut(f64) -> f64) -> LrFindResult {
    let mut lrs = Vec::new();
    let mut losses = Vec::new();
    for lr in exponential_sweep(lr_min, lr_max, n) {
        let l = step(lr);
        if !l.is_finite() {
            break;
        }
        lrs.push(lr);
        losses.push(l);
    }
    let suggestion = suggest_lr(&lrs, &losses, smooth).unwrap_or(lr_min);
    LrFindResult { lrs, losses, suggestion }
}

/// Learning rate at the steepest negative slope of the loss against
/// `ln(lr)`, after a centered moving average of width `2·smooth + 1`.
pub fn suggest_lr(lrs: &[f64], losses: &[f64], smooth: usize) -> Option<f64> {
    let n = lrs.len().min(losses.len());
    if n < 3 {
        return lrs.first().copied();
    }
    let sm: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(smooth), (i + smooth).min(n - 1));
            losses[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect();
    let x: Vec<f64> = lrs[..n].iter().map(|l| l.ln()).collect();
    let mut best = (f64::INFINITY, None);
    for i in 1..n - 1 {
        let slope = (sm[i + 1] - sm[i - 1]) / (x[i + 1] - x[i - 1]);
        if slope < best.0 {
            best = (slope, Some(lrs[i]));
        }
    }
    best.1
}
