//! RAdam wrapped in Lookahead.

use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamStore};
use super::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay.
    pub weight_decay: f64,
    /// Use the variance rectification; without it the update is plain Adam.
    pub rectify: bool,
    /// Lookahead synchronization period; 0 or 1 disables Lookahead.
    pub lookahead_k: usize,
    pub lookahead_alpha: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            weight_decay: 0.0,
            rectify: true,
            lookahead_k: 5,
            lookahead_alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub cfg: OptimConfig,
    step: u64,
    m: Vec<Tensor2>,
    v: Vec<Tensor2>,
    slow: Vec<Tensor2>,
}

impl Optimizer {
    pub fn new(cfg: OptimConfig, ps: &ParamStore) -> Self {
        let zeros: Vec<Tensor2> = ps.iter().map(|p| Tensor2::zeros(p.value.rows(), p.value.cols())).collect();
        Self {
            cfg,
            step: 0,
            m: zeros.clone(),
            v: zeros,
            slow: ps.iter().map(|p| p.value.clone()).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Step size multiplier from the variance rectification, or `None` while
    /// the variance estimate is still too unreliable (then the update falls
    /// back to bias-corrected momentum).
    fn rectification(&self, t: f64) -> Option<f64> {
        let b2 = self.cfg.beta2;
        let rho_inf = 2.0 / (1.0 - b2) - 1.0;
        let b2t = b2.powf(t);
        let rho = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
        (rho > 5.0).then(|| {
            ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)).sqrt()
        })
    }

    pub fn step(&mut self, ps: &mut ParamStore, grads: &Grads, lr: f64) {
        self.step += 1;
        let t = self.step as f64;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powf(t);
        let bc2 = 1.0 - c.beta2.powf(t);
        let rect = if c.rectify { self.rectification(t) } else { Some(1.0) };
        for (i, p) in ps.iter_mut().enumerate() {
            let g = grads.0[i].data();
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            let w = p.value.data_mut();
            for j in 0..w.len() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                if c.weight_decay != 0.0 {
                    w[j] -= lr * c.weight_decay * w[j];
                }
                let mhat = m[j] / bc1;
                w[j] -= match rect {
                    Some(r) => lr * r * mhat / ((v[j] / bc2).sqrt() + c.eps),
                    None => lr * mhat,
                };
            }
        }
        if c.lookahead_k > 1 && self.step % c.lookahead_k as u64 == 0 {
            for (i, p) in ps.iter_mut().enumerate() {
                for (s, w) in self.slow[i].data_mut().iter_mut().zip(p.value.data_mut()) {
                    *s += c.lookahead_alpha * (*w - *s);
                    *w = *s;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamId;

    fn scalar_store(w: f64) -> ParamStore {
        let mut ps = ParamStore::new();
        ps.add("w", Tensor2::from_vec(1, 1, vec![w]).unwrap());
        ps
    }

    fn grad_of(g: f64) -> Grads {
        Grads(vec![Tensor2::from_vec(1, 1, vec![g]).unwrap()])
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut ps = scalar_store(1.25);
        let mut opt = Optimizer::new(OptimConfig::default(), &ps);
        for _ in 0..12 {
            opt.step(&mut ps, &grad_of(0.0), 0.1);
        }
        assert_eq!(ps.get(ParamId(0)).data(), &[1.25]);
    }

    #[test]
    fn quadratic_loss_decreases() {
        // Lookahead deliberately jumps back toward the slow weights at every
        // synchronization, so the loss is compared at those points.
        let mut ps = scalar_store(1.0);
        let mut opt = Optimizer::new(OptimConfig::default(), &ps);
        let id = ParamId(0);
        let mut prev = 1.0;
        for step in 1..=100 {
            let w = ps.get(id).data()[0];
            opt.step(&mut ps, &grad_of(2.0 * w), 0.01);
            if step % 5 == 0 {
                let f = ps.get(id).data()[0].powi(2);
                assert!(f < prev, "loss went from {prev} to {f} at step {step}");
                prev = f;
            }
        }
    }

    #[test]
    fn unrectified_without_lookahead_is_adam() {
        let cfg = OptimConfig {
            rectify: false,
            lookahead_k: 0,
            ..OptimConfig::default()
        };
        let mut ps = scalar_store(0.5);
        let mut opt = Optimizer::new(cfg, &ps);
        let id = ParamId(0);
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.99, 1e-8);
        // hand-stepped trace of the adaptive-moment update for f(w) = w²
        let (mut w, mut m, mut v) = (0.5f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            let g = 2.0 * w;
            opt.step(&mut ps, &grad_of(g), lr);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mhat = m / (1.0 - b1.powi(t));
            let vhat = v / (1.0 - b2.powi(t));
            w -= lr * mhat / (vhat.sqrt() + eps);
            assert!((ps.get(id).data()[0] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn rectified_warmup_uses_momentum_only() {
        let cfg = OptimConfig {
            lookahead_k: 0,
            ..OptimConfig::default()
        };
        let mut ps = scalar_store(0.0);
        let mut opt = Optimizer::new(cfg, &ps);
        // beta2 = 0.99: ρ_t stays at or below 5 for the first few steps
        opt.step(&mut ps, &grad_of(3.0), 0.1);
        assert!((ps.get(ParamId(0)).data()[0] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn lookahead_pulls_back_halfway() {
        let cfg = OptimConfig {
            rectify: false,
            ..OptimConfig::default()
        };
        let mut ps = scalar_store(0.0);
        let mut plain_ps = scalar_store(0.0);
        let mut opt = Optimizer::new(cfg, &ps);
        let mut plain = Optimizer::new(OptimConfig { lookahead_k: 0, ..cfg }, &plain_ps);
        for _ in 0..5 {
            opt.step(&mut ps, &grad_of(1.0), 0.1);
            plain.step(&mut plain_ps, &grad_of(1.0), 0.1);
        }
        let id = ParamId(0);
        assert!((ps.get(id).data()[0] - 0.5 * plain_ps.get(id).data()[0]).abs() < 1e-12);
    }
}
