use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Per-feature batch normalization over all rows (time steps × batch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub features: usize,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
    pub momentum: f64,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Tensor2,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(ps: &mut ParamStore, name: &str, features: usize) -> Self {
        let mut ones = Tensor2::zeros(1, features);
        ones.fill(1.0);
        Self {
            features,
            gamma: ps.add(format!("{name}.gamma"), ones),
            beta: ps.add(format!("{name}.beta"), Tensor2::zeros(1, features)),
            eps: 1e-5,
            momentum: 0.1,
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
        }
    }

    /// Training-mode normalization with batch statistics; updates the running
    /// statistics.
    pub fn forward_train(&mut self, ps: &ParamStore, x: &Tensor2) -> Result<(Tensor2, BatchNormCache)> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::Shape("batchnorm needs at least 2 rows in training mode".into()));
        }
        let f = self.features;
        let mut mean = vec![0.0; f];
        x.col_sums_into(&mut mean);
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; f];
        for r in 0..n {
            for ((v, &xv), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *v += (xv - m) * (xv - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let gamma = ps.get(self.gamma).data();
        let beta = ps.get(self.beta).data();
        let mut xhat = Tensor2::zeros(n, f);
        let mut y = Tensor2::zeros(n, f);
        for r in 0..n {
            let (xr, hr) = (x.row(r), xhat.row_mut(r));
            for c in 0..f {
                hr[c] = (xr[c] - mean[c]) * inv_std[c];
            }
            let yr = y.row_mut(r);
            for c in 0..f {
                yr[c] = gamma[c] * xhat.get(r, c) + beta[c];
            }
        }

        let unbiased = n as f64 / (n as f64 - 1.0);
        for c in 0..f {
            self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean[c];
            self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * var[c] * unbiased;
        }
        Ok((y, BatchNormCache { xhat, inv_std }))
    }

    /// Inference-mode normalization with the running statistics.
    pub fn forward_eval(&self, ps: &ParamStore, x: &Tensor2) -> Tensor2 {
        let gamma = ps.get(self.gamma).data();
        let beta = ps.get(self.beta).data();
        let scale: Vec<f64> = (0..self.features)
            .map(|c| gamma[c] / (self.running_var[c] + self.eps).sqrt())
            .collect();
        let mut y = x.clone();
        for r in 0..y.rows() {
            for (c, v) in y.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.running_mean[c]) * scale[c] + beta[c];
            }
        }
        y
    }

    pub fn backward(&self, ps: &ParamStore, cache: &BatchNormCache, dy: &Tensor2, grads: &mut Grads) -> Tensor2 {
        let n = dy.rows();
        let f = self.features;
        let mut sum_dy = vec![0.0; f];
        let mut sum_dy_xhat = vec![0.0; f];
        for r in 0..n {
            for c in 0..f {
                let g = dy.get(r, c);
                sum_dy[c] += g;
                sum_dy_xhat[c] += g * cache.xhat.get(r, c);
            }
        }
        {
            let dg = grads.get_mut(self.gamma).data_mut();
            for c in 0..f {
                dg[c] += sum_dy_xhat[c];
            }
        }
        {
            let db = grads.get_mut(self.beta).data_mut();
            for c in 0..f {
                db[c] += sum_dy[c];
            }
        }
        let gamma = ps.get(self.gamma).data();
        let nf = n as f64;
        let mut dx = Tensor2::zeros(n, f);
        for r in 0..n {
            let out = dx.row_mut(r);
            for c in 0..f {
                let k = gamma[c] * cache.inv_std[c] / nf;
                out[c] = k * (nf * dy.get(r, c) - sum_dy[c] - cache.xhat.get(r, c) * sum_dy_xhat[c]);
            }
        }
        dx
    }
}
