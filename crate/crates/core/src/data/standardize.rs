use serde::{Deserialize, Serialize};

use super::recording::Recording;
use crate::error::{Error, Result};
use crate::quat::Vec3;

/// Input channels: acc x/y/z then gyr x/y/z.
pub const CHANNELS: usize = 6;

/// Per-channel affine normalization fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
}

impl Standardizer {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; CHANNELS],
            std: [1.0; CHANNELS],
        }
    }

    /// Standardized 6-channel feature vector of sample `k`.
    pub fn features(&self, acc: Vec3, gyr: Vec3) -> [f64; CHANNELS] {
        let raw = [acc.x, acc.y, acc.z, gyr.x, gyr.y, gyr.z];
        let mut out = [0.0; CHANNELS];
        for c in 0..CHANNELS {
            out[c] = (raw[c] - self.mean[c]) / self.std[c];
        }
        out
    }
}

fn channels(acc: Vec3, gyr: Vec3) -> [f64; CHANNELS] {
    [acc.x, acc.y, acc.z, gyr.x, gyr.y, gyr.z]
}

/// Pooled mean and (population) standard deviation over all samples.
pub fn fit_standardizer<'a, I>(recs: I) -> Result<Standardizer>
where
    I: IntoIterator<Item = &'a Recording>,
{
    let recs: Vec<&Recording> = recs.into_iter().collect();
    let n: usize = recs.iter().map(|r| r.len()).sum();
    if n == 0 {
        return Err(Error::Domain("cannot fit a standardizer on no samples".into()));
    }
    let mut mean = [0.0; CHANNELS];
    for r in &recs {
        for k in 0..r.len() {
            for (m, v) in mean.iter_mut().zip(channels(r.acc[k], r.gyr[k])) {
                *m += v;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = [0.0; CHANNELS];
    for r in &recs {
        for k in 0..r.len() {
            for (c, v) in channels(r.acc[k], r.gyr[k]).into_iter().enumerate() {
                var[c] += (v - mean[c]).powi(2);
            }
        }
    }
    let mut std = [0.0; CHANNELS];
    for c in 0..CHANNELS {
        std[c] = (var[c] / n as f64).sqrt();
        if !(std[c] > 1e-12) {
            return Err(Error::Domain(format!("channel {c} has zero variance")));
        }
    }
    Ok(Standardizer { mean, std })
}

/// Returns a copy of `rec` whose acc/gyr channels are standardized.
pub fn apply_standardizer(s: &Standardizer, rec: &Recording) -> Recording {
    let mut out = rec.clone();
    for k in 0..rec.len() {
        let f = s.features(rec.acc[k], rec.gyr[k]);
        out.acc[k] = Vec3::new(f[0], f[1], f[2]);
        out.gyr[k] = Vec3::new(f[3], f[4], f[5]);
    }
    out
}
