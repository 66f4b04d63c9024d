use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{Quaternion, Vec3};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 286.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Rotation,
    Translation,
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speed {
    Slow,
    Medium,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pausing {
    Paused,
    Nonstop,
}

/// Motion taxonomy of a recording: one value from each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionLabel {
    pub kind: Kind,
    pub speed: Speed,
    pub pausing: Pausing,
}

impl MotionLabel {
    pub fn new(kind: Kind, speed: Speed, pausing: Pausing) -> Self {
        Self {
            kind,
            speed,
            pausing,
        }
    }
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Rotation => "rotation",
            Kind::Translation => "translation",
            Kind::Arbitrary => "arbitrary",
        }
    }
}

impl Speed {
    pub fn as_str(self) -> &'static str {
        match self {
            Speed::Slow => "slow",
            Speed::Medium => "medium",
            Speed::Fast => "fast",
        }
    }
}

impl Pausing {
    pub fn as_str(self) -> &'static str {
        match self {
            Pausing::Paused => "paused",
            Pausing::Nonstop => "nonstop",
        }
    }
}

impl fmt::Display for MotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}_{}",
            self.kind.as_str(),
            self.speed.as_str(),
            self.pausing.as_str()
        )
    }
}

/// Time-aligned accelerometer, gyroscope and reference orientation samples.
///
/// Sample `k` is taken at `t = k / sample_rate_hz`. Accelerations are in m/s²,
/// angular rates in rad/s, and `q_ref[k]` maps sensor to earth coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub name: String,
    pub sample_rate_hz: f64,
    pub acc: Vec<Vec3>,
    pub gyr: Vec<Vec3>,
    pub q_ref: Vec<Quaternion>,
    pub label: Option<MotionLabel>,
}

impl Recording {
    pub fn new(
        name: impl Into<String>,
        sample_rate_hz: f64,
        acc: Vec<Vec3>,
        gyr: Vec<Vec3>,
        q_ref: Vec<Quaternion>,
        label: Option<MotionLabel>,
    ) -> Result<Self> {
        let rec = Self {
            name: name.into(),
            sample_rate_hz,
            acc,
            gyr,
            q_ref,
            label,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(Error::Domain(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        let n = self.acc.len();
        if n == 0 {
            return Err(Error::Shape("recording has no samples".into()));
        }
        if self.gyr.len() != n || self.q_ref.len() != n {
            return Err(Error::Shape(format!(
                "channel lengths differ: acc {}, gyr {}, q_ref {}",
                n,
                self.gyr.len(),
                self.q_ref.len()
            )));
        }
        if let Some(k) = self.q_ref.iter().position(|q| !q.is_unit(1e-6)) {
            return Err(Error::Domain(format!(
                "q_ref sample {k} is not unit-norm (norm {})",
                self.q_ref[k].norm()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.acc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acc.is_empty()
    }

    /// Sampling period in seconds.
    pub fn ts(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate_hz
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> Recording {
        let n = n.min(self.len());
        Recording {
            name: self.name.clone(),
            sample_rate_hz: self.sample_rate_hz,
            acc: self.acc[..n].to_vec(),
            gyr: self.gyr[..n].to_vec(),
            q_ref: self.q_ref[..n].to_vec(),
            label: self.label,
        }
    }

    /// Samples `start..start + len` as a new recording.
    pub fn slice(&self, start: usize, len: usize) -> Recording {
        let end = (start + len).min(self.len());
        Recording {
            name: self.name.clone(),
            sample_rate_hz: self.sample_rate_hz,
            acc: self.acc[start..end].to_vec(),
            gyr: self.gyr[start..end].to_vec(),
            q_ref: self.q_ref[start..end].to_vec(),
            label: self.label,
        }
    }
}
