//! Synthetic IMU recordings with exact ground truth.
//!
//! Body angular rate and earth-frame linear acceleration are sums of random
//! sinusoids in a speed-dependent frequency band, gated by a pause envelope.
//! The reference orientation is the strapdown integral of the true body rate
//! (`q[k] = q[k-1] ⊗ exp(ω[k]·Ts/2)`), so noise-free gyroscope samples are
//! exactly consistent with it.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::recording::{Kind, MotionLabel, Pausing, Recording, Speed};
use crate::quat::{gyro_step, random_unit_quaternion, Quaternion, Vec3};

pub const GRAVITY: f64 = 9.81;

/// Sensor error model. The defaults are plausible MEMS values, not figures of
/// any particular device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuModel {
    /// White noise standard deviation, m/s².
    pub acc_noise_std: f64,
    /// White noise standard deviation, rad/s.
    pub gyr_noise_std: f64,
    /// Upper bound on the per-recording constant bias magnitude, m/s².
    pub acc_bias_max: f64,
    /// Upper bound on the per-recording constant bias magnitude, rad/s.
    pub gyr_bias_max: f64,
    /// Per-axis saturation, m/s². Off by default.
    pub acc_range: Option<f64>,
    /// Per-axis saturation, rad/s. Off by default.
    pub gyr_range: Option<f64>,
}

impl Default for ImuModel {
    fn default() -> Self {
        Self {
            acc_noise_std: 0.05,
            gyr_noise_std: 0.005,
            acc_bias_max: 0.05,
            gyr_bias_max: 0.01,
            acc_range: None,
            gyr_range: None,
        }
    }
}

impl ImuModel {
    /// No noise, no bias, no saturation.
    pub fn ideal() -> Self {
        Self {
            acc_noise_std: 0.0,
            gyr_noise_std: 0.0,
            acc_bias_max: 0.0,
            gyr_bias_max: 0.0,
            acc_range: None,
            gyr_range: None,
        }
    }
}

/// Motion magnitudes per speed level, indexed slow/medium/fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionProfile {
    /// Peak ‖ω‖ in rad/s.
    pub peak_gyr: [f64; 3],
    /// Peak ‖linear acceleration‖ in m/s².
    pub peak_acc: [f64; 3],
    /// Upper edge of the sinusoid frequency band, Hz.
    pub max_freq_hz: [f64; 3],
    /// Lower band edge as a fraction of the upper edge.
    pub min_freq_ratio: f64,
    /// Sinusoids per axis.
    pub components: usize,
    /// Angular-rate scale of translation recordings relative to rotation ones.
    pub translation_wobble: f64,
    /// Seconds of motion between pauses.
    pub motion_s: f64,
    /// Pause length in seconds.
    pub pause_s: f64,
    /// Raised-cosine ramp at motion segment edges, seconds.
    pub ramp_s: f64,
}

impl Default for MotionProfile {
    fn default() -> Self {
        Self {
            peak_gyr: [0.5, 2.0, 8.0],
            peak_acc: [0.5, 2.0, 8.0],
            max_freq_hz: [0.3, 1.0, 3.0],
            min_freq_ratio: 0.125,
            components: 4,
            translation_wobble: 0.05,
            motion_s: 30.0,
            pause_s: 10.0,
            ramp_s: 1.0,
        }
    }
}

fn speed_index(s: Speed) -> usize {
    match s {
        Speed::Slow => 0,
        Speed::Medium => 1,
        Speed::Fast => 2,
    }
}

#[derive(Debug, Clone)]
struct Sinusoids {
    // (amplitude, angular frequency, phase) per axis
    axes: [Vec<(f64, f64, f64)>; 3],
}

impl Sinusoids {
    fn random(rng: &mut ChaCha8Rng, n: usize, f_lo: f64, f_hi: f64) -> Self {
        let mut axis = || {
            (0..n)
                .map(|_| {
                    let a = rng.random_range(0.3..1.0);
                    let f = rng.random_range(f_lo..=f_hi);
                    let p = rng.random_range(0.0..2.0 * PI);
                    (a, 2.0 * PI * f, p)
                })
                .collect::<Vec<_>>()
        };
        Self {
            axes: [axis(), axis(), axis()],
        }
    }

    fn eval(&self, t: f64) -> Vec3 {
        let e = |c: &Vec<(f64, f64, f64)>| c.iter().map(|&(a, w, p)| a * (w * t + p).sin()).sum();
        Vec3::new(e(&self.axes[0]), e(&self.axes[1]), e(&self.axes[2]))
    }
}

/// Full simulator configuration. [`simulate_recording`] covers the common case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulator {
    pub label: MotionLabel,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub imu: ImuModel,
    pub profile: MotionProfile,
    pub seed: u64,
    /// Mounting rotation of the sensor: reported orientation is `q ⊗ r` and
    /// all signals are expressed in the rotated sensor frame.
    pub sensor_rotation: Quaternion,
    pub name: Option<String>,
}

impl Simulator {
    pub fn new(label: MotionLabel, duration_s: f64, sample_rate_hz: f64, seed: u64) -> Self {
        Self {
            label,
            duration_s,
            sample_rate_hz,
            imu: ImuModel::default(),
            profile: MotionProfile::default(),
            seed,
            sensor_rotation: Quaternion::IDENTITY,
            name: None,
        }
    }

    fn envelope(&self, t: f64) -> f64 {
        if self.label.pausing == Pausing::Nonstop {
            return 1.0;
        }
        let p = &self.profile;
        let u = t.max(0.0) % (p.motion_s + p.pause_s);
        if u >= p.motion_s {
            return 0.0;
        }
        let ramp = p.ramp_s.min(0.5 * p.motion_s);
        if ramp <= 0.0 {
            return 1.0;
        }
        let edge = u.min(p.motion_s - u);
        if edge >= ramp {
            1.0
        } else {
            0.5 * (1.0 - (PI * edge / ramp).cos())
        }
    }

    pub fn run(&self) -> Recording {
        let p = &self.profile;
        let si = speed_index(self.label.speed);
        let n = ((self.duration_s * self.sample_rate_hz).round() as usize).max(1);
        let ts = 1.0 / self.sample_rate_hz;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let f_hi = p.max_freq_hz[si];
        let f_lo = f_hi * p.min_freq_ratio;
        let rate_shape = Sinusoids::random(&mut rng, p.components, f_lo, f_hi);
        let acc_shape = Sinusoids::random(&mut rng, p.components, f_lo, f_hi);
        let q0 = random_unit_quaternion(&mut rng);
        let acc_bias = random_vector(&mut rng, self.imu.acc_bias_max);
        let gyr_bias = random_vector(&mut rng, self.imu.gyr_bias_max);

        let (gyr_peak, acc_peak) = match self.label.kind {
            Kind::Rotation => (p.peak_gyr[si], 0.0),
            Kind::Translation => (p.peak_gyr[si] * p.translation_wobble, p.peak_acc[si]),
            Kind::Arbitrary => (p.peak_gyr[si], p.peak_acc[si]),
        };

        // rates are sampled at interval midpoints, accelerations at sample instants
        let rate_at = |k: usize| {
            let t = if k == 0 { 0.0 } else { (k as f64 - 0.5) * ts };
            rate_shape.eval(t).scale(self.envelope(t))
        };
        let acc_at = |k: usize| {
            let t = k as f64 * ts;
            acc_shape.eval(t).scale(self.envelope(t))
        };
        let mut omega: Vec<Vec3> = (0..n).map(rate_at).collect();
        let mut lin: Vec<Vec3> = (0..n).map(acc_at).collect();
        normalize_peak(&mut omega, gyr_peak);
        normalize_peak(&mut lin, acc_peak);

        let r = self.sensor_rotation;
        let r_inv = r.conj();
        let gravity = Vec3::new(0.0, 0.0, GRAVITY);
        let acc_noise = Normal::new(0.0, self.imu.acc_noise_std.max(0.0)).expect("finite std");
        let gyr_noise = Normal::new(0.0, self.imu.gyr_noise_std.max(0.0)).expect("finite std");

        let mut q_body = q0;
        let mut acc = Vec::with_capacity(n);
        let mut gyr = Vec::with_capacity(n);
        let mut q_ref = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                q_body = gyro_step(q_body, omega[k], ts);
            }
            let q_sensor = q_body * r;
            // earth-frame specific force expressed in the sensor frame
            let f_sensor = sandwich(q_sensor.conj(), lin[k] + gravity);
            let w_sensor = sandwich(r_inv, omega[k]);

            let mut a = f_sensor + acc_bias;
            let mut g = w_sensor + gyr_bias;
            if self.imu.acc_noise_std > 0.0 {
                a += noise_vector(&mut rng, &acc_noise);
            }
            if self.imu.gyr_noise_std > 0.0 {
                g += noise_vector(&mut rng, &gyr_noise);
            }
            if let Some(lim) = self.imu.acc_range {
                a = clip(a, lim);
            }
            if let Some(lim) = self.imu.gyr_range {
                g = clip(g, lim);
            }
            acc.push(a);
            gyr.push(g);
            q_ref.push(q_sensor);
        }

        let name = self
            .name
            .clone()
            .unwrap_or_else(|| format!("{}_s{}", self.label, self.seed));
        Recording::new(name, self.sample_rate_hz, acc, gyr, q_ref, Some(self.label))
            .expect("simulator produces consistent recordings")
    }
}

/// Simulates one recording with the default motion profile.
pub fn simulate_recording(
    label: MotionLabel,
    duration_s: f64,
    sample_rate_hz: f64,
    imu: &ImuModel,
    seed: u64,
) -> Recording {
    let mut sim = Simulator::new(label, duration_s, sample_rate_hz, seed);
    sim.imu = imu.clone();
    sim.run()
}

/// Motion taxonomies for `n` recordings.
///
/// `n == 6` gives the compact desk-scale set, `n == 15` covers every
/// kind × speed combination nonstop plus medium and fast paused variants.
/// Other sizes cycle through the 15-entry list.
pub fn taxonomy(n: usize) -> Vec<MotionLabel> {
    use Kind::*;
    use Pausing::*;
    use Speed::*;
    if n == 6 {
        return vec![
            MotionLabel::new(Rotation, Slow, Paused),
            MotionLabel::new(Rotation, Fast, Nonstop),
            MotionLabel::new(Translation, Medium, Nonstop),
            MotionLabel::new(Translation, Fast, Paused),
            MotionLabel::new(Arbitrary, Medium, Paused),
            MotionLabel::new(Arbitrary, Fast, Nonstop),
        ];
    }
    let mut full = Vec::with_capacity(15);
    for kind in [Rotation, Translation, Arbitrary] {
        for speed in [Slow, Medium, Fast] {
            full.push(MotionLabel::new(kind, speed, Nonstop));
        }
    }
    for kind in [Rotation, Translation, Arbitrary] {
        for speed in [Medium, Fast] {
            full.push(MotionLabel::new(kind, speed, Paused));
        }
    }
    full.into_iter().cycle().take(n).collect()
}

fn sandwich(q: Quaternion, v: Vec3) -> Vec3 {
    (q * Quaternion::new(0.0, v.x, v.y, v.z) * q.conj()).vector()
}

fn normalize_peak(v: &mut [Vec3], peak: f64) {
    let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let s = if max > 0.0 { peak / max } else { 0.0 };
    for x in v {
        *x = x.scale(s);
    }
}

fn random_vector(rng: &mut ChaCha8Rng, max_norm: f64) -> Vec3 {
    let dir = random_unit_quaternion(rng).rotate(Vec3::Z);
    let mag = rng.random_range(0.0..=1.0) * max_norm;
    dir.scale(mag)
}

fn noise_vector(rng: &mut ChaCha8Rng, d: &Normal<f64>) -> Vec3 {
    Vec3::new(d.sample(rng), d.sample(rng), d.sample(rng))
}

fn clip(v: Vec3, lim: f64) -> Vec3 {
    Vec3::new(v.x.clamp(-lim, lim), v.y.clamp(-lim, lim), v.z.clamp(-lim, lim))
}
