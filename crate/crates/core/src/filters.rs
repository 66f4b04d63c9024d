//! Conventional attitude filters.
//!
//! All variants share one structure: a strapdown prediction with the exact
//! quaternion exponential, then an optional correction that rotates the
//! estimate about a horizontal earth-frame axis so the measured acceleration
//! moves toward the vertical. Heading is never touched by a correction.
//!
//! - [`Variant::Strapdown`]: prediction only.
//! - [`Variant::FixedGain`]: constant correction fraction per step.
//! - [`Variant::Baseline`]: correction fraction `1 − exp(−Ts/τ)` with a time
//!   constant that grows while the accelerometer norm is far from gravity and
//!   relaxes back after the norm has stayed near gravity for a while.

use serde::{Deserialize, Serialize};

use crate::data::Recording;
use crate::error::{Error, Result};
use crate::eval::compute_rmse;
use crate::quat::{gyro_step, shortest_arc, Quaternion, Vec3};

/// Upper bound on the adapted time constant, as a multiple of `tau_base`.
pub const TAU_MAX_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// Accelerometer correction time constant, seconds.
    pub tau_base: f64,
    /// Multiplicative growth/decay rate of the effective time constant.
    pub adapt_gain: f64,
    /// Deviation of ‖acc‖ from `g0` (m/s²) above which corrections are de-weighted.
    pub norm_threshold: f64,
    /// Consecutive near-static samples required before the time constant relaxes.
    pub hold_steps: usize,
    /// Static accelerometer norm, m/s².
    pub g0: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            tau_base: 1.0,
            adapt_gain: 0.1,
            norm_threshold: 0.981,
            hold_steps: 286,
            g0: 9.81,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_base > 0.0) {
            return Err(Error::Config("tau_base must be positive".into()));
        }
        if self.hold_steps < 1 {
            return Err(Error::Config("hold_steps must be at least 1".into()));
        }
        if !(self.norm_threshold >= 0.0) || !(self.adapt_gain >= 0.0) {
            return Err(Error::Config(
                "norm_threshold and adapt_gain must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Cartesian product over time constants and adaptation gains, other
    /// fields taken from `base`.
    pub fn grid(base: FilterParams, taus: &[f64], gains: &[f64]) -> Vec<FilterParams> {
        taus.iter()
            .flat_map(|&tau_base| {
                gains.iter().map(move |&adapt_gain| FilterParams {
                    tau_base,
                    adapt_gain,
                    ..base
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub q_est: Quaternion,
    pub tau_eff: f64,
    pub static_counter: usize,
    /// Earth-frame correction applied by the last step (identity if none).
    pub last_correction: Quaternion,
}

/// Inclination from a single accelerometer sample, heading zero.
pub fn init_from_accel(acc: Vec3, params: &FilterParams) -> Result<FilterState> {
    let n = acc.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain("cannot initialize from a zero acceleration".into()));
    }
    Ok(FilterState {
        q_est: shortest_arc(acc.scale(1.0 / n), Vec3::Z),
        tau_eff: params.tau_base,
        static_counter: 0,
        last_correction: Quaternion::IDENTITY,
    })
}

/// Horizontal axis and angle of the rotation that takes the earth-frame
/// direction of `acc` onto the vertical. `None` for a zero reading.
fn inclination_correction(q: Quaternion, acc: Vec3) -> Option<(Vec3, f64)> {
    let n = acc.norm();
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    let a = q.rotate(acc).scale(1.0 / n);
    // a × e_z
    let axis = Vec3::new(a.y, -a.x, 0.0);
    let s = axis.norm();
    let angle = s.atan2(a.z);
    if s < 1e-15 {
        if a.z > 0.0 {
            return Some((Vec3::X, 0.0));
        }
        return Some((Vec3::X, angle));
    }
    Some((axis.scale(1.0 / s), angle))
}

fn correct(q: Quaternion, acc: Vec3, fraction: f64) -> (Quaternion, Quaternion) {
    match inclination_correction(q, acc) {
        Some((axis, angle)) if fraction > 0.0 && angle > 0.0 => {
            let c = Quaternion::from_axis_angle(axis, fraction * angle)
                .expect("unit correction axis");
            ((c * q).renormalized(), c)
        }
        _ => (q, Quaternion::IDENTITY),
    }
}

/// Adaptive complementary step: predict, adapt the time constant, correct.
pub fn baseline_step(
    state: &FilterState,
    params: &FilterParams,
    acc: Vec3,
    gyr: Vec3,
    ts: f64,
) -> FilterState {
    let q = gyro_step(state.q_est, gyr, ts);

    let mut tau = state.tau_eff.max(params.tau_base);
    let mut counter = state.static_counter;
    let tau_max = TAU_MAX_FACTOR * params.tau_base;
    if (acc.norm() - params.g0).abs() > params.norm_threshold {
        tau = (tau * (1.0 + params.adapt_gain)).min(tau_max);
        counter = 0;
    } else {
        counter = counter.saturating_add(1);
        if counter >= params.hold_steps {
            tau = (tau / (1.0 + params.adapt_gain)).max(params.tau_base);
        }
    }

    let lambda = 1.0 - (-ts / tau).exp();
    let (q, c) = correct(q, acc, lambda);
    FilterState {
        q_est: q,
        tau_eff: tau,
        static_counter: counter,
        last_correction: c,
    }
}

/// Complementary step with a constant correction fraction `gain ∈ [0, 1]`.
pub fn fixed_gain_step(state: &FilterState, gain: f64, acc: Vec3, gyr: Vec3, ts: f64) -> FilterState {
    let q = gyro_step(state.q_est, gyr, ts);
    let (q, c) = correct(q, acc, gain.clamp(0.0, 1.0));
    FilterState {
        q_est: q,
        last_correction: c,
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    Baseline(FilterParams),
    FixedGain { gain: f64 },
    Strapdown,
}

impl Variant {
    pub fn id(&self) -> &'static str {
        match self {
            Variant::Baseline(_) => "baseline",
            Variant::FixedGain { .. } => "fixed_gain",
            Variant::Strapdown => "strapdown",
        }
    }
}

/// Runs a filter causally over a recording, one estimate per sample.
///
/// The state is initialized from the first accelerometer sample unless
/// `initial` is given.
pub fn run_filter(rec: &Recording, variant: &Variant, initial: Option<Quaternion>) -> Result<Vec<Quaternion>> {
    rec.validate()?;
    let params = match variant {
        Variant::Baseline(p) => {
            p.validate()?;
            *p
        }
        _ => FilterParams::default(),
    };
    let mut state = match initial {
        Some(q) => FilterState {
            q_est: q.normalized()?,
            tau_eff: params.tau_base,
            static_counter: 0,
            last_correction: Quaternion::IDENTITY,
        },
        None => init_from_accel(rec.acc[0], &params)?,
    };
    let ts = rec.ts();
    let mut out = Vec::with_capacity(rec.len());
    out.push(state.q_est);
    for k in 1..rec.len() {
        state = match variant {
            Variant::Baseline(p) => baseline_step(&state, p, rec.acc[k], rec.gyr[k], ts),
            Variant::FixedGain { gain } => fixed_gain_step(&state, *gain, rec.acc[k], rec.gyr[k], ts),
            Variant::Strapdown => FilterState {
                q_est: gyro_step(state.q_est, rec.gyr[k], ts),
                ..state
            },
        };
        out.push(state.q_est);
    }
    Ok(out)
}

/// Mean attitude RMSE (degrees) of the baseline filter with `params` over `recs`.
/// Non-finite results map to `+∞`.
pub fn mean_baseline_rmse(recs: &[Recording], params: &FilterParams) -> Result<f64> {
    let mut total = 0.0;
    for rec in recs {
        let est = run_filter(rec, &Variant::Baseline(*params), None)?;
        let e = compute_rmse(&rec.q_ref, &est, 0)?;
        total += if e.is_finite() { e } else { f64::INFINITY };
    }
    Ok(total / recs.len() as f64)
}

/// Grid point minimizing the mean RMSE over all recordings. Ties go to the
/// smaller `tau_base`, then the smaller `adapt_gain`.
pub fn tune_filter(recs: &[Recording], grid: &[FilterParams]) -> Result<FilterParams> {
    if recs.is_empty() || grid.is_empty() {
        return Err(Error::Config("tuning needs recordings and a nonempty grid".into()));
    }
    let mut best: Option<(f64, FilterParams)> = None;
    for p in grid {
        let score = mean_baseline_rmse(recs, p)?;
        let better = match &best {
            None => true,
            Some((s, b)) => {
                score < *s
                    || (score == *s
                        && (p.tau_base, p.adapt_gain) < (b.tau_base, b.adapt_gain))
            }
        };
        if better {
            best = Some((score, *p));
        }
    }
    Ok(best.expect("nonempty grid").1)
}
