//! Quaternion algebra and the attitude error metric.
//!
//! Conventions: Hamilton product, scalar-first storage, and an orientation
//! quaternion `q` maps sensor-frame coordinates to earth-frame coordinates,
//! `v_E = q ⊗ v_S ⊗ q⁻¹`. The earth frame has a vertical z axis.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `‖q‖ − 1` accepted for inputs that must be unit quaternions.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

/// Scalar-first quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn conj(self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn scale(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_unit(self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// Multiplicative inverse `q* / ‖q‖²`.
    pub fn inv(self) -> Result<Quaternion> {
        let n2 = self.dot(self);
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Domain(format!("cannot invert quaternion {self:?}")));
        }
        Ok(self.conj().scale(1.0 / n2))
    }

    pub fn normalized(self) -> Result<Quaternion> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain(format!("cannot normalize quaternion {self:?}")));
        }
        Ok(self.scale(1.0 / n))
    }

    /// Cheap renormalization for quaternions already known to be close to unit.
    pub(crate) fn renormalized(self) -> Quaternion {
        self.scale(1.0 / self.norm())
    }

    /// Unit quaternion for a rotation of `angle` radians about `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Quaternion> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("rotation axis must be nonzero".into()));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / n;
        Ok(Quaternion::new(c, axis.x * k, axis.y * k, axis.z * k))
    }

    /// Quaternion exponential of the rotation vector `rv` (axis · angle).
    pub fn from_rotation_vector(rv: Vec3) -> Quaternion {
        let angle = rv.norm();
        if angle == 0.0 {
            return Quaternion::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / angle;
        Quaternion::new(c, rv.x * k, rv.y * k, rv.z * k)
    }

    /// Rotates `v` by the unit quaternion `self`: `self ⊗ v ⊗ self*`.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v + 2w(u×v) + 2u×(u×v) with u the vector part
        let u = self.vector();
        let t = u.cross(v).scale(2.0);
        v + t.scale(self.w) + u.cross(t)
    }

    /// Smallest rotation angle in `[0, π]`, sign-invariant.
    pub fn angle(self) -> f64 {
        2.0 * self.vector().norm().atan2(self.w.abs())
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product.
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

pub fn quat_inv(q: Quaternion) -> Result<Quaternion> {
    q.inv()
}

pub fn rotate_vec(q: Quaternion, v: Vec3) -> Vec3 {
    q.rotate(v)
}

pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Quaternion> {
    Quaternion::from_axis_angle(axis, angle)
}

/// One strapdown step with body rate `omega` held constant over `ts` seconds.
///
/// Uses the exact quaternion exponential, so a constant rate integrates to the
/// closed-form rotation regardless of the step count.
pub fn gyro_step(q: Quaternion, omega: Vec3, ts: f64) -> Quaternion {
    if omega.norm() == 0.0 {
        return q;
    }
    (q * Quaternion::from_rotation_vector(omega.scale(ts))).renormalized()
}

/// Inclination part of an estimation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    /// `√(w_err² + z_err²)`, clamped to `[0, 1]`.
    pub d: f64,
    /// Smallest rotation about a horizontal axis that removes the error, radians.
    pub e_alpha: f64,
}

/// Heading-free attitude error between truth and estimate.
///
/// `q_err = q_true ⊗ q_est⁻¹`; a vertical-axis error contributes nothing.
pub fn attitude_error(q_true: Quaternion, q_est: Quaternion) -> Result<ErrorDecomposition> {
    for (name, q) in [("q_true", q_true), ("q_est", q_est)] {
        if !q.is_unit(UNIT_TOLERANCE) {
            return Err(Error::Domain(format!(
                "{name} is not a unit quaternion (norm {})",
                q.norm()
            )));
        }
    }
    Ok(attitude_error_unchecked(q_true, q_est))
}

/// [`attitude_error`] without the unit-norm check.
pub fn attitude_error_unchecked(q_true: Quaternion, q_est: Quaternion) -> ErrorDecomposition {
    let err = q_true * q_est.conj();
    let d = (err.w * err.w + err.z * err.z).sqrt().clamp(0.0, 1.0);
    // 2·arccos(d) written via atan2: for a unit q_err, sin(e/2) = √(x² + y²),
    // and this form keeps full precision near d = 1.
    let s = (err.x * err.x + err.y * err.y).sqrt();
    ErrorDecomposition {
        d,
        e_alpha: 2.0 * s.atan2(d),
    }
}

/// Uniformly distributed rotation (normalized 4-D Gaussian).
pub fn random_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = q.norm();
        if n > 1e-6 {
            return q.scale(1.0 / n);
        }
    }
}

/// Shortest-arc rotation taking unit vector `from` onto unit vector `to`.
///
/// For antiparallel inputs the rotation is by π about an axis orthogonal to
/// `from`, preferring the x axis.
pub fn shortest_arc(from: Vec3, to: Vec3) -> Quaternion {
    let c = from.dot(to);
    let axis = from.cross(to);
    if 1.0 + c < 1e-12 {
        let mut ortho = Vec3::X.cross(from);
        if ortho.norm() < 1e-6 {
            ortho = Vec3::Y.cross(from);
        }
        let o = ortho.scale(1.0 / ortho.norm());
        return Quaternion::new(0.0, o.x, o.y, o.z);
    }
    Quaternion::new(1.0 + c, axis.x, axis.y, axis.z).renormalized()
}
