//! Training losses on rows of unit quaternions (`n × 4`, scalar first).
//!
//! The two attitude losses work on the same scalar `d = √(w_err² + z_err²)`
//! used by the metric, so they ignore heading just like the metric does.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;

/// Upper clamp for `d` in the arccos loss.
pub const ARCCOS_CLAMP: f64 = 1.0 - 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Sign-aligned elementwise mean squared error.
    MseElementwise,
    /// Mean of `2·acos(d)`, i.e. the attitude error itself.
    ArccosAtt,
    /// Mean smooth-L1 of `1 − d`.
    #[serde(rename = "linear_att_smoothl1")]
    LinearAttSmoothL1,
}

/// `2·acos(d)` with `d` clamped to [`ARCCOS_CLAMP`].
pub fn arccos_loss_of_d(d: f64) -> f64 {
    2.0 * d.clamp(-1.0, ARCCOS_CLAMP).acos()
}

/// Derivative of [`arccos_loss_of_d`]; zero above the clamp, where the loss is
/// flat.
pub fn arccos_loss_grad_d(d: f64) -> f64 {
    if d > ARCCOS_CLAMP {
        0.0
    } else {
        let dc = d.max(-1.0 + 1e-15);
        -2.0 / (1.0 - dc * dc).sqrt()
    }
}

pub fn smooth_l1(r: f64, beta: f64) -> f64 {
    if r.abs() < beta {
        r * r / (2.0 * beta)
    } else {
        r.abs() - beta / 2.0
    }
}

pub fn smooth_l1_grad(r: f64, beta: f64) -> f64 {
    if r.abs() < beta {
        r / beta
    } else {
        r.signum()
    }
}

/// Smooth-L1 of `1 − d`.
pub fn linear_loss_of_d(d: f64, beta: f64) -> f64 {
    smooth_l1(1.0 - d, beta)
}

pub fn linear_loss_grad_d(d: f64, beta: f64) -> f64 {
    -smooth_l1_grad(1.0 - d, beta)
}

/// `d` for one pair and its gradient with respect to `q_est`.
///
/// With `q_err = q_ref ⊗ q_est*`, both `w_err` and `z_err` are linear in
/// `q_est`, so the gradient is `(w·c_w + z·c_z)/d`.
pub fn d_and_grad(q_ref: &[f64], q_est: &[f64]) -> (f64, [f64; 4]) {
    let a = q_ref;
    let cw = [a[0], a[1], a[2], a[3]];
    let cz = [a[3], a[2], -a[1], -a[0]];
    let dot = |c: &[f64; 4]| c.iter().zip(q_est).map(|(x, y)| x * y).sum::<f64>();
    let (w, z) = (dot(&cw), dot(&cz));
    let d = (w * w + z * z).sqrt();
    let mut g = [0.0; 4];
    if d > 0.0 {
        for i in 0..4 {
            g[i] = (w * cw[i] + z * cz[i]) / d;
        }
    }
    (d, g)
}

/// Mean loss over rows and its gradient with respect to `q_est`.
pub fn loss_and_grad(kind: LossKind, beta: f64, q_ref: &Tensor2, q_est: &Tensor2) -> (f64, Tensor2) {
    assert_eq!(q_ref.shape(), q_est.shape());
    assert_eq!(q_ref.cols(), 4);
    let n = q_ref.rows();
    let mut grad = Tensor2::zeros(n, 4);
    if n == 0 {
        return (0.0, grad);
    }
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    for r in 0..n {
        let (a, e) = (q_ref.row(r), q_est.row(r));
        let g = grad.row_mut(r);
        match kind {
            LossKind::MseElementwise => {
                let s = if a.iter().zip(e).map(|(x, y)| x * y).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
                for i in 0..4 {
                    let diff = s * e[i] - a[i];
                    total += diff * diff / 4.0;
                    g[i] = 2.0 * diff * s / 4.0 * inv_n;
                }
            }
            LossKind::ArccosAtt | LossKind::LinearAttSmoothL1 => {
                let (d, dd) = d_and_grad(a, e);
                let (l, gd) = if kind == LossKind::ArccosAtt {
                    (arccos_loss_of_d(d), arccos_loss_grad_d(d))
                } else {
                    (linear_loss_of_d(d, beta), linear_loss_grad_d(d, beta))
                };
                total += l;
                for i in 0..4 {
                    g[i] = gd * dd[i] * inv_n;
                }
            }
        }
    }
    (total * inv_n, grad)
}

pub fn loss(kind: LossKind, beta: f64, q_ref: &Tensor2, q_est: &Tensor2) -> f64 {
    loss_and_grad(kind, beta, q_ref, q_est).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{from_axis_angle, quat_mul, random_unit_quaternion, Quaternion, Vec3};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rows(qs: &[Quaternion]) -> Tensor2 {
        Tensor2::from_vec(qs.len(), 4, qs.iter().flat_map(|q| q.to_array()).collect()).unwrap()
    }

    #[test]
    fn arccos_at_perfect_estimate_hits_clamp_floor() {
        let q = rows(&[Quaternion::IDENTITY]);
        let l = loss(LossKind::ArccosAtt, 0.01, &q, &q);
        assert!((l - 2.0 * ARCCOS_CLAMP.acos()).abs() < 1e-15);
        assert!((l - 8.944e-4).abs() < 1e-6);
    }

    #[test]
    fn arccos_of_sixty_degree_case() {
        assert!((arccos_loss_of_d(0.8660254037844386) - std::f64::consts::FRAC_PI_3).abs() < 1e-9);
        assert!((arccos_loss_of_d(0.8660) - 1.0472).abs() < 1e-4);
    }

    #[test]
    fn arccos_gradient_explodes_near_one() {
        let g = arccos_loss_grad_d(1.0 - 1e-7);
        let expect = 2.0 / (2e-7f64).sqrt();
        assert!(g.abs() > 4000.0);
        assert!((g.abs() - expect).abs() / expect < 1e-3);
    }

    #[test]
    fn linear_loss_values_and_bounded_gradient() {
        assert_eq!(linear_loss_of_d(1.0, 0.01), 0.0);
        assert_eq!(linear_loss_grad_d(1.0, 0.01), 0.0);
        assert!((smooth_l1(0.5, 0.1) - 0.45).abs() < 1e-15);
        for i in 0..=10_000 {
            let d = i as f64 / 10_000.0;
            assert!(linear_loss_grad_d(d, 0.01).abs() <= 1.0);
        }
    }

    #[test]
    fn mse_is_sign_aligned() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_unit_quaternion(&mut rng);
        assert_eq!(loss(LossKind::MseElementwise, 0.01, &rows(&[q]), &rows(&[q])), 0.0);
        assert!(loss(LossKind::MseElementwise, 0.01, &rows(&[q]), &rows(&[q.scale(-1.0)])) < 1e-30);
        let p = random_unit_quaternion(&mut rng);
        let s = if q.dot(p) < 0.0 { -1.0 } else { 1.0 };
        let direct: f64 = q.to_array().iter().zip(p.to_array()).map(|(a, b)| (s * b - a).powi(2)).sum::<f64>() / 4.0;
        assert!((loss(LossKind::MseElementwise, 0.01, &rows(&[q]), &rows(&[p])) - direct).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<Quaternion> = (0..5).map(|_| random_unit_quaternion(&mut rng)).collect();
        // estimates a moderate distance from the references, plus one inside
        // the smooth-L1 quadratic zone
        let mut e: Vec<Quaternion> = a
            .iter()
            .map(|q| {
                let r = from_axis_angle(Vec3::new(1.0, 0.3, 0.2), 0.4).unwrap();
                quat_mul(*q, r)
            })
            .collect();
        e[4] = quat_mul(a[4], from_axis_angle(Vec3::X, 0.1).unwrap());
        let (ta, te) = (rows(&a), rows(&e));
        for kind in [LossKind::MseElementwise, LossKind::ArccosAtt, LossKind::LinearAttSmoothL1] {
            let (_, g) = loss_and_grad(kind, 0.01, &ta, &te);
            let h = 1e-6;
            for i in 0..te.len() {
                let mut p = te.clone();
                p.data_mut()[i] += h;
                let mut m = te.clone();
                m.data_mut()[i] -= h;
                let fd = (loss(kind, 0.01, &ta, &p) - loss(kind, 0.01, &ta, &m)) / (2.0 * h);
                let an = g.data()[i];
                assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-6), "{kind:?} {i}: {fd} vs {an}");
            }
        }
    }

    proptest! {
        #[test]
        fn attitude_losses_ignore_heading(seed in any::<u64>(), yaw in -3.0f64..3.0, yaw2 in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_unit_quaternion(&mut rng);
            let e = random_unit_quaternion(&mut rng);
            let v = from_axis_angle(Vec3::Z, yaw).unwrap();
            let v2 = from_axis_angle(Vec3::Z, yaw2).unwrap();
            // q_est ← v2* ⊗ q_est turns q_err into q_err ⊗ v2, a vertical-axis error
            let e_yawed = quat_mul(v2.conj(), e);
            for kind in [LossKind::ArccosAtt, LossKind::LinearAttSmoothL1] {
                let base = loss(kind, 0.01, &rows(&[a]), &rows(&[e]));
                let both = loss(kind, 0.01, &rows(&[quat_mul(v, a)]), &rows(&[quat_mul(v, e)]));
                let yawed = loss(kind, 0.01, &rows(&[a]), &rows(&[e_yawed]));
                prop_assert!((base - both).abs() < 1e-9);
                prop_assert!((base - yawed).abs() < 1e-9);
            }
            let err2 = quat_mul(quat_mul(a, e.conj()), v2);
            let (d1, _) = d_and_grad(&a.to_array(), &e_yawed.to_array());
            prop_assert!((d1 - (err2.w * err2.w + err2.z * err2.z).sqrt()).abs() < 1e-9);
        }
    }
}
