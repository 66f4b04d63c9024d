use crate::error::{Error, Result};
use crate::quat::{attitude_error_unchecked, Quaternion};

/// Root-mean-square attitude error in degrees over samples `settle_skip..`.
pub fn compute_rmse(q_ref: &[Quaternion], q_est: &[Quaternion], settle_skip: usize) -> Result<f64> {
    if q_ref.len() != q_est.len() {
        return Err(Error::Shape(format!(
            "reference has {} samples, estimate {}",
            q_ref.len(),
            q_est.len()
        )));
    }
    if settle_skip >= q_ref.len() {
        return Err(Error::Shape(format!(
            "settle_skip {settle_skip} leaves no samples out of {}",
            q_ref.len()
        )));
    }
    let n = q_ref.len() - settle_skip;
    let sum: f64 = q_ref[settle_skip..]
        .iter()
        .zip(&q_est[settle_skip..])
        .map(|(&r, &e)| attitude_error_unchecked(r, e).e_alpha.powi(2))
        .sum();
    Ok((sum / n as f64).sqrt().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{random_unit_quaternion, Vec3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_values() {
        let q = vec![Quaternion::new(0.5, 0.5, 0.5, 0.5); 4];
        assert_eq!(compute_rmse(&q, &q, 0).unwrap(), 0.0);

        let tilt = |deg: f64| Quaternion::from_axis_angle(Vec3::X, deg.to_radians()).unwrap();
        let r = vec![Quaternion::IDENTITY; 3];
        let e = vec![tilt(2.0); 3];
        assert!((compute_rmse(&r, &e, 0).unwrap() - 2.0).abs() < 1e-9);

        let e = vec![tilt(0.0), tilt(2.0)];
        let r2 = vec![Quaternion::IDENTITY; 2];
        assert!((compute_rmse(&r2, &e, 0).unwrap() - 2f64.sqrt()).abs() < 1e-9);
        assert!((compute_rmse(&r2, &e, 1).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let a = vec![Quaternion::IDENTITY; 3];
        assert!(compute_rmse(&a, &a[..2], 0).is_err());
        assert!(compute_rmse(&a, &a, 3).is_err());
    }

    #[test]
    fn matches_literal_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r: Vec<_> = (0..500).map(|_| random_unit_quaternion(&mut rng)).collect();
        let e: Vec<_> = (0..500).map(|_| random_unit_quaternion(&mut rng)).collect();
        let mut sum = 0.0;
        for t in 0..500 {
            let err = r[t] * e[t].inv().unwrap();
            let d = (err.w * err.w + err.z * err.z).sqrt().min(1.0);
            sum += (2.0 * d.acos()).powi(2);
        }
        let expect = (sum / 500.0).sqrt().to_degrees();
        assert!((compute_rmse(&r, &e, 0).unwrap() - expect).abs() < 1e-12);
    }
}
