use super::recording::Recording;
use crate::quat::Quaternion;

/// Virtually re-mounts the sensor rotated by the unit quaternion `r`.
///
/// Signals are re-expressed in the rotated sensor frame (`r⁻¹ · v`) and the
/// reference becomes `q_ref ⊗ r`, so the earth-frame picture is unchanged.
pub fn augment_rotation(rec: &Recording, r: Quaternion) -> Recording {
    let r_inv = r.conj();
    Recording {
        name: rec.name.clone(),
        sample_rate_hz: rec.sample_rate_hz,
        acc: rec.acc.iter().map(|&a| r_inv.rotate(a)).collect(),
        gyr: rec.gyr.iter().map(|&g| r_inv.rotate(g)).collect(),
        q_ref: rec.q_ref.iter().map(|&q| q * r).collect(),
        label: rec.label,
    }
}
