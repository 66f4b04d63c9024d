//! Output head: scales each 4-vector to unit length so it reads as an
//! attitude quaternion.

use super::tensor::Tensor2;

/// Norms below this are treated as degenerate.
pub const HEAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct HeadCache {
    raw: Tensor2,
    /// per-row norm and the denominator actually used
    norms: Vec<(f64, f64)>,
}

/// Normalizes every row of an `n × 4` tensor. Rows with norm at or below
/// [`HEAD_EPS`] are divided by `norm + HEAD_EPS` instead; the number of such
/// rows is returned as the event count.
pub fn head_normalize(raw: &Tensor2) -> (Tensor2, HeadCache, usize) {
    assert_eq!(raw.cols(), 4, "head expects 4 columns");
    let mut out = raw.clone();
    let mut norms = Vec::with_capacity(raw.rows());
    let mut events = 0;
    for r in 0..raw.rows() {
        let row = out.row_mut(r);
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = if n > HEAD_EPS {
            n
        } else {
            events += 1;
            n + HEAD_EPS
        };
        row.iter_mut().for_each(|v| *v /= s);
        norms.push((n, s));
    }
    (out, HeadCache { raw: raw.clone(), norms }, events)
}

/// Gradient of the normalization with respect to the raw rows.
pub fn head_backward(cache: &HeadCache, dq: &Tensor2) -> Tensor2 {
    let mut dx = Tensor2::zeros(dq.rows(), 4);
    for r in 0..dq.rows() {
        let (n, s) = cache.norms[r];
        let raw = cache.raw.row(r);
        let g = dq.row(r);
        let proj = if n > 0.0 {
            raw.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / (n * s * s)
        } else {
            0.0
        };
        for (d, (&x, &gv)) in dx.row_mut(r).iter_mut().zip(raw.iter().zip(g)) {
            *d = gv / s - x * proj;
        }
    }
    dx
}
