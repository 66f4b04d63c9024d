//! Elementwise activations with their derivatives.

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mish: `x · tanh(softplus(x))`.
pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

/// `d mish / dx = tanh(sp) + x · sech²(sp) · σ(x)`.
pub fn mish_grad(x: f64) -> f64 {
    let t = softplus(x).tanh();
    t + x * (1.0 - t * t) * sigmoid(x)
}

pub fn mish_forward(x: &[f64], y: &mut [f64]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o = mish(v);
    }
}

/// `dx = dy · mish'(x)`.
pub fn mish_backward(x: &[f64], dy: &[f64], dx: &mut [f64]) {
    for ((o, &v), &g) in dx.iter_mut().zip(x).zip(dy) {
        *o = g * mish_grad(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mish_values() {
        assert_eq!(mish(0.0), 0.0);
        let m = mish(10.0);
        assert!((9.99..=10.0).contains(&m), "{m}");
        assert!(mish(-50.0).abs() < 1e-15);
        assert!(mish(800.0).is_finite());
    }

    #[test]
    fn mish_gradient_matches_central_difference() {
        for x in [-4.0, -1.3, 0.0, 0.5, 2.2, 7.0] {
            let h = 1e-5;
            let fd = (mish(x + h) - mish(x - h)) / (2.0 * h);
            assert!((fd - mish_grad(x)).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn sigmoid_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
