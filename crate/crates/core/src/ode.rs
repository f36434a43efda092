//! Scalar ODE integrators used as independent references for closed forms.

/// Classical fixed-step RK4 for `y' = f(t, y)` on `[t0, t1]`.
pub fn rk4_scalar(f: impl Fn(f64, f64) -> f64, t0: f64, y0: f64, t1: f64, steps: usize) -> f64 {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Adaptive Dormand-Prince 5(4) with mixed absolute/relative error control.
pub fn dopri5_scalar(f: impl Fn(f64, f64) -> f64, t0: f64, y0: f64, t1: f64, rtol: f64, atol: f64) -> f64 {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let mut h = span / 100.0;
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        let mut k = [0.0; 7];
        k[0] = f(t, y);
        for s in 0..6 {
            let yi = y + h * (0..=s).map(|m| A[s][m] * k[m]).sum::<f64>();
            k[s + 1] = f(t + C[s] * h, yi);
        }
        let y_new = y + h * (0..6).map(|m| A[5][m] * k[m]).sum::<f64>();
        let err = h * (0..7).map(|m| E[m] * k[m]).sum::<f64>();
        let scale = atol + rtol * y.abs().max(y_new.abs());
        let ratio = err.abs() / scale;
        if ratio <= 1.0 {
            t += h;
            y = y_new;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * span {
            h = 1e-14 * span;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let exact = (-3.0f64).exp();
        assert!((rk4_scalar(|_, y| -y, 0.0, 1.0, 3.0, 3000) - exact).abs() < 1e-12);
        assert!((dopri5_scalar(|_, y| -y, 0.0, 1.0, 3.0, 1e-12, 1e-14) / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = 2t, y(0) = 0
        assert!((dopri5_scalar(|t, _| 2.0 * t, 0.0, 0.0, 2.0, 1e-12, 1e-14) - 4.0).abs() < 1e-10);
    }
}
