use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixture::exprel;

/// Per-interval ELP coefficients of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElpCoeffs {
    /// `exp(-int gamma / b)` over the interval.
    pub phi: f64,
    /// Gain applied to the frozen correction.
    pub psi: f64,
    /// Variance of the injected Gaussian increment.
    pub noise_var: f64,
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")))
    }
}

/// Closed-form ELP coefficients on `[t_n, t_np1]` for the linear part
/// `b(t) = sigma_under + A lambda (T - t) / T`.
///
/// With `p = gamma T / (A lambda)` and `L = log(b(t_n) / b(t_np1))`:
/// `phi = e^(-pL)`, `psi = p b(t_np1) L exprel((1-p)L)` and
/// `noise_var = 2p b(t_np1) L exprel((1-2p)L)`.
pub fn elp_coeffs(
    t_n: f64,
    t_np1: f64,
    sigma_under: f64,
    lambda: f64,
    gamma: f64,
    horizon: f64,
    amplitude: f64,
) -> Result<ElpCoeffs> {
    non_negative("t_n", t_n)?;
    non_negative("lambda", lambda)?;
    non_negative("gamma", gamma)?;
    non_negative("amplitude", amplitude)?;
    if !(sigma_under > 0.0 && sigma_under.is_finite()) {
        return Err(Error::Domain(format!("sigma_under must be positive, got {sigma_under}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if !(t_np1 > t_n && t_np1 <= horizon * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("need 0 <= t_n < t_np1 <= T, got [{t_n}, {t_np1}]")));
    }
    if gamma == 0.0 {
        return Ok(ElpCoeffs {
            phi: 1.0,
            psi: 0.0,
            noise_var: 0.0,
        });
    }
    let h = t_np1 - t_n;
    let spread = amplitude * lambda;
    let p = gamma * horizon / spread;
    if spread == 0.0 || !p.is_finite() {
        let rate = gamma * h / sigma_under;
        return Ok(ElpCoeffs {
            phi: (-rate).exp(),
            psi: -sigma_under * (-rate).exp_m1(),
            noise_var: -sigma_under * (-2.0 * rate).exp_m1(),
        });
    }
    let b1 = sigma_under + spread * (horizon - t_np1) / horizon;
    let l = (spread * h / horizon / b1).ln_1p();
    Ok(ElpCoeffs {
        phi: (-p * l).exp(),
        psi: p * b1 * l * exprel((1.0 - p) * l),
        noise_var: 2.0 * p * b1 * l * exprel((1.0 - 2.0 * p) * l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Defining integrals evaluated by adaptive quadrature, with the inner
    /// integral in closed form only through `int_s^t1 dr / b(r)`, itself
    /// computed by quadrature.
    fn oracle(t0: f64, t1: f64, s: f64, l: f64, g: f64, tt: f64, a: f64) -> ElpCoeffs {
        let b = |t: f64| s + a * l * (tt - t) / tt;
        let inner = |from: f64| integrate(|r| g / b(r), from, t1, 1e-14, 0.0);
        let phi = (-inner(t0)).exp();
        let psi = integrate(|u| g * (-inner(u)).exp(), t0, t1, 1e-12, 0.0);
        let nv = integrate(|u| 2.0 * g * (-2.0 * inner(u)).exp(), t0, t1, 1e-12, 0.0);
        ElpCoeffs { phi, psi, noise_var: nv }
    }

    #[test]
    fn reference_interval() {
        let c = elp_coeffs(0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(c.phi, 0.75, max_relative = 1e-15);
        assert_relative_eq!(c.psi, 1.5 * (4f64 / 3.0).ln(), max_relative = 1e-14);
        assert_relative_eq!(c.psi, 0.431523, max_relative = 1e-6);
        assert_relative_eq!(c.noise_var, 0.75, max_relative = 1e-14);
    }

    #[test]
    fn constant_coefficient_limit() {
        let c = elp_coeffs(0.0, 0.5, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(c.phi, (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(c.psi, 0.393469340287, max_relative = 1e-11);
        assert_relative_eq!(c.noise_var, 0.632120558829, max_relative = 1e-11);
        let tiny = elp_coeffs(0.0, 0.5, 1.0, 1e-300, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(tiny.phi, c.phi, max_relative = 1e-12);
    }

    #[test]
    fn frozen_coordinate() {
        let c = elp_coeffs(0.2, 0.7, 2.0, 3.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(c, ElpCoeffs { phi: 1.0, psi: 0.0, noise_var: 0.0 });
    }

    #[test]
    fn domain_errors() {
        assert!(elp_coeffs(0.0, 0.5, 1.0, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(elp_coeffs(0.0, 0.5, 1.0, 1.0, -1.0, 1.0, 1.0).is_err());
        assert!(elp_coeffs(0.0, 0.5, 0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(elp_coeffs(0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(elp_coeffs(0.5, 1.5, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn oracle_near_singular_exponents() {
        for p in [1.0 - 1e-5, 1.0, 1.0 + 3e-7, 0.5 - 2e-5, 0.5, 0.5 + 1e-8] {
            // p = gamma T / (A lambda) with T = A = lambda = 1.
            let got = elp_coeffs(0.3, 0.9, 0.4, 1.0, p, 1.0, 1.0).unwrap();
            let want = oracle(0.3, 0.9, 0.4, 1.0, p, 1.0, 1.0);
            assert_relative_eq!(got.phi, want.phi, max_relative = 1e-10);
            assert_relative_eq!(got.psi, want.psi, max_relative = 1e-10);
            assert_relative_eq!(got.noise_var, want.noise_var, max_relative = 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn matches_quadrature_oracle(
            s in 1e-3..10.0f64,
            l in 1e-3..10.0f64,
            g in 1e-3..10.0f64,
            tt in 0.1..5.0f64,
            a in 0.5..10.0f64,
            u0 in 0.0..1.0f64,
            frac in 0.01..1.0f64,
        ) {
            let t0 = u0 * tt * 0.99;
            let t1 = t0 + frac * (tt - t0);
            let got = elp_coeffs(t0, t1, s, l, g, tt, a).unwrap();
            let want = oracle(t0, t1, s, l, g, tt, a);
            prop_assert!(got.phi > 0.0 && got.phi <= 1.0);
            prop_assert!(got.psi >= 0.0 && got.noise_var >= 0.0);
            for (x, y) in [(got.phi, want.phi), (got.psi, want.psi), (got.noise_var, want.noise_var)] {
                prop_assert!((x - y).abs() <= 1e-10 * y.abs().max(1e-300), "{x} vs {y}");
            }
        }
    }
}
