/// `(e^z - 1) / z`, continuous at zero.
pub(crate) fn exprel(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// `F(u) = (log(1+u) - u/(1+u)) / 2`, the relative entropy of `N(0, s)` from
/// `N(0, s(1+u))`.
pub fn variance_inflation_kl(u: f64) -> f64 {
    if u < 1e-4 {
        // log(1+u) - u/(1+u) = u^2/2 - 2u^3/3 + 3u^4/4 - ...
        return 0.5 * u * u * (0.5 - u * (2.0 / 3.0 - 0.75 * u));
    }
    0.5 * (u.ln_1p() - u / (1.0 + u))
}

/// `Psi(alpha, r) = int_1^{1+r} u^(-alpha) du`, stable across `alpha = 1`.
pub fn psi(alpha: f64, r: f64) -> f64 {
    let l = r.ln_1p();
    l * exprel((1.0 - alpha) * l)
}

/// Terminal variance of a Gaussian tail coordinate evolving under the annealed
/// dynamics, `p' = 2 gamma (1 - p / (sigma + theta(t) lambda))` started from
/// `p(0) = sigma + A lambda`.
pub fn bimodal_tail_variance(sigma: f64, lambda: f64, gamma: f64, horizon: f64, amplitude: f64) -> f64 {
    if lambda == 0.0 {
        return sigma;
    }
    let spread = amplitude * lambda;
    sigma * (1.0 + psi(2.0 * gamma * horizon / spread, spread / sigma))
}
