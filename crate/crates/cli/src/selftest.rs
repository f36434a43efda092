//! Quick numerical checks of the closed forms against independent references.

use std::path::Path;

use ald::mixture::{bimodal_tail_variance, sample_target};
use ald::ode::{dopri5_scalar, rk4_scalar};
use ald::quadrature::integrate;
use ald::{elp_coeffs, variance_profile, Component, MixtureSpec, SpectralSequence};
use serde::Serialize;

use crate::error::Result;
use crate::manifest::{RunManifest, RunOutput};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub worst_error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct SelfTest {
    pub checks: Vec<Check>,
    pub manifest: RunManifest,
}

impl SelfTest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, worst_error: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        passed: worst_error <= tolerance,
        worst_error,
        tolerance,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn coeff_check() -> Result<Check> {
    let cases = [
        (0.0, 1e-3, 1e-6, 1e-6, 1e-4, 2.5, 10.0),
        (1.2, 1.3, 0.5, 0.2, 0.8, 2.0, 3.0),
        (0.4, 0.45, 1.0, 1.0, 0.25, 1.0, 4.0),
        (0.1, 0.3, 0.2, 0.05, 0.3, 1.0, 2.0),
        (0.0, 0.5, 1.0, 0.0, 1.0, 1.0, 1.0),
    ];
    let mut worst = 0.0f64;
    for (t0, t1, s, l, g, tt, a) in cases {
        let c = elp_coeffs(t0, t1, s, l, g, tt, a)?;
        let b = |t: f64| s + a * l * (tt - t) / tt;
        let inner = |from: f64| integrate(|r| g / b(r), from, t1, 1e-14, 0.0);
        let phi = (-inner(t0)).exp();
        let psi = integrate(|u| g * (-inner(u)).exp(), t0, t1, 1e-12, 0.0);
        let nv = integrate(|u| 2.0 * g * (-2.0 * inner(u)).exp(), t0, t1, 1e-12, 0.0);
        worst = worst.max(rel(c.phi, phi)).max(rel(c.psi, psi)).max(rel(c.noise_var, nv));
    }
    Ok(check("elp coefficients vs nested quadrature", worst, 1e-8))
}

fn gaussian_variance_check() -> Result<Check> {
    // For a single Gaussian the ELP step is exact in law, so the propagated
    // variance must follow the moment ODE.
    let (s, l, g, tt, a, n) = (0.3, 0.2, 0.7, 1.0, 5.0, 8);
    let h = tt / n as f64;
    let mut p = s + a * l;
    for i in 0..n {
        let c = elp_coeffs(i as f64 * h, (i + 1) as f64 * h, s, l, g, tt, a)?;
        p = c.phi * c.phi * p + c.noise_var;
    }
    let b = |t: f64| s + a * l * (tt - t) / tt;
    let reference = rk4_scalar(|t, y| 2.0 * g * (1.0 - y / b(t)), 0.0, s + a * l, tt, 20_000);
    Ok(check("exact Gaussian variance vs RK4", rel(p, reference), 1e-8))
}

fn tail_variance_check() -> Check {
    let mut worst = 0.0f64;
    for &(s, l, g) in &[(1.0, 1.0, 1.0), (1e-3, 1e-3, 1e-2), (0.5, 2.0, 0.1), (2.0, 0.1, 3.0)] {
        let (tt, a) = (2.5, 10.0);
        let b = |t: f64| s + a * l * (tt - t) / tt;
        let reference = dopri5_scalar(|t, y| 2.0 * g * (1.0 - y / b(t)), 0.0, s + a * l, tt, 1e-12, 1e-14);
        worst = worst.max(rel(bimodal_tail_variance(s, l, g, tt, a), reference));
    }
    check("tail variance closed form vs Dormand-Prince", worst, 1e-8)
}

fn exact_profile_check(seed: u64) -> Result<Check> {
    let sigma = SpectralSequence::power_law(2.0, 1.0)?;
    let mixture = MixtureSpec::new(vec![
        Component::new(0.5, [(1, -1.0)], sigma.clone()),
        Component::new(0.5, [(1, 1.0)], sigma),
    ])?;
    let ens = sample_target(&mixture, 5, 20_000, seed)?;
    let worst = variance_profile(&ens, &mixture)?
        .normalized
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(check("exact-target variance profile near 1", worst, 0.05))
}

pub fn run_selftest(seed: u64, config_hash: String, dir: &Path) -> Result<SelfTest> {
    let mut out = RunOutput::open(dir, "selftest", config_hash)?;
    out.record_substream("target", seed, 20_000, "exact-target control samples");
    let checks = vec![
        coeff_check()?,
        gaussian_variance_check()?,
        tail_variance_check(),
        exact_profile_check(seed)?,
    ];
    out.write_json("selftest.json", &checks)?;
    Ok(SelfTest {
        checks,
        manifest: out.finish()?,
    })
}
