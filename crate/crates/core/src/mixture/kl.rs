use serde::Serialize;

use super::scalar::variance_inflation_kl;
use super::MixtureSpec;
use crate::error::{Error, Result};
use crate::spectra::{ExtSum, SpectralSequence};

/// Points per axis of the head-coordinate quadrature grid.
pub const HEAD_GRID_POINTS: usize = 2001;
/// Half-width of the grid in target standard deviations beyond the extreme means.
pub const HEAD_GRID_STDS: f64 = 10.0;

const MAX_HEAD_DIM: usize = 2;

fn check_amplitude(amplitude: f64) -> Result<()> {
    if amplitude.is_finite() && amplitude >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("amplitude must be non-negative, got {amplitude}")))
    }
}

/// Log-density of a low-dimensional diagonal mixture at a point.
struct HeadMixture {
    log_w: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<f64>,
}

impl HeadMixture {
    fn log_density(&self, x: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let logs: Vec<f64> = self
            .log_w
            .iter()
            .zip(&self.means)
            .map(|(lw, m)| {
                let mut l = *lw;
                for ((xj, mj), v) in x.iter().zip(m).zip(&self.vars) {
                    l -= 0.5 * ((xj - mj).powi(2) / v + (2.0 * std::f64::consts::PI * v).ln());
                }
                best = best.max(l);
                l
            })
            .collect();
        best + logs.iter().map(|l| (l - best).exp()).sum::<f64>().ln()
    }
}

fn axis(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let n = HEAD_GRID_POINTS;
    let step = (hi - lo) / (n - 1) as f64;
    ((0..n).map(|i| lo + step * i as f64).collect(), step)
}

fn trapezoid_weight(i: usize) -> f64 {
    if i == 0 || i == HEAD_GRID_POINTS - 1 {
        0.5
    } else {
        1.0
    }
}

/// `KL(target || initial)` at truncation `d` for common-covariance mixtures,
/// split into a quadrature over the mean-support coordinates and a closed
/// form `F(A lambda_j / sigma_j)` for every other coordinate.
pub fn factorized_kl_init(mixture: &MixtureSpec, lambda: &SpectralSequence, amplitude: f64, d: usize) -> Result<f64> {
    check_amplitude(amplitude)?;
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !mixture.covariance_mismatch(d).is_empty() {
        return Err(Error::Unsupported(
            "components do not share a covariance spectrum; use kl_init_upper_bound".into(),
        ));
    }
    let head: Vec<usize> = mixture.mean_support().into_iter().filter(|&j| j <= d).collect();
    if head.len() > MAX_HEAD_DIM {
        return Err(Error::Unsupported(format!(
            "mean support has {} coordinates, at most {MAX_HEAD_DIM} supported",
            head.len()
        )));
    }
    let mut tail = ExtSum::default();
    for j in (1..=d).filter(|j| !head.contains(j)) {
        tail.add(variance_inflation_kl(amplitude * lambda.value(j) / mixture.sigma(0, j)?));
    }
    Ok(head_kl(mixture, lambda, amplitude, &head)? + tail.value())
}

fn head_kl(mixture: &MixtureSpec, lambda: &SpectralSequence, amplitude: f64, head: &[usize]) -> Result<f64> {
    if head.is_empty() {
        return Ok(0.0);
    }
    let sigma: Vec<f64> = head.iter().map(|&j| mixture.sigma(0, j)).collect::<Result<_>>()?;
    let means: Vec<Vec<f64>> = mixture
        .components()
        .iter()
        .map(|c| head.iter().map(|&j| c.mean_at(j)).collect())
        .collect();
    let log_w: Vec<f64> = mixture.components().iter().map(|c| c.weight.ln()).collect();
    let p = HeadMixture {
        log_w: log_w.clone(),
        means: means.clone(),
        vars: sigma.clone(),
    };
    let q = HeadMixture {
        log_w,
        means: means.clone(),
        vars: head
            .iter()
            .zip(&sigma)
            .map(|(&j, s)| s + amplitude * lambda.value(j))
            .collect(),
    };
    let axes: Vec<(Vec<f64>, f64)> = (0..head.len())
        .map(|a| {
            let lo = means.iter().map(|m| m[a]).fold(f64::INFINITY, f64::min);
            let hi = means.iter().map(|m| m[a]).fold(f64::NEG_INFINITY, f64::max);
            let sd = sigma[a].sqrt();
            axis(lo - HEAD_GRID_STDS * sd, hi + HEAD_GRID_STDS * sd)
        })
        .collect();
    let integrand = |x: &[f64]| {
        let lp = p.log_density(x);
        let pd = lp.exp();
        if pd == 0.0 {
            0.0
        } else {
            pd * (lp - q.log_density(x))
        }
    };
    let mut acc = ExtSum::default();
    match axes.as_slice() {
        [(xs, hx)] => {
            for (i, x) in xs.iter().enumerate() {
                acc.add(trapezoid_weight(i) * hx * integrand(&[*x]));
            }
        }
        [(xs, hx), (ys, hy)] => {
            for (i, x) in xs.iter().enumerate() {
                let mut row = ExtSum::default();
                for (k, y) in ys.iter().enumerate() {
                    row.add(trapezoid_weight(k) * integrand(&[*x, *y]));
                }
                acc.add(trapezoid_weight(i) * hx * hy * row.value());
            }
        }
        _ => unreachable!("head dimension checked"),
    }
    Ok(acc.value().max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitKlBounds {
    /// `(1/2) sum_i w_i sum_j f(A lambda_j / sigma_ij)`, `f(r) = log(1+r) - r/(1+r)`.
    pub exact_form: f64,
    /// `(1/4) sum_i w_i sum_j (A lambda_j / sigma_ij)^2`.
    pub quadratic_form: f64,
}

pub fn kl_init_upper_bound(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    amplitude: f64,
    d: usize,
) -> Result<InitKlBounds> {
    check_amplitude(amplitude)?;
    let mut exact = ExtSum::default();
    let mut quad = ExtSum::default();
    for j in 1..=d {
        let l = lambda.value(j);
        for (i, c) in mixture.components().iter().enumerate() {
            let r = amplitude * l / mixture.sigma(i, j)?;
            // f(r) / 2 = F(r).
            exact.add(c.weight * variance_inflation_kl(r));
            quad.add(0.25 * c.weight * r * r);
        }
    }
    Ok(InitKlBounds {
        exact_form: exact.value(),
        quadratic_form: quad.value(),
    })
}
