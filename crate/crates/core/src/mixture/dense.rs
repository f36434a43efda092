use std::f64::consts::PI;

use super::{AnnealingSchedule, MixtureSpec};
use crate::error::{Error, Result};
use crate::spectra::SpectralSequence;

/// Mixture and smoothing spectrum materialized at truncation `d`.
///
/// Row-major `k x d` storage; every density is evaluated in log-domain and
/// coordinate-additively.
#[derive(Debug, Clone)]
pub struct DenseMixture {
    d: usize,
    k: usize,
    log_weights: Vec<f64>,
    means: Vec<f64>,
    sigma: Vec<f64>,
    lambda: Vec<f64>,
    sigma_under: Vec<f64>,
}

/// Per-level coefficients of the annealed law at smoothing `theta`.
#[derive(Debug, Clone)]
pub struct AnnealedLevel {
    pub theta: f64,
    /// `1 / b_j` with `b_j = sigma_under_j + theta lambda_j`.
    pub inv_b: Vec<f64>,
    /// `1 / (sigma_ij + theta lambda_j)`, row-major.
    inv_v: Vec<f64>,
    /// `log w_i - (1/2) sum_j log(2 pi v_ij)`.
    log_norm: Vec<f64>,
}

/// Stiff diagonal part and nonlinear correction of the annealed score:
/// `score_j = -inv_b_j x_j + g_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSplit {
    pub inv_b: Vec<f64>,
    pub g: Vec<f64>,
}

impl DenseMixture {
    pub fn new(mixture: &MixtureSpec, lambda: &SpectralSequence, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let k = mixture.len();
        let mut means = vec![0.0; k * d];
        let mut sigma = vec![0.0; k * d];
        for (i, c) in mixture.components().iter().enumerate() {
            for j in 1..=d {
                sigma[i * d + j - 1] = mixture.sigma(i, j)?;
            }
            for (&j, &m) in c.mean.range(1..=d) {
                means[i * d + j - 1] = m;
            }
        }
        let lambda = lambda.values(d);
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Config("smoothing spectrum must be finite and non-negative".into()));
        }
        let sigma_under = (0..d)
            .map(|j| (0..k).map(|i| sigma[i * d + j]).fold(f64::INFINITY, f64::min))
            .collect();
        Ok(Self {
            d,
            k,
            log_weights: mixture.components().iter().map(|c| c.weight.ln()).collect(),
            means,
            sigma,
            lambda,
            sigma_under,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn sigma_under(&self) -> &[f64] {
        &self.sigma_under
    }

    pub fn level(&self, theta: f64) -> AnnealedLevel {
        let (d, k) = (self.d, self.k);
        let inv_b = (0..d).map(|j| 1.0 / (self.sigma_under[j] + theta * self.lambda[j])).collect();
        let mut inv_v = vec![0.0; k * d];
        let mut log_norm = vec![0.0; k];
        for i in 0..k {
            let mut log_det = 0.0;
            for j in 0..d {
                let v = self.sigma[i * d + j] + theta * self.lambda[j];
                inv_v[i * d + j] = 1.0 / v;
                log_det += (2.0 * PI * v).ln();
            }
            log_norm[i] = self.log_weights[i] - 0.5 * log_det;
        }
        AnnealedLevel {
            theta,
            inv_b,
            inv_v,
            log_norm,
        }
    }

    /// `log(w_i phi_i(x))` for every component.
    pub fn log_components(&self, level: &AnnealedLevel, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (i, o) in out.iter_mut().enumerate().take(self.k) {
            let row = i * d;
            let mut q = 0.0;
            for j in 0..d {
                let r = x[j] - self.means[row + j];
                q += r * r * level.inv_v[row + j];
            }
            *o = level.log_norm[i] - 0.5 * q;
        }
    }

    pub fn log_density(&self, level: &AnnealedLevel, x: &[f64]) -> f64 {
        let mut logs = vec![0.0; self.k];
        self.log_components(level, x, &mut logs);
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }

    /// Posterior component probabilities, written into `out` (length `k`).
    pub fn responsibilities_into(&self, level: &AnnealedLevel, x: &[f64], out: &mut [f64]) {
        self.log_components(level, x, out);
        softmax_in_place(out);
    }

    /// Full annealed score given precomputed responsibilities.
    pub fn score_into(&self, level: &AnnealedLevel, x: &[f64], resp: &[f64], out: &mut [f64]) {
        let d = self.d;
        out[..d].fill(0.0);
        for (i, &p) in resp.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = i * d;
            for j in 0..d {
                out[j] -= p * (x[j] - self.means[row + j]) * level.inv_v[row + j];
            }
        }
    }

    /// Nonlinear correction `G(x)` given precomputed responsibilities.
    pub fn correction_into(&self, level: &AnnealedLevel, x: &[f64], resp: &[f64], out: &mut [f64]) {
        let d = self.d;
        out[..d].fill(0.0);
        for (i, &p) in resp.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = i * d;
            for j in 0..d {
                let iv = level.inv_v[row + j];
                out[j] += p * ((level.inv_b[j] - iv) * x[j] + self.means[row + j] * iv);
            }
        }
    }
}

/// Normalizes log-weights into probabilities with max-subtraction.
/// A point where every component underflows gets uniform weights.
pub(crate) fn softmax_in_place(logs: &mut [f64]) {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        let u = 1.0 / logs.len() as f64;
        logs.fill(u);
        return;
    }
    let mut total = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - m).exp();
        total += *l;
    }
    for l in logs.iter_mut() {
        *l /= total;
    }
}

fn prepare(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    schedule: &AnnealingSchedule,
    x: &[f64],
    t: f64,
) -> Result<(DenseMixture, AnnealedLevel)> {
    schedule.check_time(t)?;
    let dense = DenseMixture::new(mixture, lambda, x.len())?;
    let level = dense.level(schedule.theta(t));
    Ok((dense, level))
}

pub fn responsibilities(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    schedule: &AnnealingSchedule,
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let (dense, level) = prepare(mixture, lambda, schedule, x, t)?;
    let mut p = vec![0.0; dense.k];
    dense.responsibilities_into(&level, x, &mut p);
    Ok(p)
}

/// `grad log rho_t(x)` for the annealed mixture.
pub fn annealed_score(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    schedule: &AnnealingSchedule,
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let (dense, level) = prepare(mixture, lambda, schedule, x, t)?;
    let mut p = vec![0.0; dense.k];
    dense.responsibilities_into(&level, x, &mut p);
    let mut out = vec![0.0; x.len()];
    dense.score_into(&level, x, &p, &mut out);
    Ok(out)
}

pub fn score_split(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    schedule: &AnnealingSchedule,
    x: &[f64],
    t: f64,
) -> Result<ScoreSplit> {
    let (dense, level) = prepare(mixture, lambda, schedule, x, t)?;
    let mut p = vec![0.0; dense.k];
    dense.responsibilities_into(&level, x, &mut p);
    let mut g = vec![0.0; x.len()];
    dense.correction_into(&level, x, &p, &mut g);
    Ok(ScoreSplit { inv_b: level.inv_b, g })
}

pub fn annealed_log_density(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    schedule: &AnnealingSchedule,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    let (dense, level) = prepare(mixture, lambda, schedule, x, t)?;
    Ok(dense.log_density(&level, x))
}
