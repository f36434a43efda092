//! Truncated diagonal Gaussian-mixture targets and their annealed laws.

mod dense;
mod kl;
mod sampling;
mod scalar;

pub use dense::{annealed_log_density, annealed_score, responsibilities, score_split, AnnealedLevel, DenseMixture, ScoreSplit};
pub use kl::{factorized_kl_init, kl_init_upper_bound, InitKlBounds, HEAD_GRID_POINTS, HEAD_GRID_STDS};
pub use sampling::{sample_initial, sample_target};
pub use scalar::{bimodal_tail_variance, psi, variance_inflation_kl};
pub(crate) use scalar::exprel;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::SpectralSequence;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub weight: f64,
    /// Sparse mean, coordinate (1-based) to value.
    pub mean: BTreeMap<usize, f64>,
    pub sigma: SpectralSequence,
}

impl Component {
    pub fn new(weight: f64, mean: impl IntoIterator<Item = (usize, f64)>, sigma: SpectralSequence) -> Self {
        Self {
            weight,
            mean: mean.into_iter().collect(),
            sigma,
        }
    }

    pub fn mean_at(&self, j: usize) -> f64 {
        self.mean.get(&j).copied().unwrap_or(0.0)
    }
}

/// Finite mixture `sum_i w_i N(m_i, diag(sigma_i))`, evaluated at any truncation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSpec {
    components: Vec<Component>,
}

impl MixtureSpec {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("mixture has no components".into()));
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return Err(Error::Config(format!("component {i}: weight {} is not a probability", c.weight)));
            }
            total += c.weight;
            for (&j, &m) in &c.mean {
                if j == 0 || !m.is_finite() {
                    return Err(Error::Config(format!("component {i}: invalid mean entry ({j}, {m})")));
                }
            }
            if c.sigma.value(1) <= 0.0 {
                return Err(Error::Config(format!("component {i}: covariance spectrum must be positive")));
            }
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn single(mean: impl IntoIterator<Item = (usize, f64)>, sigma: SpectralSequence) -> Result<Self> {
        Self::new(vec![Component::new(1.0, mean, sigma)])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Covariance `sigma_ij`, checked positive.
    pub fn sigma(&self, i: usize, j: usize) -> Result<f64> {
        let s = self.components[i].sigma.value(j);
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::Config(format!("sigma[{i}][{j}] = {s} is not positive")))
        }
    }

    /// Union of the mean supports.
    pub fn mean_support(&self) -> BTreeSet<usize> {
        self.components.iter().flat_map(|c| c.mean.keys().copied()).collect()
    }

    /// Coordinates `j <= d` where the component covariances differ.
    pub fn covariance_mismatch(&self, d: usize) -> BTreeSet<usize> {
        (1..=d)
            .filter(|&j| {
                let s0 = self.components[0].sigma.value(j);
                self.components.iter().any(|c| c.sigma.value(j) != s0)
            })
            .collect()
    }
}

/// Time horizon, annealing amplitude and mesh.
///
/// The smoothing level is `theta(t) = A (T - t) / T`; `A = 1` is the plain
/// schedule, larger `A` starts from a more strongly smoothed law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealingSchedule {
    horizon: f64,
    amplitude: f64,
    mesh: Vec<f64>,
}

impl AnnealingSchedule {
    pub fn uniform(horizon: f64, amplitude: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Config("need at least one step".into()));
        }
        let mut mesh: Vec<f64> = (0..=n_steps).map(|n| horizon * n as f64 / n_steps as f64).collect();
        mesh[n_steps] = horizon;
        Self::with_mesh(horizon, amplitude, mesh)
    }

    pub fn with_mesh(horizon: f64, amplitude: f64, mesh: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude must be positive, got {amplitude}")));
        }
        if mesh.len() < 2 || mesh[0] != 0.0 || *mesh.last().unwrap() != horizon {
            return Err(Error::Config("mesh must start at 0 and end at the horizon".into()));
        }
        if mesh.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("mesh must be strictly increasing".into()));
        }
        Ok(Self {
            horizon,
            amplitude,
            mesh,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn n_steps(&self) -> usize {
        self.mesh.len() - 1
    }

    pub fn step(&self, n: usize) -> f64 {
        self.mesh[n + 1] - self.mesh[n]
    }

    pub fn h_max(&self) -> f64 {
        self.mesh.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.amplitude * (self.horizon - t) / self.horizon
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if t >= -slack && t <= self.horizon + slack {
            Ok(())
        } else {
            Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(a: f64) -> SpectralSequence {
        SpectralSequence::power_law(a, 1.0).unwrap()
    }

    #[test]
    fn weights_must_sum_to_one() {
        let c = |w| Component::new(w, [], pl(1.0));
        assert!(MixtureSpec::new(vec![c(0.5), c(0.4)]).is_err());
        assert!(MixtureSpec::new(vec![c(0.5), c(0.5)]).is_ok());
        assert!(MixtureSpec::new(vec![c(1.0), c(0.0)]).is_ok());
        assert!(MixtureSpec::new(vec![c(1.5), c(-0.5)]).is_err());
        assert!(MixtureSpec::new(vec![]).is_err());
    }

    #[test]
    fn rejects_bad_means_and_zero_covariance() {
        assert!(MixtureSpec::single([(0, 1.0)], pl(1.0)).is_err());
        assert!(MixtureSpec::single([(1, f64::NAN)], pl(1.0)).is_err());
        assert!(MixtureSpec::single([], SpectralSequence::constant(0.0).unwrap()).is_err());
    }

    #[test]
    fn schedule_endpoints() {
        let s = AnnealingSchedule::uniform(2.5, 10.0, 2500).unwrap();
        assert_eq!(s.theta(0.0), 10.0);
        assert_eq!(s.theta(2.5), 0.0);
        assert_eq!(s.mesh()[0], 0.0);
        assert_eq!(*s.mesh().last().unwrap(), 2.5);
        assert!((s.h_max() - 1e-3).abs() < 1e-15);
        assert!(s.check_time(2.6).is_err());
        assert!(AnnealingSchedule::uniform(1.0, 1.0, 0).is_err());
        assert!(AnnealingSchedule::with_mesh(1.0, 1.0, vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(AnnealingSchedule::with_mesh(1.0, 1.0, vec![0.0, 0.9]).is_err());
        assert!(AnnealingSchedule::uniform(-1.0, 1.0, 3).is_err());
    }
}
