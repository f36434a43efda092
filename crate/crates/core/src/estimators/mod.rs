//! Divergence and moment estimators for sample ensembles.

mod knn;

pub use knn::{knn_kl, KnnKlEstimate, DISTANCE_FLOOR};

use serde::Serialize;

use crate::ensemble::TrajectoryEnsemble;
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;

/// `sum_i w_i (sigma_ij + m_ij^2) - (sum_i w_i m_ij)^2`.
pub fn target_marginal_variance(mixture: &MixtureSpec, j: usize) -> Result<f64> {
    let mut second = 0.0;
    let mut first = 0.0;
    for (i, c) in mixture.components().iter().enumerate() {
        let m = c.mean_at(j);
        second += c.weight * (mixture.sigma(i, j)? + m * m);
        first += c.weight * m;
    }
    Ok(second - first * first)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceProfile {
    /// Empirical variance over target variance, `j = 1..d`.
    pub normalized: Vec<f64>,
    pub excluded_paths: usize,
}

/// Per-coordinate empirical variance of the unflagged paths, normalized by the
/// target marginal variance.
pub fn variance_profile(ensemble: &TrajectoryEnsemble, mixture: &MixtureSpec) -> Result<VarianceProfile> {
    let excluded = ensemble.overflow_count();
    let kept = ensemble.n_paths() - excluded;
    if kept == 0 {
        return Err(Error::Estimation("every path is flagged".into()));
    }
    if kept < 2 {
        return Err(Error::Estimation("need at least two unflagged paths".into()));
    }
    let normalized = ensemble
        .moments()
        .into_iter()
        .map(|m| Ok(m.variance / target_marginal_variance(mixture, m.j)?))
        .collect::<Result<_>>()?;
    Ok(VarianceProfile {
        normalized,
        excluded_paths: excluded,
    })
}
