//! Named targets and spectra used by the experiments and tests.

use crate::mixture::{Component, MixtureSpec};
use crate::spectra::{PowerTerm, SpectralSequence};

fn pl(exponent: f64) -> SpectralSequence {
    SpectralSequence::PowerLaw { exponent, scale: 1.0 }
}

/// `0.75 N(0, S) + 0.25 N(8 e_1, S)` with `S = diag(j^-6)`.
pub fn shifted_pair() -> MixtureSpec {
    MixtureSpec::new(vec![
        Component::new(0.75, [], pl(6.0)),
        Component::new(0.25, [(1, 8.0)], pl(6.0)),
    ])
    .expect("valid preset")
}

/// `(1/2) N(a e_1, S) + (1/2) N(-a e_1, S)`.
pub fn symmetric_bimodal(a: f64, sigma: SpectralSequence) -> MixtureSpec {
    MixtureSpec::new(vec![
        Component::new(0.5, [(1, a)], sigma.clone()),
        Component::new(0.5, [(1, -a)], sigma),
    ])
    .expect("valid preset")
}

/// Symmetric pair with covariances `j^-6` and `j^-6 + delta_j`, where
/// `delta_1 = 0` and `delta_j = j^-12` afterwards.
pub fn perturbed_covariance_pair(a: f64) -> MixtureSpec {
    let perturbed = SpectralSequence::PowerSum {
        head: vec![1.0],
        terms: vec![PowerTerm::new(1.0, 6.0), PowerTerm::new(1.0, 12.0)],
    };
    MixtureSpec::new(vec![
        Component::new(0.5, [(1, a)], pl(6.0)),
        Component::new(0.5, [(1, -a)], perturbed),
    ])
    .expect("valid preset")
}

/// Smoothing spectrum `lambda_j = j^-6` of the desk-scale experiment.
pub fn experiment_lambda() -> SpectralSequence {
    pl(6.0)
}

/// Preconditioner `gamma_j = j^-4` of the desk-scale experiment.
pub fn experiment_gamma() -> SpectralSequence {
    pl(4.0)
}

/// Amplitude `2S` with `S = 5`.
pub const EXPERIMENT_AMPLITUDE: f64 = 10.0;
pub const EXPERIMENT_HORIZON: f64 = 2.5;
pub const EXPERIMENT_STEPS: usize = 2500;
pub const EXPERIMENT_DIMS: [usize; 8] = [1, 5, 10, 20, 30, 40, 50, 60];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbed_pair_spectrum() {
        let m = perturbed_covariance_pair(2.0);
        assert_eq!(m.sigma(1, 1).unwrap(), 1.0);
        assert_eq!(m.sigma(1, 2).unwrap(), 2f64.powi(-6) + 2f64.powi(-12));
        assert_eq!(m.covariance_mismatch(4).into_iter().collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn shifted_pair_support() {
        let m = shifted_pair();
        assert_eq!(m.mean_support().into_iter().collect::<Vec<_>>(), vec![1]);
        assert!(m.covariance_mismatch(100).is_empty());
    }
}
