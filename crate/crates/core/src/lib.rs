//! Preconditioned annealed Langevin sampling of diagonal Gaussian mixtures.
//!
//! Two time discretizations are provided: Euler-Maruyama and an
//! exact-linear-part exponential integrator that integrates the stiff diagonal
//! part of the annealed score exactly. Around them sit the spectral condition
//! checks, stability analysis, samplers and estimators used to compare them.

pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod integrators;
pub mod mixture;
pub mod ode;
pub mod presets;
pub mod quadrature;
pub mod rng;
pub mod spectra;

pub use ensemble::TrajectoryEnsemble;
pub use error::{Error, Result};
pub use estimators::{knn_kl, target_marginal_variance, variance_profile, KnnKlEstimate, VarianceProfile};
pub use integrators::{elp_coeffs, run_chain, stability_report, ElpCoeffs, Scheme, StabilityReport};
pub use mixture::{AnnealingSchedule, Component, MixtureSpec, ScoreSplit};
pub use spectra::{ConditionId, ConditionReport, SpectralSequence, TailRule, Verdict};
