//! Experiment configuration, stored as TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ald::mixture::{AnnealingSchedule, Component, MixtureSpec};
use ald::{Scheme, SpectralSequence};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "seed_format")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Truncation dimensions, strictly increasing.
    pub dims: Vec<usize>,
    pub n_paths: usize,
    pub schemes: Vec<Scheme>,
    pub lambda: SpectralSequence,
    pub gamma: SpectralSequence,
    pub mixture: MixtureConfig,
    pub schedule: ScheduleConfig,
    pub kl: KlConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub components: Vec<ComponentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    /// Sparse mean keyed by 1-based coordinate, e.g. `mean = { 1 = 8.0 }`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mean: BTreeMap<String, f64>,
    pub sigma: SpectralSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub horizon: f64,
    /// `theta(t) = amplitude (T - t) / T`.
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    /// Explicit mesh, used instead of `n_steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlConfig {
    pub k_list: Vec<usize>,
    pub n_target_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Dimension of the variance profile and stability run; defaults to the largest of `dims`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_dim: Option<usize>,
    /// Tolerance for the horizon `T_eps`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Truncations for condition reports; defaults to `dims`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub condition_dims: Vec<usize>,
}

fn default_epsilon() -> f64 {
    0.01
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            profile_dim: None,
            epsilon: default_epsilon(),
            condition_dims: Vec::new(),
        }
    }
}

/// TOML integers are signed, so seeds above `i64::MAX` are written as strings.
mod seed_format {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => u64::try_from(v).map_err(|_| de::Error::custom("seed must be non-negative")),
            Raw::Str(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// Model objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mixture: MixtureSpec,
    pub schedule: AnnealingSchedule,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}

fn strictly_increasing(name: &str, v: &[usize]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    if v[0] == 0 {
        return Err(invalid(format!("{name} must be at least 1")));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn profile_dim(&self) -> usize {
        self.analysis.profile_dim.unwrap_or(*self.dims.last().unwrap_or(&1))
    }

    pub fn condition_dims(&self) -> &[usize] {
        if self.analysis.condition_dims.is_empty() {
            &self.dims
        } else {
            &self.analysis.condition_dims
        }
    }

    pub fn mixture_spec(&self) -> Result<MixtureSpec> {
        let mut components = Vec::with_capacity(self.mixture.components.len());
        for (i, c) in self.mixture.components.iter().enumerate() {
            let mut mean = Vec::with_capacity(c.mean.len());
            for (k, v) in &c.mean {
                let j: usize = k
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("component {i}: mean key {k:?} is not a coordinate index")))?;
                mean.push((j, *v));
            }
            components.push(Component::new(c.weight, mean, c.sigma.clone()));
        }
        MixtureSpec::new(components).map_err(|e| invalid(e.to_string()))
    }

    pub fn schedule(&self) -> Result<AnnealingSchedule> {
        let s = &self.schedule;
        let built = match (s.n_steps, &s.mesh) {
            (Some(_), Some(_)) => return Err(invalid("schedule: give n_steps or mesh, not both")),
            (None, None) => return Err(invalid("schedule: n_steps or mesh is required")),
            (Some(0), None) => return Err(invalid("schedule: n_steps must be at least 1")),
            (Some(n), None) => AnnealingSchedule::uniform(s.horizon, s.amplitude, n),
            (None, Some(mesh)) => AnnealingSchedule::with_mesh(s.horizon, s.amplitude, mesh.clone()),
        };
        built.map_err(|e| invalid(format!("schedule: {e}")))
    }

    /// Checks every field and builds the model objects.
    pub fn validate(&self) -> Result<Resolved> {
        strictly_increasing("dims", &self.dims)?;
        if !self.analysis.condition_dims.is_empty() {
            strictly_increasing("analysis.condition_dims", &self.analysis.condition_dims)?;
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes must not be empty"));
        }
        if self.schemes.iter().collect::<BTreeSet<_>>().len() != self.schemes.len() {
            return Err(invalid("schemes must not repeat"));
        }
        if self.kl.k_list.is_empty() {
            return Err(invalid("kl.k_list must not be empty"));
        }
        for &k in &self.kl.k_list {
            if k == 0 || k >= self.kl.n_target_samples || k > self.n_paths {
                return Err(invalid(format!(
                    "k={k} needs 1 <= k < n_target_samples ({}) and k <= n_paths ({})",
                    self.kl.n_target_samples, self.n_paths
                )));
            }
        }
        if !(self.analysis.epsilon > 0.0) {
            return Err(invalid("analysis.epsilon must be positive"));
        }
        if self.analysis.profile_dim == Some(0) {
            return Err(invalid("analysis.profile_dim must be at least 1"));
        }
        let mixture = self.mixture_spec()?;
        let schedule = self.schedule()?;
        Ok(Resolved { mixture, schedule })
    }

    /// The desk-scale two-mode experiment: `0.75 N(0,S) + 0.25 N(8e_1,S)`,
    /// `sigma = lambda = j^-6`, `gamma = j^-4`, amplitude 10, 2500 steps of 1e-3.
    pub fn desk_experiment() -> Self {
        let pl = |a: f64| SpectralSequence::PowerLaw { exponent: a, scale: 1.0 };
        Self {
            seed: 20_240_601,
            output_dir: None,
            dims: vec![1, 5, 10, 20, 30, 40, 50, 60],
            n_paths: 800,
            schemes: vec![Scheme::Em, Scheme::Elp],
            lambda: pl(6.0),
            gamma: pl(4.0),
            mixture: MixtureConfig {
                components: vec![
                    ComponentConfig {
                        weight: 0.75,
                        mean: BTreeMap::new(),
                        sigma: pl(6.0),
                    },
                    ComponentConfig {
                        weight: 0.25,
                        mean: BTreeMap::from([("1".to_string(), 8.0)]),
                        sigma: pl(6.0),
                    },
                ],
            },
            schedule: ScheduleConfig {
                horizon: 2.5,
                amplitude: 10.0,
                n_steps: Some(2500),
                mesh: None,
            },
            kl: KlConfig {
                k_list: vec![10, 20, 30, 50],
                n_target_samples: 800,
            },
            analysis: AnalysisConfig {
                profile_dim: Some(50),
                epsilon: 0.01,
                condition_dims: Vec::new(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut c = ExperimentConfig::desk_experiment();
        c.lambda = SpectralSequence::PowerSum {
            head: vec![1.0],
            terms: vec![ald::spectra::PowerTerm::new(1.0, 6.0), ald::spectra::PowerTerm::new(0.1, 12.0)],
        };
        c.schedule.amplitude = 0.1 + 0.2;
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        c.seed = u64::MAX;
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap().seed, u64::MAX);
    }

    #[test]
    fn shipped_configs_parse() {
        for name in ["desk_experiment.toml", "perturbed_covariance.toml"] {
            let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
            let c = ExperimentConfig::load(&path).unwrap();
            c.validate().unwrap();
        }
        let shipped = ExperimentConfig::load(
            &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk_experiment.toml"),
        )
        .unwrap();
        assert_eq!(shipped, ExperimentConfig::desk_experiment());
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let ok = ExperimentConfig::desk_experiment();
        assert!(ok.validate().is_ok());
        let reject = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = ok.clone();
            f(&mut c);
            assert!(matches!(c.validate(), Err(HarnessError::Validation(_))));
        };
        reject(&|c| c.dims = vec![5, 5, 10]);
        reject(&|c| c.dims = vec![10, 5]);
        reject(&|c| c.dims = vec![]);
        reject(&|c| c.n_paths = 0);
        reject(&|c| c.schedule.horizon = 0.0);
        reject(&|c| c.schedule.n_steps = Some(0));
        reject(&|c| c.schedule.mesh = Some(vec![0.0, 2.5]));
        reject(&|c| c.mixture.components[0].weight = 0.5);
        reject(&|c| c.kl.k_list = vec![800]);
        reject(&|c| c.kl.k_list = vec![0]);
        reject(&|c| c.schemes = vec![Scheme::Em, Scheme::Em]);
        reject(&|c| c.mixture.components[1].mean = BTreeMap::from([("x".into(), 1.0)]));
    }

    #[test]
    fn explicit_mesh_and_unknown_keys() {
        let mut c = ExperimentConfig::desk_experiment();
        c.schedule.n_steps = None;
        c.schedule.mesh = Some(vec![0.0, 1.0, 2.5]);
        assert_eq!(c.validate().unwrap().schedule.h_max(), 1.5);
        let text = ExperimentConfig::desk_experiment().to_toml().replace("n_paths", "n_path");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
