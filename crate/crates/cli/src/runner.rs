//! Experiment runs. Each run writes its artifacts plus one manifest.

use std::collections::BTreeMap;
use std::path::Path;

use ald::integrators::StabilitySummary;
use ald::mixture::{factorized_kl_init, kl_init_upper_bound, sample_target};
use ald::spectra::{
    annealing_constant_kd, balanced_preconditioner, elp_bound_terms, eval_conditions, horizon_for_tolerance,
    power_law_admissible_range, write_conditions_csv,
};
use ald::{knn_kl, run_chain, stability_report, variance_profile, ConditionId, Scheme, SpectralSequence};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::manifest::{RunManifest, RunOutput};
use crate::svg::{LineChart, Series};

/// Normalized variance above which a coordinate counts as blown up.
pub const EXCESS_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlCurveRow {
    pub d: usize,
    pub scheme: Scheme,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub kl_estimate: f64,
    pub floored_count: usize,
    pub overflow_count: usize,
}

#[derive(Debug, Clone)]
pub struct KlCurve {
    pub rows: Vec<KlCurveRow>,
    pub manifest: RunManifest,
}

impl KlCurve {
    pub fn estimate(&self, d: usize, scheme: Scheme, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.d == d && r.scheme == scheme && r.k == k)
            .map(|r| r.kl_estimate)
    }
}

fn stream_log(out: &mut RunOutput, cfg: &ExperimentConfig) {
    out.record_substream("target", cfg.seed, cfg.kl.n_target_samples, "reference samples for the kNN estimator");
    out.record_substream("initial", cfg.seed, cfg.n_paths, "initial states, shared by all schemes");
    out.record_substream("noise", cfg.seed, cfg.n_paths, "driving noise, shared by all schemes");
}

/// KL estimates against exact target samples for every `(d, scheme, k)`.
pub fn run_kl_curve(cfg: &ExperimentConfig, dir: &Path) -> Result<KlCurve> {
    let model = cfg.validate()?;
    let mut out = RunOutput::open(dir, "kl_curve", cfg.hash())?;
    stream_log(&mut out, cfg);
    let mut rows = Vec::new();
    for &d in &cfg.dims {
        let target = sample_target(&model.mixture, d, cfg.kl.n_target_samples, cfg.seed)?;
        for &scheme in &cfg.schemes {
            let ens = run_chain(scheme, &model.mixture, &cfg.lambda, &cfg.gamma, &model.schedule, d, cfg.n_paths, cfg.seed)?;
            for &k in &cfg.kl.k_list {
                let est = knn_kl(&target.samples, &ens.samples, k)?;
                rows.push(KlCurveRow {
                    d,
                    scheme,
                    k,
                    n: est.n,
                    m: est.m,
                    kl_estimate: est.value,
                    floored_count: est.floored_count,
                    overflow_count: ens.overflow_count(),
                });
            }
        }
    }
    out.write_with("kl_curve.csv", |w| {
        writeln!(w, "d,scheme,k,kl_estimate,overflow_count")?;
        for r in &rows {
            writeln!(w, "{},{},{},{},{}", r.d, r.scheme, r.k, r.kl_estimate, r.overflow_count)?;
        }
        Ok(())
    })?;
    out.write_with("knn_estimates.csv", |w| {
        writeln!(w, "d,scheme,k,n,m,value,floored_count")?;
        for r in &rows {
            writeln!(w, "{},{},{},{},{},{},{}", r.d, r.scheme, r.k, r.n, r.m, r.kl_estimate, r.floored_count)?;
        }
        Ok(())
    })?;
    let mut series = Vec::new();
    for &scheme in &cfg.schemes {
        for &k in &cfg.kl.k_list {
            series.push(Series {
                name: format!("{scheme} k={k}"),
                points: rows
                    .iter()
                    .filter(|r| r.scheme == scheme && r.k == k)
                    .map(|r| (r.d as f64, r.kl_estimate))
                    .collect(),
            });
        }
    }
    let chart = LineChart {
        title: "kNN estimate of KL(target || terminal law)".into(),
        x_label: "dimension d".into(),
        y_label: "KL estimate (log scale)".into(),
        log_y: true,
        series,
    };
    out.write_str("kl_curve.svg", &chart.render())?;
    Ok(KlCurve {
        rows,
        manifest: out.finish()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSeries {
    /// `EM`, `ELP` or `target` for the exact-sample control.
    pub scheme: String,
    pub normalized: Vec<f64>,
    pub excluded_paths: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub d: usize,
    /// Onset predicted by the linear stability analysis on the mesh.
    pub predicted_first_unstable_index: Option<usize>,
    /// First coordinate whose EM normalized variance exceeds [`EXCESS_THRESHOLD`].
    pub measured_first_excess_index: Option<usize>,
    pub excess_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct VarianceProfileRun {
    pub series: Vec<ProfileSeries>,
    pub summary: ProfileSummary,
    pub manifest: RunManifest,
}

impl VarianceProfileRun {
    pub fn get(&self, scheme: &str) -> Option<&ProfileSeries> {
        self.series.iter().find(|s| s.scheme == scheme)
    }
}

/// Coordinatewise terminal variance over target variance at one dimension,
/// for each scheme and for an exact-target control ensemble.
pub fn run_variance_profile(cfg: &ExperimentConfig, d: usize, dir: &Path) -> Result<VarianceProfileRun> {
    let model = cfg.validate()?;
    let mut out = RunOutput::open(dir, "variance_profile", cfg.hash())?;
    stream_log(&mut out, cfg);
    let mut series = Vec::new();
    for &scheme in &cfg.schemes {
        let ens = run_chain(scheme, &model.mixture, &cfg.lambda, &cfg.gamma, &model.schedule, d, cfg.n_paths, cfg.seed)?;
        let p = variance_profile(&ens, &model.mixture)?;
        series.push(ProfileSeries {
            scheme: scheme.to_string(),
            normalized: p.normalized,
            excluded_paths: p.excluded_paths,
        });
    }
    let control = sample_target(&model.mixture, d, cfg.n_paths.max(2), cfg.seed)?;
    let p = variance_profile(&control, &model.mixture)?;
    series.push(ProfileSeries {
        scheme: "target".into(),
        normalized: p.normalized,
        excluded_paths: p.excluded_paths,
    });
    let stab = stability_report(&model.mixture, &cfg.lambda, &cfg.gamma, &model.schedule, d)?;
    let summary = ProfileSummary {
        d,
        predicted_first_unstable_index: stab.first_unstable_index,
        measured_first_excess_index: series
            .iter()
            .find(|s| s.scheme == "EM")
            .and_then(|s| s.normalized.iter().position(|v| *v > EXCESS_THRESHOLD).map(|j| j + 1)),
        excess_threshold: EXCESS_THRESHOLD,
    };
    out.write_with("variance_profile.csv", |w| {
        writeln!(w, "scheme,j,normalized_variance,excluded_paths")?;
        for s in &series {
            for (j, v) in s.normalized.iter().enumerate() {
                writeln!(w, "{},{},{},{}", s.scheme, j + 1, v, s.excluded_paths)?;
            }
        }
        Ok(())
    })?;
    out.write_json("variance_profile.json", &summary)?;
    let chart = LineChart {
        title: format!("Terminal variance / target variance, d = {d}"),
        x_label: "coordinate j".into(),
        y_label: "normalized variance (log scale)".into(),
        log_y: true,
        series: series
            .iter()
            .map(|s| Series {
                name: s.scheme.clone(),
                points: s.normalized.iter().enumerate().map(|(j, v)| ((j + 1) as f64, *v)).collect(),
            })
            .collect(),
    };
    out.write_str("variance_profile.svg", &chart.render())?;
    Ok(VarianceProfileRun {
        series,
        summary,
        manifest: out.finish()?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionJson {
    pub partial_sum: f64,
    pub tail_exponent: Option<f64>,
    pub verdict: String,
    pub wording: String,
    pub tail_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionSummary {
    pub d: usize,
    pub conditions: BTreeMap<String, ConditionJson>,
    pub annealing_constant_kd: f64,
    /// `K_d / epsilon`.
    pub horizon_for_epsilon: f64,
    pub elp_annealing_term: f64,
    pub elp_discretization_term: String,
    pub em_stability: StabilitySummary,
    pub init_kl_exact_form: f64,
    pub init_kl_quadratic_form: f64,
    /// Present when the mixture has a common covariance and a small mean support.
    pub factorized_init_kl: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignSummary {
    pub sigma_exponent: f64,
    pub lambda_exponent: f64,
    pub admissible_gamma_exponents: Option<(f64, f64)>,
    pub balanced_gamma: String,
    pub balanced_gamma_exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionsSummary {
    pub epsilon: f64,
    pub dims: Vec<DimensionSummary>,
    pub design: Option<DesignSummary>,
}

#[derive(Debug, Clone)]
pub struct ConditionsRun {
    pub summary: ConditionsSummary,
    pub reports: Vec<ald::ConditionReport>,
    pub manifest: RunManifest,
}

/// Coefficient exponents for the design rules, when every spectrum is a
/// single power law and the covariances share a tail exponent.
pub fn design_summary(cfg: &ExperimentConfig) -> Option<DesignSummary> {
    let single = |s: &SpectralSequence| match s.tail_expansion()?.as_slice() {
        [t] => Some(t.exponent),
        _ => None,
    };
    let b = single(&cfg.lambda)?;
    let mut a = None;
    for c in &cfg.mixture.components {
        let e = c.sigma.tail_exponent()?;
        a = Some(a.map_or(e, |x: f64| x.min(e)));
    }
    let a = a?;
    let gamma = balanced_preconditioner(&cfg.lambda);
    Some(DesignSummary {
        sigma_exponent: a,
        lambda_exponent: b,
        admissible_gamma_exponents: power_law_admissible_range(a, b).ok().flatten(),
        balanced_gamma_exponent: gamma.tail_exponent(),
        balanced_gamma: gamma.to_string(),
    })
}

/// Condition reports and bound ingredients at each requested truncation.
pub fn run_conditions(cfg: &ExperimentConfig, dims: &[usize], dir: &Path) -> Result<ConditionsRun> {
    let model = cfg.validate()?;
    let mut out = RunOutput::open(dir, "conditions", cfg.hash())?;
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    let amplitude = model.schedule.amplitude();
    for &d in dims {
        let report = eval_conditions(&model.mixture, &cfg.lambda, &cfg.gamma, d)?;
        let kd = annealing_constant_kd(&model.mixture, &cfg.lambda, &cfg.gamma, d);
        let bound = elp_bound_terms(&model.mixture, &cfg.lambda, &cfg.gamma, d, model.schedule.horizon(), model.schedule.h_max())?;
        let stab = stability_report(&model.mixture, &cfg.lambda, &cfg.gamma, &model.schedule, d)?;
        let init = kl_init_upper_bound(&model.mixture, &cfg.lambda, amplitude, d)?;
        let conditions = ConditionId::ALL
            .iter()
            .map(|&id| {
                let e = report.get(id);
                (
                    id.as_str().to_string(),
                    ConditionJson {
                        partial_sum: e.partial_sum,
                        tail_exponent: e.tail_exponent,
                        verdict: e.verdict.as_str().to_string(),
                        wording: e.verdict.describe().to_string(),
                        tail_estimate: e.tail_estimate,
                    },
                )
            })
            .collect();
        summaries.push(DimensionSummary {
            d,
            conditions,
            annealing_constant_kd: kd,
            horizon_for_epsilon: horizon_for_tolerance(kd, cfg.analysis.epsilon)?,
            elp_annealing_term: bound.annealing_term,
            elp_discretization_term: bound.discretization.to_string(),
            em_stability: stab.summary(),
            init_kl_exact_form: init.exact_form,
            init_kl_quadratic_form: init.quadratic_form,
            factorized_init_kl: factorized_kl_init(&model.mixture, &cfg.lambda, amplitude, d).ok(),
        });
        reports.push(report);
    }
    out.write_with("conditions.csv", |w| write_conditions_csv(&reports, w))?;
    let summary = ConditionsSummary {
        epsilon: cfg.analysis.epsilon,
        dims: summaries,
        design: design_summary(cfg),
    };
    out.write_json("conditions.json", &summary)?;
    Ok(ConditionsRun {
        summary,
        reports,
        manifest: out.finish()?,
    })
}

#[derive(Debug, Clone)]
pub struct StabilityRun {
    pub report: ald::StabilityReport,
    pub manifest: RunManifest,
}

pub fn run_stability(cfg: &ExperimentConfig, d: usize, dir: &Path) -> Result<StabilityRun> {
    let model = cfg.validate()?;
    let mut out = RunOutput::open(dir, "stability", cfg.hash())?;
    let report = stability_report(&model.mixture, &cfg.lambda, &cfg.gamma, &model.schedule, d)?;
    out.write_with("stability.csv", |w| report.write_csv(w))?;
    out.write_json("stability.json", &report.summary())?;
    Ok(StabilityRun {
        report,
        manifest: out.finish()?,
    })
}

/// Terminal ensembles and their coordinate moments for each scheme.
pub fn run_simulate(cfg: &ExperimentConfig, d: usize, dir: &Path) -> Result<RunManifest> {
    let model = cfg.validate()?;
    let mut out = RunOutput::open(dir, "simulate", cfg.hash())?;
    out.record_substream("initial", cfg.seed, cfg.n_paths, "initial states, shared by all schemes");
    out.record_substream("noise", cfg.seed, cfg.n_paths, "driving noise, shared by all schemes");
    for &scheme in &cfg.schemes {
        let ens = run_chain(scheme, &model.mixture, &cfg.lambda, &cfg.gamma, &model.schedule, d, cfg.n_paths, cfg.seed)?;
        out.write_with(&format!("ensemble_{scheme}_d{d}.csv"), |w| ens.write_csv(w))?;
        out.write_with(&format!("moments_{scheme}_d{d}.csv"), |w| {
            writeln!(w, "j,mean,variance,flagged_paths")?;
            for m in ens.moments() {
                writeln!(w, "{},{},{},{}", m.j, m.mean, m.variance, ens.overflow_count())?;
            }
            Ok(())
        })?;
    }
    out.finish()
}
