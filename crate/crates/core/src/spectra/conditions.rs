use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use super::asymptotic::{Coef, Tail};
use super::sequence::SpectralSequence;
use super::ExtSum;
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;

/// Summability conditions tracked by [`eval_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ConditionId {
    /// Continuous-time sufficient condition `sum_i w_i sum_j lambda^2 / (gamma sigma_ij)`.
    CtSuff,
    /// EM linear stability, `sup_j gamma_j / sigma_under_j` (a supremum, not a sum).
    EmStab,
    /// Initial-law closeness, `sum_i w_i sum_j lambda^2 / sigma_ij^2`.
    InitKl,
    D1a,
    D1b,
    D1c,
    D2a,
    D2b,
    D2d,
    /// Annealing contribution `sum_j lambda^2 / (gamma sigma_under)`.
    Ann,
}

impl ConditionId {
    pub const ALL: [ConditionId; 10] = [
        ConditionId::CtSuff,
        ConditionId::EmStab,
        ConditionId::InitKl,
        ConditionId::D1a,
        ConditionId::D1b,
        ConditionId::D1c,
        ConditionId::D2a,
        ConditionId::D2b,
        ConditionId::D2d,
        ConditionId::Ann,
    ];

    /// The ELP sufficient conditions.
    pub const ELP: [ConditionId; 7] = [
        ConditionId::D1a,
        ConditionId::D1b,
        ConditionId::D1c,
        ConditionId::D2a,
        ConditionId::D2b,
        ConditionId::D2d,
        ConditionId::Ann,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::CtSuff => "CT-SUFF",
            ConditionId::EmStab => "EM-STAB",
            ConditionId::InitKl => "INIT-KL",
            ConditionId::D1a => "D1A",
            ConditionId::D1b => "D1B",
            ConditionId::D1c => "D1C",
            ConditionId::D2a => "D2A",
            ConditionId::D2b => "D2B",
            ConditionId::D2d => "D2D",
            ConditionId::Ann => "ANN",
        }
    }

    /// Supremum-type condition rather than a series.
    pub fn is_supremum(self) -> bool {
        self == ConditionId::EmStab
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Series converges (for EM-STAB: supremum is bounded).
    Summable,
    Divergent,
    Unknown,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Summable => "summable",
            Verdict::Divergent => "divergent",
            Verdict::Unknown => "unknown",
        }
    }

    /// Human wording. The conditions are only sufficient, so a divergent
    /// series never means the scheme fails.
    pub fn describe(self) -> &'static str {
        match self {
            Verdict::Summable => "condition verified",
            Verdict::Divergent => "condition not verified",
            Verdict::Unknown => "condition not verified (tail unknown)",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    /// Finite sum over `j <= d` (for EM-STAB, the running maximum).
    pub partial_sum: f64,
    /// Net decay exponent `p` of the summand, `term_j ~ j^(-p)`.
    /// `+inf` when the tail vanishes identically.
    pub tail_exponent: Option<f64>,
    pub verdict: Verdict,
    /// Integral bound on the remaining tail, `c d^(1-p) / (p-1)`, when `p > 1`.
    pub tail_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub d: usize,
    pub entries: BTreeMap<ConditionId, ConditionEntry>,
}

impl ConditionReport {
    pub fn get(&self, id: ConditionId) -> &ConditionEntry {
        &self.entries[&id]
    }
}

pub const CONDITIONS_CSV_HEADER: &str = "condition_id,d,partial_sum,tail_exponent,verdict";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat table, one row per (report, condition).
pub fn write_conditions_csv<W: Write>(reports: &[ConditionReport], mut out: W) -> io::Result<()> {
    writeln!(out, "{CONDITIONS_CSV_HEADER}")?;
    for r in reports {
        for (id, e) in &r.entries {
            writeln!(out, "{id},{},{},{},{}", r.d, e.partial_sum, fmt_opt(e.tail_exponent), e.verdict)?;
        }
    }
    Ok(())
}

/// Per-coordinate envelopes of the component covariances and means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub sigma_under: f64,
    pub sigma_over: f64,
    pub m_over: f64,
    pub delta_m: f64,
}

pub fn envelope(mixture: &MixtureSpec, j: usize) -> Result<Envelope> {
    if j == 0 {
        return Err(Error::Domain("coordinate indices start at 1".into()));
    }
    let comps = mixture.components();
    if comps.is_empty() {
        return Err(Error::Config("mixture has no components".into()));
    }
    let mut env = Envelope {
        sigma_under: f64::INFINITY,
        sigma_over: 0.0,
        m_over: 0.0,
        delta_m: 0.0,
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in comps {
        let s = c.sigma.value(j);
        let m = c.mean_at(j);
        env.sigma_under = env.sigma_under.min(s);
        env.sigma_over = env.sigma_over.max(s);
        env.m_over = env.m_over.max(m.abs());
        lo = lo.min(m);
        hi = hi.max(m);
    }
    env.delta_m = hi - lo;
    Ok(env)
}

/// Inputs of every condition at one coordinate (or along the tail).
struct Coords<T> {
    weights: Vec<f64>,
    sigma: Vec<T>,
    sigma_under: T,
    sigma_over: T,
    m_over: T,
    delta_m: T,
    lambda: T,
    gamma: T,
}

impl<T: Coef> Coords<T> {
    fn new(weights: Vec<f64>, sigma: Vec<T>, m_over: T, delta_m: T, lambda: T, gamma: T) -> Self {
        let sigma_under = sigma.iter().cloned().reduce(T::min_of).expect("non-empty mixture");
        let sigma_over = sigma.iter().cloned().reduce(T::max_of).expect("non-empty mixture");
        Self {
            weights,
            sigma,
            sigma_under,
            sigma_over,
            m_over,
            delta_m,
            lambda,
            gamma,
        }
    }

    fn weighted(&self, f: impl Fn(&T) -> T) -> T {
        self.sigma
            .iter()
            .zip(&self.weights)
            .map(|(s, &w)| T::constant(w) * f(s))
            .reduce(|a, b| a + b)
            .expect("non-empty mixture")
    }

    fn term(&self, id: ConditionId) -> T {
        let lam = self.lambda.clone();
        let gam = self.gamma.clone();
        let su = self.sigma_under.clone();
        let spread = self.sigma_over.clone() - su.clone();
        let moment = self.sigma_over.clone() + lam.clone() + self.m_over.sq();
        let su2 = su.sq();
        let su4 = su2.sq();
        match id {
            ConditionId::CtSuff => self.weighted(|s| lam.sq() / (gam.clone() * s.clone())),
            ConditionId::EmStab => gam / su,
            ConditionId::InitKl => self.weighted(|s| lam.sq() / s.sq()),
            ConditionId::D1a => moment,
            ConditionId::D1b => gam.clone() + gam.sq() * moment / su2,
            ConditionId::D1c => gam * (spread.sq() + su2 * self.m_over.sq()) / su4,
            ConditionId::D2a => spread.sq() / su4 * moment + self.delta_m.sq() / su2,
            ConditionId::D2b => {
                lam.clone() * spread.clone() / (su2.clone() * su.clone()) * moment.clone()
                    + gam * lam.sq() * spread.sq() / (su4 * su2) * moment
            }
            ConditionId::D2d => {
                lam.sq() / su2.clone() * (self.delta_m.sq() / su2 + self.m_over.sq() * spread.sq() / su4.clone())
                    + gam * lam.sq() * self.m_over.sq() / su4
            }
            ConditionId::Ann => lam.sq() / (gam * su),
        }
    }
}

fn coords_at(mixture: &MixtureSpec, lambda: &SpectralSequence, gamma: &SpectralSequence, j: usize) -> Coords<f64> {
    let comps = mixture.components();
    let env = envelope(mixture, j).expect("validated mixture");
    Coords::new(
        comps.iter().map(|c| c.weight).collect(),
        comps.iter().map(|c| c.sigma.value(j)).collect(),
        env.m_over,
        env.delta_m,
        lambda.value(j),
        gamma.value(j),
    )
}

/// Tail inputs, or `None` unless every sequence has a power-law expansion.
fn tail_coords(mixture: &MixtureSpec, lambda: &SpectralSequence, gamma: &SpectralSequence) -> Option<Coords<Tail>> {
    let comps = mixture.components();
    if !lambda.is_power_law() || !gamma.is_power_law() || comps.iter().any(|c| !c.sigma.is_power_law()) {
        return None;
    }
    Some(Coords::new(
        comps.iter().map(|c| c.weight).collect(),
        comps.iter().map(|c| Tail::from_expansion(c.sigma.tail_expansion())).collect(),
        // Means have finite support.
        Tail::zero(),
        Tail::zero(),
        Tail::from_expansion(lambda.tail_expansion()),
        Tail::from_expansion(gamma.tail_expansion()),
    ))
}

fn classify(id: ConditionId, tail: &Tail, d: usize) -> (Option<f64>, Verdict, Option<f64>) {
    let lead = match tail.leading() {
        None => return (None, Verdict::Unknown, None),
        Some(l) => l,
    };
    let Some(t) = lead else {
        return (Some(f64::INFINITY), Verdict::Summable, Some(0.0));
    };
    let p = t.exponent;
    if id.is_supremum() {
        let v = if p >= 0.0 { Verdict::Summable } else { Verdict::Divergent };
        return (Some(p), v, None);
    }
    if p > 1.0 {
        let est = t.scale * (d as f64).powf(1.0 - p) / (p - 1.0);
        (Some(p), Verdict::Summable, Some(est))
    } else {
        (Some(p), Verdict::Divergent, None)
    }
}

/// Evaluates every tracked condition at truncation `d`.
///
/// Partial sums are accumulated in ascending `j` with a double-double
/// accumulator. Verdicts are only issued when all sequences have power-law
/// tails; a divergent verdict means "not verified", not "fails".
pub fn eval_conditions(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    d: usize,
) -> Result<ConditionReport> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let mut sums: BTreeMap<ConditionId, ExtSum> = ConditionId::ALL.iter().map(|&id| (id, ExtSum::default())).collect();
    let mut em_sup = 0.0f64;
    for j in 1..=d {
        let c = coords_at(mixture, lambda, gamma, j);
        for id in ConditionId::ALL {
            let v = c.term(id);
            if id.is_supremum() {
                em_sup = em_sup.max(v);
            } else {
                sums.get_mut(&id).expect("all ids present").add(v);
            }
        }
    }
    let tail = tail_coords(mixture, lambda, gamma);
    let entries = ConditionId::ALL
        .iter()
        .map(|&id| {
            let partial_sum = if id.is_supremum() { em_sup } else { sums[&id].value() };
            let (tail_exponent, verdict, tail_estimate) = match &tail {
                Some(t) => classify(id, &t.term(id), d),
                None => (None, Verdict::Unknown, None),
            };
            (
                id,
                ConditionEntry {
                    partial_sum,
                    tail_exponent,
                    verdict,
                    tail_estimate,
                },
            )
        })
        .collect();
    Ok(ConditionReport { d, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn pl(a: f64) -> SpectralSequence {
        SpectralSequence::power_law(a, 1.0).unwrap()
    }

    #[test]
    fn envelope_of_shifted_pair() {
        let m = presets::shifted_pair();
        let e = envelope(&m, 3).unwrap();
        let s = 3f64.powi(-6);
        assert!((e.sigma_under - s).abs() < 1e-18 && (e.sigma_over - s).abs() < 1e-18);
        assert_eq!((e.m_over, e.delta_m), (0.0, 0.0));
        let e1 = envelope(&m, 1).unwrap();
        assert_eq!((e1.m_over, e1.delta_m), (8.0, 8.0));
        assert!(envelope(&m, 0).is_err());
    }

    #[test]
    fn envelope_of_perturbed_pair() {
        let m = presets::perturbed_covariance_pair(2.0);
        let e = envelope(&m, 2).unwrap();
        assert_eq!(e.sigma_under, 2f64.powi(-6));
        assert_eq!(e.sigma_over, 2f64.powi(-6) + 2f64.powi(-12));
        assert_eq!((e.m_over, e.delta_m), (0.0, 0.0));
    }

    #[test]
    fn single_component_envelope_is_degenerate() {
        let m = MixtureSpec::single(vec![(2, 1.5)], pl(2.0)).unwrap();
        let e = envelope(&m, 2).unwrap();
        assert_eq!(e.sigma_under, e.sigma_over);
        assert_eq!(e.delta_m, 0.0);
        assert_eq!(e.m_over, 1.5);
    }

    #[test]
    fn shifted_pair_verdicts() {
        let r = eval_conditions(&presets::shifted_pair(), &pl(6.0), &pl(4.0), 200).unwrap();
        assert_eq!(r.get(ConditionId::Ann).verdict, Verdict::Summable);
        assert_eq!(r.get(ConditionId::Ann).tail_exponent, Some(2.0));
        let em = r.get(ConditionId::EmStab);
        assert_eq!(em.verdict, Verdict::Divergent);
        assert!((em.partial_sum - 200f64.powi(2)).abs() < 1e-6);
        // lambda = sigma makes the initial law drift away from the target.
        assert_eq!(r.get(ConditionId::InitKl).verdict, Verdict::Divergent);
        for id in ConditionId::ELP {
            assert_eq!(r.get(id).verdict, Verdict::Summable, "{id}");
        }
    }

    #[test]
    fn perturbed_pair_satisfies_elp_conditions() {
        let r = eval_conditions(&presets::perturbed_covariance_pair(2.0), &pl(6.0), &pl(4.0), 50).unwrap();
        for id in ConditionId::ELP {
            assert_eq!(r.get(id).verdict, Verdict::Summable, "{id}");
        }
        assert_eq!(r.get(ConditionId::D1c).tail_exponent, Some(4.0));
        assert_eq!(r.get(ConditionId::D2d).tail_exponent, Some(f64::INFINITY));
    }

    #[test]
    fn explicit_inputs_give_unknown() {
        let lam = SpectralSequence::explicit(vec![1.0, 0.5], super::super::TailRule::Repeat).unwrap();
        let r = eval_conditions(&presets::shifted_pair(), &lam, &pl(4.0), 5).unwrap();
        assert!(r.entries.values().all(|e| e.verdict == Verdict::Unknown && e.tail_exponent.is_none()));
    }

    #[test]
    fn csv_has_fixed_header() {
        let r = eval_conditions(&presets::shifted_pair(), &pl(6.0), &pl(4.0), 3).unwrap();
        let mut buf = Vec::new();
        write_conditions_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CONDITIONS_CSV_HEADER));
        assert_eq!(lines.count(), ConditionId::ALL.len());
        let em = text.lines().find(|l| l.starts_with("EM-STAB,3,")).unwrap();
        assert!(em.ends_with(",-2,divergent"), "{em}");
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(eval_conditions(&presets::shifted_pair(), &pl(6.0), &pl(4.0), 0).is_err());
    }
}
