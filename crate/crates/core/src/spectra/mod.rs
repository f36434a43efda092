//! Coefficient sequences, summability conditions and preconditioner design rules.

mod asymptotic;
mod conditions;
mod sequence;

pub use conditions::{
    envelope, eval_conditions, write_conditions_csv, ConditionEntry, ConditionId, ConditionReport, Envelope, Verdict,
    CONDITIONS_CSV_HEADER,
};
pub use sequence::{PowerTerm, SpectralSequence, TailRule};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;

/// Double-double accumulator. Adding non-negative terms never decreases
/// [`ExtSum::value`], which keeps partial sums monotone in `d`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtSum {
    hi: f64,
    lo: f64,
}

impl ExtSum {
    pub fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        let lo = self.lo + err;
        self.hi = s + lo;
        self.lo = lo - (self.hi - s);
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

impl FromIterator<f64> for ExtSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExtSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `K_d = (1/16) sum_i w_i sum_{j<=d} (lambda_j / gamma_j) log(1 + lambda_j / sigma_ij)`,
/// the continuous-time annealing constant. Non-decreasing in `d`.
pub fn annealing_constant_kd(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    d: usize,
) -> f64 {
    let sum: ExtSum = (1..=d)
        .map(|j| {
            let (l, g) = (lambda.value(j), gamma.value(j));
            mixture
                .components()
                .iter()
                .map(|c| c.weight * (l / g) * (l / c.sigma.value(j)).ln_1p())
                .sum::<f64>()
        })
        .collect();
    sum.value() / 16.0
}

/// Horizon `T_eps = sup_d K_d / eps` guaranteeing annealing bias at most `eps`.
pub fn horizon_for_tolerance(k_sup: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {eps}")));
    }
    Ok(k_sup / eps)
}

/// Discretization part of the ELP bound. The constant is not computable, so it
/// is carried symbolically as `C_disc * growth * h_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscretizationTerm {
    pub h_max: f64,
    pub horizon: f64,
    /// `1 + T^2`.
    pub growth: f64,
}

impl std::fmt::Display for DiscretizationTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C_disc * {} * {}", self.growth, self.h_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElpBound {
    /// `(1 / 8T) sum_{j<=d} lambda_j^2 / (gamma_j sigma_under_j)`.
    pub annealing_term: f64,
    pub discretization: DiscretizationTerm,
}

pub fn elp_bound_terms(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    d: usize,
    horizon: f64,
    h_max: f64,
) -> Result<ElpBound> {
    if !(horizon > 0.0) || !(h_max > 0.0) {
        return Err(Error::Domain("horizon and step must be positive".into()));
    }
    let sum: ExtSum = (1..=d)
        .map(|j| {
            let su = envelope(mixture, j).expect("validated mixture").sigma_under;
            let l = lambda.value(j);
            l * l / (gamma.value(j) * su)
        })
        .collect();
    Ok(ElpBound {
        annealing_term: sum.value() / (8.0 * horizon),
        discretization: DiscretizationTerm {
            h_max,
            horizon,
            growth: 1.0 + horizon * horizon,
        },
    })
}

/// Open interval of preconditioner exponents `c` (with `gamma_j ~ j^-c`) for which
/// the ELP conditions hold under `sigma_j ~ j^-a`, `lambda_j ~ j^-b` and a
/// common-covariance tail. `None` when the interval is empty.
pub fn power_law_admissible_range(a: f64, b: f64) -> Result<Option<(f64, f64)>> {
    if !(a > 1.0) || !(b >= a) || !b.is_finite() {
        return Err(Error::Domain(format!("need a > 1 and b >= a, got a={a}, b={b}")));
    }
    let lo = f64::max(1.0, (a + 1.0) / 2.0);
    let hi = 2.0 * b - a - 1.0;
    Ok((lo < hi).then_some((lo, hi)))
}

/// Preconditioner `gamma_j = lambda_j^(2/3)` equalizing the per-coordinate
/// annealing and discretization contributions.
pub fn balanced_preconditioner(lambda: &SpectralSequence) -> SpectralSequence {
    const P: f64 = 2.0 / 3.0;
    match lambda {
        SpectralSequence::PowerLaw { exponent, scale } => SpectralSequence::PowerLaw {
            exponent: exponent * 2.0 / 3.0,
            scale: scale.powf(P),
        },
        SpectralSequence::Explicit { values, tail } => SpectralSequence::Explicit {
            values: values.iter().map(|v| v.powf(P)).collect(),
            tail: match tail {
                TailRule::Repeat => TailRule::Repeat,
                TailRule::Exponent(a) => TailRule::Exponent(a * 2.0 / 3.0),
            },
        },
        other => SpectralSequence::Powered {
            base: Box::new(other.clone()),
            power: P,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(a: f64, s: f64) -> SpectralSequence {
        SpectralSequence::power_law(a, s).unwrap()
    }

    #[test]
    fn admissible_range_examples() {
        assert_eq!(power_law_admissible_range(6.0, 6.0).unwrap(), Some((3.5, 5.0)));
        assert_eq!(power_law_admissible_range(2.0, 2.0).unwrap(), None);
        assert!(power_law_admissible_range(1.0, 2.0).is_err());
        assert!(power_law_admissible_range(3.0, 2.0).is_err());
    }

    #[test]
    fn equal_exponents_need_a_above_three() {
        for a in [1.5, 2.0, 2.9, 3.0, 3.0001, 3.5, 6.0, 9.0] {
            let nonempty = power_law_admissible_range(a, a).unwrap().is_some();
            assert_eq!(nonempty, a > 3.0, "a={a}");
        }
    }

    #[test]
    fn balanced_examples() {
        assert_eq!(balanced_preconditioner(&pl(6.0, 1.0)), pl(4.0, 1.0));
        assert_eq!(balanced_preconditioner(&pl(0.0, 1.0)), pl(0.0, 1.0));
        let g = balanced_preconditioner(&pl(3.0, 8.0));
        match g {
            SpectralSequence::PowerLaw { exponent, scale } => {
                assert!((exponent - 2.0).abs() < 1e-15);
                assert!((scale - 4.0).abs() < 1e-14);
            }
            _ => panic!("expected power law"),
        }
    }

    #[test]
    fn balanced_choice_equalizes_terms() {
        let lambdas = [
            pl(6.0, 1.0),
            pl(2.5, 3.0),
            SpectralSequence::explicit(vec![0.3, 2.0, 0.01], TailRule::Exponent(4.0)).unwrap(),
            SpectralSequence::power_sum(vec![], vec![PowerTerm::new(1.0, 3.0), PowerTerm::new(0.5, 5.0)]).unwrap(),
        ];
        let sigma = SpectralSequence::explicit(vec![0.7, 0.02, 1.3, 0.4], TailRule::Exponent(3.0)).unwrap();
        for lam in &lambdas {
            let g = balanced_preconditioner(lam);
            for j in 1..40 {
                let (l, g, s) = (lam.value(j), g.value(j), sigma.value(j));
                let drift = g * g / s;
                let anneal = l * l / (g * s);
                let target = l.powf(4.0 / 3.0) / s;
                assert!((drift / target - 1.0).abs() < 1e-12);
                assert!((anneal / target - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kd_single_term_and_vanishing_smoothing() {
        let m = MixtureSpec::single(vec![], pl(0.0, 1.0)).unwrap();
        let k = annealing_constant_kd(&m, &pl(0.0, 1.0), &pl(0.0, 1.0), 1);
        assert!((k - 2f64.ln() / 16.0).abs() < 1e-16);
        let mut prev = f64::INFINITY;
        for scale in [1e-1, 1e-3, 1e-6, 1e-9] {
            let k = annealing_constant_kd(&m, &pl(2.0, scale), &pl(0.0, 1.0), 50);
            assert!(k < prev);
            prev = k;
        }
        assert!(prev < 1e-17);
    }

    #[test]
    fn elp_bound_single_term() {
        let m = MixtureSpec::single(vec![], pl(0.0, 1.0)).unwrap();
        let b = elp_bound_terms(&m, &pl(0.0, 1.0), &pl(0.0, 1.0), 1, 1.0, 0.1).unwrap();
        assert_eq!(b.annealing_term, 0.125);
        assert_eq!(b.discretization.growth, 2.0);
        let far = elp_bound_terms(&m, &pl(0.0, 1.0), &pl(0.0, 1.0), 1, 1e12, 0.1).unwrap();
        assert!(far.annealing_term < 1e-12);
        assert!(elp_bound_terms(&m, &pl(0.0, 1.0), &pl(0.0, 1.0), 1, 0.0, 0.1).is_err());
    }

    #[test]
    fn horizon_rejects_nonpositive_tolerance() {
        assert!(horizon_for_tolerance(1.0, 0.0).is_err());
        assert_eq!(horizon_for_tolerance(0.5, 0.25).unwrap(), 2.0);
    }

    #[test]
    fn extsum_is_accurate() {
        let s: ExtSum = std::iter::once(1.0).chain(std::iter::repeat(1e-17).take(1000)).collect();
        assert!((s.value() - (1.0 + 1e-14)).abs() < 1e-16);
    }
}
