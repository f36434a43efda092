use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `scale * j^(-exponent)` of a power-law expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub scale: f64,
    pub exponent: f64,
}

impl PowerTerm {
    pub fn new(scale: f64, exponent: f64) -> Self {
        Self { scale, exponent }
    }

    pub fn eval(&self, j: usize) -> f64 {
        self.scale * (j as f64).powf(-self.exponent)
    }
}

/// How an explicit list is continued past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailRule {
    /// Last value repeated.
    Repeat,
    /// `v_K * (K / j)^a` for `j > K`.
    Exponent(f64),
}

/// A rule producing the non-negative coefficient attached to every coordinate
/// index `j >= 1`. Used for smoothing spectra, preconditioners and component
/// covariance spectra alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpectralSequence {
    /// `scale * j^(-exponent)`.
    PowerLaw { exponent: f64, scale: f64 },
    /// Finite list with a continuation rule.
    Explicit { values: Vec<f64>, tail: TailRule },
    /// Finite sum of power laws, with the first `head.len()` entries overridden.
    PowerSum { head: Vec<f64>, terms: Vec<PowerTerm> },
    /// Pointwise power `base_j^power`.
    Powered {
        base: Box<SpectralSequence>,
        power: f64,
    },
}

fn check_coef(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")))
    }
}

impl SpectralSequence {
    pub fn power_law(exponent: f64, scale: f64) -> Result<Self> {
        check_coef("power-law exponent", exponent)?;
        check_coef("power-law scale", scale)?;
        Ok(Self::PowerLaw { exponent, scale })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::power_law(0.0, value)
    }

    pub fn explicit(values: Vec<f64>, tail: TailRule) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("explicit sequence needs at least one value".into()));
        }
        for &v in &values {
            check_coef("explicit value", v)?;
        }
        if let TailRule::Exponent(a) = tail {
            check_coef("tail exponent", a)?;
        }
        Ok(Self::Explicit { values, tail })
    }

    pub fn power_sum(head: Vec<f64>, terms: Vec<PowerTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("power sum needs at least one term".into()));
        }
        for &v in &head {
            check_coef("power-sum head value", v)?;
        }
        for t in &terms {
            check_coef("power-sum scale", t.scale)?;
            if !t.exponent.is_finite() {
                return Err(Error::Config("power-sum exponent must be finite".into()));
            }
        }
        Ok(Self::PowerSum { head, terms })
    }

    pub fn powered(base: SpectralSequence, power: f64) -> Result<Self> {
        if !power.is_finite() {
            return Err(Error::Config("power must be finite".into()));
        }
        Ok(Self::Powered {
            base: Box::new(base),
            power,
        })
    }

    /// Coefficient at coordinate `j` (1-based).
    ///
    /// # Panics
    /// If `j == 0`.
    pub fn value(&self, j: usize) -> f64 {
        assert!(j >= 1, "coordinate indices start at 1");
        match self {
            Self::PowerLaw { exponent, scale } => scale * (j as f64).powf(-exponent),
            Self::Explicit { values, tail } => {
                let k = values.len();
                if j <= k {
                    values[j - 1]
                } else {
                    match tail {
                        TailRule::Repeat => values[k - 1],
                        TailRule::Exponent(a) => values[k - 1] * (k as f64 / j as f64).powf(*a),
                    }
                }
            }
            Self::PowerSum { head, terms } => {
                if j <= head.len() {
                    head[j - 1]
                } else {
                    terms.iter().map(|t| t.eval(j)).sum()
                }
            }
            Self::Powered { base, power } => base.value(j).powf(*power),
        }
    }

    /// First `d` coefficients.
    pub fn values(&self, d: usize) -> Vec<f64> {
        (1..=d).map(|j| self.value(j)).collect()
    }

    /// Exact tail expansion as a finite sum of power laws, when one exists.
    /// Explicit lists never have one: a finite list cannot certify a tail.
    pub fn tail_expansion(&self) -> Option<Vec<PowerTerm>> {
        match self {
            Self::PowerLaw { exponent, scale } => Some(vec![PowerTerm::new(*scale, *exponent)]),
            Self::Explicit { .. } => None,
            Self::PowerSum { terms, .. } => Some(terms.clone()),
            Self::Powered { base, power } => match base.tail_expansion()?.as_slice() {
                [t] => Some(vec![PowerTerm::new(t.scale.powf(*power), t.exponent * power)]),
                _ => None,
            },
        }
    }

    /// Leading decay exponent `a` with `value(j) ~ j^(-a)`, if known.
    pub fn tail_exponent(&self) -> Option<f64> {
        let terms = self.tail_expansion()?;
        terms
            .iter()
            .filter(|t| t.scale != 0.0)
            .map(|t| t.exponent)
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn is_power_law(&self) -> bool {
        self.tail_expansion().is_some()
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for SpectralSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { exponent, scale } => {
                write!(f, "kind=power_law exponent={exponent} scale={scale}")
            }
            Self::Explicit { values, tail } => {
                write!(f, "kind=explicit values={}", fmt_list(values))?;
                match tail {
                    TailRule::Repeat => write!(f, " tail=repeat"),
                    TailRule::Exponent(a) => write!(f, " tail=exponent:{a}"),
                }
            }
            Self::PowerSum { head, terms } => {
                let terms = terms
                    .iter()
                    .map(|t| format!("{}:{}", t.scale, t.exponent))
                    .collect::<Vec<_>>()
                    .join(",");
                write!(f, "kind=power_sum terms={terms}")?;
                if !head.is_empty() {
                    write!(f, " head={}", fmt_list(head))?;
                }
                Ok(())
            }
            Self::Powered { base, power } => write!(f, "kind=powered power={power} base={{{base}}}"),
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{s}' as a number")))
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_f64(key, x)).collect()
}

impl FromStr for SpectralSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        // `base={...}` nests a whole sequence, so pull it out before splitting on spaces.
        let (flat, base) = match s.find("base={") {
            Some(pos) => {
                let inner = s[pos + 6..]
                    .strip_suffix('}')
                    .ok_or_else(|| Error::Config("unterminated base={...}".into()))?;
                (s[..pos].trim(), Some(inner))
            }
            None => (s, None),
        };
        let mut kind = None;
        let mut fields = std::collections::BTreeMap::new();
        for tok in flat.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{tok}'")))?;
            if k == "kind" {
                kind = Some(v);
            } else {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("sequence '{s}' is missing '{k}'")))
        };
        match kind {
            Some("power_law") => {
                let scale = match fields.get("scale") {
                    Some(v) => parse_f64("scale", v)?,
                    None => 1.0,
                };
                Self::power_law(parse_f64("exponent", get("exponent")?)?, scale)
            }
            Some("explicit") => {
                let values = parse_list("values", get("values")?)?;
                let tail = match fields.get("tail").copied() {
                    None | Some("repeat") => TailRule::Repeat,
                    Some(t) => match t.strip_prefix("exponent:") {
                        Some(a) => TailRule::Exponent(parse_f64("tail", a)?),
                        None => return Err(Error::Config(format!("unknown tail rule '{t}'"))),
                    },
                };
                Self::explicit(values, tail)
            }
            Some("power_sum") => {
                let terms = get("terms")?
                    .split(',')
                    .map(|t| {
                        let (c, e) = t
                            .split_once(':')
                            .ok_or_else(|| Error::Config(format!("power-sum term '{t}' is not scale:exponent")))?;
                        Ok(PowerTerm::new(parse_f64("terms", c)?, parse_f64("terms", e)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let head = match fields.get("head") {
                    Some(h) => parse_list("head", h)?,
                    None => Vec::new(),
                };
                Self::power_sum(head, terms)
            }
            Some("powered") => {
                let base = base.ok_or_else(|| Error::Config("powered sequence needs base={...}".into()))?;
                Self::powered(base.parse()?, parse_f64("power", get("power")?)?)
            }
            Some(other) => Err(Error::Config(format!("unknown sequence kind '{other}'"))),
            None => Err(Error::Config(format!("sequence '{s}' has no kind="))),
        }
    }
}

impl TryFrom<String> for SpectralSequence {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SpectralSequence> for String {
    fn from(s: SpectralSequence) -> String {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_law_at_one_is_scale() {
        let s = SpectralSequence::power_law(6.0, 2.5).unwrap();
        assert_eq!(s.value(1), 2.5);
        assert_eq!(s.value(2), 2.5 / 64.0);
    }

    #[test]
    fn explicit_tail_rules() {
        let rep = SpectralSequence::explicit(vec![1.0, 0.5], TailRule::Repeat).unwrap();
        assert_eq!(rep.value(7), 0.5);
        let exp = SpectralSequence::explicit(vec![1.0, 0.5], TailRule::Exponent(2.0)).unwrap();
        assert!((exp.value(4) - 0.125).abs() < 1e-15);
        assert!(rep.tail_expansion().is_none());
    }

    #[test]
    fn power_sum_head_override() {
        let s = SpectralSequence::power_sum(vec![1.0], vec![PowerTerm::new(1.0, 6.0), PowerTerm::new(1.0, 12.0)]).unwrap();
        assert_eq!(s.value(1), 1.0);
        assert_eq!(s.value(2), 2f64.powi(-6) + 2f64.powi(-12));
        assert_eq!(s.tail_exponent(), Some(6.0));
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(SpectralSequence::power_law(-1.0, 1.0).is_err());
        assert!(SpectralSequence::power_law(1.0, f64::NAN).is_err());
        assert!(SpectralSequence::explicit(vec![], TailRule::Repeat).is_err());
        assert!(SpectralSequence::explicit(vec![-0.1], TailRule::Repeat).is_err());
        assert!("kind=cubic".parse::<SpectralSequence>().is_err());
        assert!("exponent=3".parse::<SpectralSequence>().is_err());
    }

    #[test]
    fn parses_config_syntax() {
        let s: SpectralSequence = "kind=power_law exponent=6 scale=1".parse().unwrap();
        assert_eq!(s, SpectralSequence::PowerLaw { exponent: 6.0, scale: 1.0 });
        let s: SpectralSequence = "kind=explicit values=1,0.5 tail=exponent:3".parse().unwrap();
        assert_eq!(s.value(2), 0.5);
        let s: SpectralSequence = "kind=powered power=0.5 base={kind=power_law exponent=4 scale=9}".parse().unwrap();
        assert!((s.value(1) - 3.0).abs() < 1e-15);
        assert_eq!(s.tail_exponent(), Some(2.0));
    }

    fn arb_sequence() -> impl Strategy<Value = SpectralSequence> {
        let pl = (0.0..8.0f64, 1e-3..1e3f64).prop_map(|(a, s)| SpectralSequence::power_law(a, s).unwrap());
        let ex = (proptest::collection::vec(1e-6..10.0f64, 1..6), proptest::option::of(0.0..5.0f64)).prop_map(|(v, t)| {
            SpectralSequence::explicit(v, t.map_or(TailRule::Repeat, TailRule::Exponent)).unwrap()
        });
        let ps = (proptest::collection::vec(1e-6..10.0f64, 0..3), proptest::collection::vec((1e-3..10.0f64, 0.0..12.0f64), 1..4))
            .prop_map(|(h, t)| SpectralSequence::power_sum(h, t.into_iter().map(|(c, e)| PowerTerm::new(c, e)).collect()).unwrap());
        prop_oneof![pl.clone(), ex, ps.clone(), (pl, -2.0..2.0f64).prop_map(|(b, p)| SpectralSequence::powered(b, p).unwrap())]
    }

    proptest! {
        #[test]
        fn text_form_round_trips(s in arb_sequence()) {
            let back: SpectralSequence = s.to_string().parse().unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn evaluation_is_positive_and_deterministic(s in arb_sequence(), j in 1usize..500) {
            let v = s.value(j);
            prop_assert!(v.is_finite() && v > 0.0);
            prop_assert_eq!(v.to_bits(), s.value(j).to_bits());
        }
    }
}
