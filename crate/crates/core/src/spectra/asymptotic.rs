//! Tail arithmetic for coefficient expressions built from power laws.
//!
//! Sums, differences and products of finite power sums stay exact, so
//! cancellations such as `sigma_over - sigma_under` are resolved correctly.
//! Quotients keep only the leading term, which is enough for summability of the
//! non-negative expressions the conditions are built from.

use std::ops::{Add, Div, Mul, Sub};

use super::sequence::PowerTerm;

const EXPONENT_TOL: f64 = 1e-12;
const CANCEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tail {
    /// Equal, for all large `j`, to this finite sum. Empty means identically zero.
    Exact(Vec<PowerTerm>),
    /// Asymptotically equivalent to a single positive term.
    Leading(PowerTerm),
    Unknown,
}

/// Merges equal exponents, drops cancelled terms, orders dominant term first.
fn normalize(mut terms: Vec<PowerTerm>) -> Vec<PowerTerm> {
    terms.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
    let mut out: Vec<(PowerTerm, f64)> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some((last, mag)) if (last.exponent - t.exponent).abs() <= EXPONENT_TOL => {
                last.scale += t.scale;
                *mag += t.scale.abs();
            }
            _ => out.push((t, t.scale.abs())),
        }
    }
    out.into_iter()
        .filter(|(t, mag)| t.scale.abs() > CANCEL_TOL * mag)
        .map(|(t, _)| t)
        .collect()
}

impl Tail {
    pub fn exact(terms: Vec<PowerTerm>) -> Self {
        Tail::Exact(normalize(terms))
    }

    pub fn zero() -> Self {
        Tail::Exact(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Tail::exact(vec![PowerTerm::new(c, 0.0)])
    }

    pub fn from_expansion(e: Option<Vec<PowerTerm>>) -> Self {
        e.map_or(Tail::Unknown, Tail::exact)
    }

    /// `Some(None)` for an identically-zero tail, `None` when unknown.
    pub fn leading(&self) -> Option<Option<PowerTerm>> {
        match self {
            Tail::Exact(t) => Some(t.first().copied()),
            Tail::Leading(t) => Some(Some(*t)),
            Tail::Unknown => None,
        }
    }

    pub fn max(self, other: Tail) -> Tail {
        self.pick(other, true)
    }

    pub fn min(self, other: Tail) -> Tail {
        self.pick(other, false)
    }

    fn pick(self, other: Tail, want_max: bool) -> Tail {
        match (&self, &other) {
            (Tail::Exact(_), Tail::Exact(_)) => {
                let diff = self.clone() - other.clone();
                let self_larger = match diff.leading() {
                    Some(Some(t)) => t.scale > 0.0,
                    _ => true,
                };
                if self_larger == want_max {
                    self
                } else {
                    other
                }
            }
            _ => Tail::Unknown,
        }
    }
}

fn lead_pair(a: &Tail, b: &Tail) -> Option<(Option<PowerTerm>, Option<PowerTerm>)> {
    Some((a.leading()?, b.leading()?))
}

impl Add for Tail {
    type Output = Tail;
    fn add(self, rhs: Tail) -> Tail {
        if let (Tail::Exact(a), Tail::Exact(b)) = (&self, &rhs) {
            return Tail::exact(a.iter().chain(b).copied().collect());
        }
        match lead_pair(&self, &rhs) {
            None => Tail::Unknown,
            Some((None, x)) | Some((x, None)) => x.map_or(Tail::zero(), Tail::Leading),
            Some((Some(a), Some(b))) => {
                if (a.exponent - b.exponent).abs() <= EXPONENT_TOL {
                    Tail::Leading(PowerTerm::new(a.scale + b.scale, a.exponent))
                } else if a.exponent < b.exponent {
                    Tail::Leading(a)
                } else {
                    Tail::Leading(b)
                }
            }
        }
    }
}

impl Sub for Tail {
    type Output = Tail;
    fn sub(self, rhs: Tail) -> Tail {
        match (self, rhs) {
            (Tail::Exact(a), Tail::Exact(b)) => Tail::exact(
                a.into_iter()
                    .chain(b.into_iter().map(|t| PowerTerm::new(-t.scale, t.exponent)))
                    .collect(),
            ),
            _ => Tail::Unknown,
        }
    }
}

impl Mul for Tail {
    type Output = Tail;
    fn mul(self, rhs: Tail) -> Tail {
        if let (Tail::Exact(a), Tail::Exact(b)) = (&self, &rhs) {
            let mut terms = Vec::with_capacity(a.len() * b.len());
            for x in a {
                for y in b {
                    terms.push(PowerTerm::new(x.scale * y.scale, x.exponent + y.exponent));
                }
            }
            return Tail::exact(terms);
        }
        match lead_pair(&self, &rhs) {
            None => Tail::Unknown,
            Some((Some(a), Some(b))) => Tail::Leading(PowerTerm::new(a.scale * b.scale, a.exponent + b.exponent)),
            Some(_) => Tail::zero(),
        }
    }
}

impl Div for Tail {
    type Output = Tail;
    fn div(self, rhs: Tail) -> Tail {
        let (num, den) = match lead_pair(&self, &rhs) {
            Some((n, Some(d))) if d.scale != 0.0 => (n, d),
            _ => return Tail::Unknown,
        };
        let Some(num) = num else {
            return Tail::zero();
        };
        let quotient = PowerTerm::new(num.scale / den.scale, num.exponent - den.exponent);
        match (&self, &rhs) {
            (Tail::Exact(a), Tail::Exact(b)) if a.len() == 1 && b.len() == 1 => Tail::Exact(vec![quotient]),
            _ => Tail::Leading(quotient),
        }
    }
}

/// Arithmetic shared by per-coordinate values and tail expansions, so every
/// condition term is written once.
pub(crate) trait Coef:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn max_of(self, other: Self) -> Self;
    fn min_of(self, other: Self) -> Self;

    fn sq(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Coef for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn max_of(self, other: Self) -> Self {
        self.max(other)
    }
    fn min_of(self, other: Self) -> Self {
        self.min(other)
    }
}

impl Coef for Tail {
    fn constant(c: f64) -> Self {
        Tail::constant(c)
    }
    fn max_of(self, other: Self) -> Self {
        self.max(other)
    }
    fn min_of(self, other: Self) -> Self {
        self.min(other)
    }
}
