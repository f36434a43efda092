//! Euler-Maruyama and exact-linear-part discretizations of the annealed
//! Langevin diffusion, with their linear stability analysis.

mod chain;
mod coeffs;
mod stability;

pub use chain::{em_step, elp_step, run_chain, OVERFLOW_CLAMP};
pub use coeffs::{elp_coeffs, ElpCoeffs};
pub use stability::{linearized_em_second_moment, stability_report, StabilityReport, StabilitySummary};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "EM")]
    Em,
    #[serde(rename = "ELP")]
    Elp,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Em => "EM",
            Scheme::Elp => "ELP",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "EM" => Ok(Scheme::Em),
            "ELP" => Ok(Scheme::Elp),
            _ => Err(Error::Config(format!("unknown scheme {s:?}, expected EM or ELP"))),
        }
    }
}
