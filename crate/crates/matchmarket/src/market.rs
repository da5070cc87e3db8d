//! Shared domain types: market parameters, densities, policies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One side of the bipartite market.
///
/// Side `U` arrives at rate `lambda_a`, side `V` at rate `lambda_b`.
/// In the 1-sided policies side `U` is the inactive one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    U,
    V,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::U => Side::V,
            Side::V => Side::U,
        }
    }
}

/// When an agent attempts to match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchTiming {
    /// Immediately after entering the market.
    AtArrival,
    /// At the instant the agent's lifetime expires.
    AtCriticality,
    /// Never initiates; can only be chosen by an active neighbor.
    Never,
}

/// A matching policy.
///
/// The 2-sided policies make every agent greedy or patient; the 1-sided
/// policies fix side `U` as inactive and make side `V` greedy or patient.
/// `Inactive` makes both sides inactive, so no one ever matches; it serves
/// as the no-matching reference chain for coupling arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Greedy2,
    Patient2,
    Greedy1,
    Patient1,
    Inactive,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Greedy2,
        Policy::Patient2,
        Policy::Greedy1,
        Policy::Patient1,
        Policy::Inactive,
    ];

    /// The four policies that actually match agents.
    pub const MATCHING: [Policy; 4] = [
        Policy::Greedy2,
        Policy::Patient2,
        Policy::Greedy1,
        Policy::Patient1,
    ];

    /// When an agent on `side` attempts to match under this policy.
    pub fn timing(self, side: Side) -> MatchTiming {
        match (self, side) {
            (Policy::Greedy2, _) => MatchTiming::AtArrival,
            (Policy::Patient2, _) => MatchTiming::AtCriticality,
            (Policy::Greedy1, Side::V) => MatchTiming::AtArrival,
            (Policy::Patient1, Side::V) => MatchTiming::AtCriticality,
            (Policy::Greedy1, Side::U) | (Policy::Patient1, Side::U) | (Policy::Inactive, _) => {
                MatchTiming::Never
            }
        }
    }

    pub fn is_two_sided(self) -> bool {
        matches!(self, Policy::Greedy2 | Policy::Patient2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::Greedy2 => "greedy2",
            Policy::Patient2 => "patient2",
            Policy::Greedy1 => "greedy1",
            Policy::Patient1 => "patient1",
            Policy::Inactive => "inactive",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "greedy2" => Ok(Policy::Greedy2),
            "patient2" => Ok(Policy::Patient2),
            "greedy1" => Ok(Policy::Greedy1),
            "patient1" => Ok(Policy::Patient1),
            "inactive" => Ok(Policy::Inactive),
            other => Err(format!(
                "unknown policy `{other}` (expected greedy2|patient2|greedy1|patient1|inactive)"
            )),
        }
    }
}

/// Validated market parameters `(lambda_a, lambda_b, p)`.
///
/// Immutable by construction; every accessor is a plain copy, so values can
/// be shared freely across worker threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    lambda_a: f64,
    lambda_b: f64,
    p: f64,
}

impl MarketParams {
    /// Validates `(lambda_a, lambda_b, p)`. Never clamps: out-of-range input
    /// is an error. `p = 0` and `p = 1` are rejected along with everything
    /// outside (0, 1): at `p = 1` the survival factor `(1-p)^k` degenerates
    /// and at `p = 0` no match can ever form.
    pub fn new(lambda_a: f64, lambda_b: f64, p: f64) -> Result<Self> {
        if !(lambda_a.is_finite() && lambda_a > 0.0) {
            return Err(Error::NonPositiveRate {
                name: "lambda_a",
                value: lambda_a,
            });
        }
        if !(lambda_b.is_finite() && lambda_b > 0.0) {
            return Err(Error::NonPositiveRate {
                name: "lambda_b",
                value: lambda_b,
            });
        }
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange { value: p });
        }
        Ok(Self {
            lambda_a,
            lambda_b,
            p,
        })
    }

    /// The equivalent `(d_a, d_b, p)` parameterization, as a pure conversion:
    /// `lambda_i = d_i / p`.
    pub fn from_densities(d_a: f64, d_b: f64, p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange { value: p });
        }
        Self::new(d_a / p, d_b / p, p)
    }

    pub fn lambda_a(&self) -> f64 {
        self.lambda_a
    }

    pub fn lambda_b(&self) -> f64 {
        self.lambda_b
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self, side: Side) -> f64 {
        match side {
            Side::U => self.lambda_a,
            Side::V => self.lambda_b,
        }
    }

    pub fn lambda_total(&self) -> f64 {
        self.lambda_a + self.lambda_b
    }

    /// Densities `d_a = lambda_a * p`, `d_b = lambda_b * p` and the imbalance.
    pub fn densities(&self) -> Densities {
        let d_a = self.lambda_a * self.p;
        let d_b = self.lambda_b * self.p;
        Densities {
            d_a,
            d_b,
            delta: (d_a - d_b).abs() / (d_a + d_b),
        }
    }

    /// Same market with the two sides exchanged.
    pub fn swapped(&self) -> MarketParams {
        MarketParams {
            lambda_a: self.lambda_b,
            lambda_b: self.lambda_a,
            p: self.p,
        }
    }

    /// `(1-p)^k` for real `k >= 0`, evaluated as `exp(k * ln(1-p))` with
    /// `ln_1p` so large `k` underflows gracefully instead of losing digits.
    pub fn survival(&self, k: f64) -> f64 {
        (k * (-self.p).ln_1p()).exp()
    }
}

/// Derived densities and imbalance of a market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Densities {
    pub d_a: f64,
    pub d_b: f64,
    /// `|d_a - d_b| / (d_a + d_b)`, in [0, 1]: the unavoidable loss floor of
    /// the thicker side.
    pub delta: f64,
}

/// Validates raw parameters; alias of [`MarketParams::new`] for callers that
/// prefer a free function.
pub fn validate_params(lambda_a: f64, lambda_b: f64, p: f64) -> Result<MarketParams> {
    MarketParams::new(lambda_a, lambda_b, p)
}
