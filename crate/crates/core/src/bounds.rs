//! Shared vocabulary for bound computations: estimands, methods, intervals.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Containment slack used everywhere intervals are compared.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-9;

/// What is being bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimandKind {
    /// Mean potential outcome under no treatment, `E[Y(X=0)]`.
    Ey0,
    /// Mean potential outcome under treatment, `E[Y(X=1)]`.
    Ey1,
    /// Causal risk difference `E[Y(X=1) - Y(X=0)]`.
    RiskDifference,
}

impl EstimandKind {
    /// Natural range of the estimand.
    pub fn range(self) -> (f64, f64) {
        match self {
            EstimandKind::Ey0 | EstimandKind::Ey1 => (0.0, 1.0),
            EstimandKind::RiskDifference => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for EstimandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimandKind::Ey0 => "ey0",
            EstimandKind::Ey1 => "ey1",
            EstimandKind::RiskDifference => "rd",
        };
        f.write_str(s)
    }
}

/// An estimand, optionally conditional on a covariate level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimand {
    pub kind: EstimandKind,
    /// `Some(s)` for the covariate-conditional estimand at level `s`.
    pub given_covariate: Option<u8>,
}

impl Estimand {
    pub fn marginal(kind: EstimandKind) -> Self {
        Estimand {
            kind,
            given_covariate: None,
        }
    }

    pub fn conditional(kind: EstimandKind, s: u8) -> Self {
        Estimand {
            kind,
            given_covariate: Some(s),
        }
    }
}

/// How an interval was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Covariate-marginal: closed form on the covariate-marginalized table.
    Cm,
    /// Covariate-averaged: stratum bounds averaged with covariate weights.
    Ca,
    /// Covariate-optimal: LP over the full model including the covariate.
    Co,
    /// Back-door point identification.
    Backdoor,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Cm => "cm",
            Method::Ca => "ca",
            Method::Co => "co",
            Method::Backdoor => "backdoor",
        };
        f.write_str(s)
    }
}

/// A lower/upper pair with provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsInterval {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    pub sharp_by_construction: bool,
}

impl BoundsInterval {
    /// Builds an interval, clamping endpoints into the estimand's range
    /// (tolerating numerical overshoot up to the containment slack).
    pub fn new(
        lower: f64,
        upper: f64,
        kind: EstimandKind,
        method: Method,
        sharp_by_construction: bool,
    ) -> Result<Self, IntervalError> {
        if lower > upper + CONTAINMENT_TOLERANCE {
            return Err(IntervalError::Inverted { lower, upper });
        }
        let (lo_min, hi_max) = kind.range();
        if lower < lo_min - CONTAINMENT_TOLERANCE || upper > hi_max + CONTAINMENT_TOLERANCE {
            return Err(IntervalError::OutOfRange {
                lower,
                upper,
                range: (lo_min, hi_max),
            });
        }
        Ok(BoundsInterval {
            lower: lower.clamp(lo_min, hi_max),
            upper: upper.clamp(lo_min, hi_max).max(lower.clamp(lo_min, hi_max)),
            method,
            sharp_by_construction,
        })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains_value(&self, v: f64, tol: f64) -> bool {
        v >= self.lower - tol && v <= self.upper + tol
    }

    /// `self` is contained in `outer` under the standard slack rule.
    pub fn contained_in(&self, outer: &BoundsInterval) -> bool {
        self.lower >= outer.lower - CONTAINMENT_TOLERANCE
            && self.upper <= outer.upper + CONTAINMENT_TOLERANCE
    }
}

impl fmt::Display for BoundsInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.9}, {:.9}] ({})", self.lower, self.upper, self.method)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IntervalError {
    #[error("interval is inverted: lower {lower} > upper {upper}")]
    Inverted { lower: f64, upper: f64 },
    #[error("interval [{lower}, {upper}] exceeds estimand range {range:?}")]
    OutOfRange {
        lower: f64,
        upper: f64,
        range: (f64, f64),
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_float_overshoot() {
        let i = BoundsInterval::new(
            -1e-12,
            1.0 + 1e-12,
            EstimandKind::Ey0,
            Method::Co,
            true,
        )
        .unwrap();
        assert_eq!(i.lower, 0.0);
        assert_eq!(i.upper, 1.0);
    }

    #[test]
    fn rejects_inverted_interval() {
        assert!(BoundsInterval::new(0.5, 0.2, EstimandKind::Ey0, Method::Cm, false).is_err());
    }

    #[test]
    fn containment_uses_slack() {
        let inner = BoundsInterval::new(0.2, 0.8, EstimandKind::Ey0, Method::Co, true).unwrap();
        let outer =
            BoundsInterval::new(0.2 + 5e-10, 0.8 - 5e-10, EstimandKind::Ey0, Method::Ca, false)
                .unwrap();
        assert!(inner.contained_in(&outer));
    }
}
