//! Registry and evaluator for the closed-form bound expressions: max/min sets
//! of affine combinations of observed-probability atoms, plus covariate
//! averaging, risk-difference composition, and the y-relabeling mirror that
//! turns a lower-bound set into its upper companion.
//!
//! Expressions are stored as data so they can be diffed against an external
//! transcription and exported in the `p`-subscript notation they are usually
//! written in.

use crate::bounds::{BoundsInterval, EstimandKind, Method};
use crate::dist::{DistError, ObservedDistribution};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClosedFormError {
    #[error("unknown expression set `{0}`; valid ids: {1}")]
    UnknownSet(String, String),
    #[error("expression references `{0}` which the distribution does not contain")]
    MissingVar(String),
    #[error("expression set needs a covariate level but none was supplied")]
    MissingContext,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("set cannot be mirrored: {0}")]
    Mirror(String),
    #[error("covariate weights do not match the strata: {0}")]
    WeightMismatch(String),
}

/// Covariate index of an atom: a fixed level or the evaluation context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomS {
    Fixed(u8),
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    /// `p_{yx} = P(Y=y, X=x)`
    Joint,
    /// `p_{yx.z} = P(Y=y, X=x | Z=z)`
    CondZ,
    /// `p_{yx.zs} = P(Y=y, X=x | Z=z, S=s)`
    CondZs,
    /// `p_{yxs.z} = P(Y=y, X=x, S=s | Z=z)`
    JointSCondZ,
    /// `p_s = P(S=s)`
    MargS,
}

/// One observed-probability atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbAtom {
    pub kind: AtomKind,
    pub y: Option<u8>,
    pub x: Option<u8>,
    pub z: Option<u8>,
    pub s: Option<AtomS>,
}

fn pj(y: u8, x: u8) -> ProbAtom {
    ProbAtom {
        kind: AtomKind::Joint,
        y: Some(y),
        x: Some(x),
        z: None,
        s: None,
    }
}

fn cz(y: u8, x: u8, z: u8) -> ProbAtom {
    ProbAtom {
        kind: AtomKind::CondZ,
        y: Some(y),
        x: Some(x),
        z: Some(z),
        s: None,
    }
}

fn czs(y: u8, x: u8, z: u8) -> ProbAtom {
    ProbAtom {
        kind: AtomKind::CondZs,
        y: Some(y),
        x: Some(x),
        z: Some(z),
        s: Some(AtomS::Context),
    }
}

fn czs_at(y: u8, x: u8, z: u8, s: u8) -> ProbAtom {
    ProbAtom {
        kind: AtomKind::CondZs,
        y: Some(y),
        x: Some(x),
        z: Some(z),
        s: Some(AtomS::Fixed(s)),
    }
}

fn jsz(y: u8, x: u8, s: u8, z: u8) -> ProbAtom {
    ProbAtom {
        kind: AtomKind::JointSCondZ,
        y: Some(y),
        x: Some(x),
        z: Some(z),
        s: Some(AtomS::Fixed(s)),
    }
}

impl ProbAtom {
    fn resolve(&self, d: &ObservedDistribution, s_ctx: Option<u8>) -> Result<f64, ClosedFormError> {
        let need = |name: &str| -> Result<(), ClosedFormError> {
            if d.has_var(name) {
                Ok(())
            } else {
                Err(ClosedFormError::MissingVar(name.to_string()))
            }
        };
        let s_val = |s: Option<AtomS>| -> Result<u8, ClosedFormError> {
            match s {
                Some(AtomS::Fixed(v)) => Ok(v),
                Some(AtomS::Context) => s_ctx.ok_or(ClosedFormError::MissingContext),
                None => unreachable!("s index required by atom kind"),
            }
        };
        match self.kind {
            AtomKind::Joint => {
                need("Y")?;
                need("X")?;
                Ok(d.prob_of(&[("Y", self.y.unwrap()), ("X", self.x.unwrap())])?)
            }
            AtomKind::CondZ => {
                need("Y")?;
                need("X")?;
                need("Z")?;
                Ok(d.cond_prob(
                    &[("Y", self.y.unwrap()), ("X", self.x.unwrap())],
                    &[("Z", self.z.unwrap())],
                )?)
            }
            AtomKind::CondZs => {
                need("Y")?;
                need("X")?;
                need("Z")?;
                need("S")?;
                let s = s_val(self.s)?;
                Ok(d.cond_prob(
                    &[("Y", self.y.unwrap()), ("X", self.x.unwrap())],
                    &[("Z", self.z.unwrap()), ("S", s)],
                )?)
            }
            AtomKind::JointSCondZ => {
                need("Y")?;
                need("X")?;
                need("Z")?;
                need("S")?;
                let s = s_val(self.s)?;
                Ok(d.cond_prob(
                    &[("Y", self.y.unwrap()), ("X", self.x.unwrap()), ("S", s)],
                    &[("Z", self.z.unwrap())],
                )?)
            }
            AtomKind::MargS => {
                need("S")?;
                let s = s_val(self.s)?;
                Ok(d.prob_of(&[("S", s)])?)
            }
        }
    }

    fn text(&self) -> String {
        let s_char = |s: Option<AtomS>| match s {
            Some(AtomS::Fixed(v)) => v.to_string(),
            Some(AtomS::Context) => "s".to_string(),
            None => String::new(),
        };
        match self.kind {
            AtomKind::Joint => format!("p_{{{}{}}}", self.y.unwrap(), self.x.unwrap()),
            AtomKind::CondZ => format!(
                "p_{{{}{}.{}}}",
                self.y.unwrap(),
                self.x.unwrap(),
                self.z.unwrap()
            ),
            AtomKind::CondZs => format!(
                "p_{{{}{}.{}{}}}",
                self.y.unwrap(),
                self.x.unwrap(),
                self.z.unwrap(),
                s_char(self.s)
            ),
            AtomKind::JointSCondZ => format!(
                "p_{{{}{}{}.{}}}",
                self.y.unwrap(),
                self.x.unwrap(),
                s_char(self.s),
                self.z.unwrap()
            ),
            AtomKind::MargS => format!("p_{{s={}}}", s_char(self.s)),
        }
    }

    fn flip_y(&self) -> Result<ProbAtom, ClosedFormError> {
        let y = self
            .y
            .ok_or_else(|| ClosedFormError::Mirror("atom has no outcome index".into()))?;
        Ok(ProbAtom {
            y: Some(1 - y),
            ..*self
        })
    }
}

/// An affine combination `constant + sum of coeff * atom`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub coeffs: Vec<(f64, ProbAtom)>,
}

impl AffineExpr {
    pub fn eval(&self, d: &ObservedDistribution, s_ctx: Option<u8>) -> Result<f64, ClosedFormError> {
        let mut v = self.constant;
        for (c, atom) in &self.coeffs {
            v += c * atom.resolve(d, s_ctx)?;
        }
        Ok(v)
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        if self.constant != 0.0 {
            let _ = write!(out, "{}", self.constant);
        }
        for (c, atom) in &self.coeffs {
            let mag = c.abs();
            let sign = if *c < 0.0 {
                "-"
            } else if out.is_empty() {
                ""
            } else {
                "+"
            };
            if mag == 1.0 {
                let _ = write!(out, "{sign}{}", atom.text());
            } else {
                let _ = write!(out, "{sign}{mag}*{}", atom.text());
            }
        }
        out
    }
}

/// Whether the set's extremum is a lower bound (max of terms) or an upper
/// bound (min of terms).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSense {
    LowerMax,
    UpperMin,
}

/// How a registry entry came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOrigin {
    /// Entered directly as written.
    Base,
    /// Generated from a lower set by the y-relabeling mirror.
    Mirrored,
}

/// A max/min set of affine expressions bounding one estimand.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionSet {
    pub id: String,
    pub sense: BoundSense,
    pub estimand: EstimandKind,
    pub origin: SetOrigin,
    /// True when the set's atoms take the covariate level from context.
    pub stratum_scoped: bool,
    pub terms: Vec<AffineExpr>,
}

impl ExpressionSet {
    fn new(
        id: &str,
        sense: BoundSense,
        estimand: EstimandKind,
        origin: SetOrigin,
        stratum_scoped: bool,
        terms: Vec<AffineExpr>,
    ) -> Self {
        assert!(!terms.is_empty(), "expression set must be nonempty");
        ExpressionSet {
            id: id.to_string(),
            sense,
            estimand,
            origin,
            stratum_scoped,
            terms,
        }
    }

    /// Plain-text export, one term per line after the header.
    pub fn export_text(&self) -> String {
        let sense = match self.sense {
            BoundSense::LowerMax => "lower bound, max of",
            BoundSense::UpperMin => "upper bound, min of",
        };
        let mut out = format!("{} ({} {} terms)\n", self.id, sense, self.terms.len());
        for t in &self.terms {
            out.push_str(&t.text());
            out.push('\n');
        }
        out
    }
}

fn term(constant: f64, coeffs: Vec<(f64, ProbAtom)>) -> AffineExpr {
    AffineExpr { constant, coeffs }
}

/// The y-relabeling mirror: maps a lower-bound set for a mean potential
/// outcome to the matching upper-bound set (and back). Each term
/// `k + sum a*p` becomes `(1-k) - sum a*p'` with all outcome indices flipped;
/// the max/min sense flips with it.
pub fn mirror_set(set: &ExpressionSet) -> Result<ExpressionSet, ClosedFormError> {
    if set.estimand == EstimandKind::RiskDifference {
        return Err(ClosedFormError::Mirror(
            "risk-difference sets have no complement transform".into(),
        ));
    }
    let mut terms = Vec::with_capacity(set.terms.len());
    for t in &set.terms {
        let coeffs = t
            .coeffs
            .iter()
            .map(|(c, a)| Ok((-c, a.flip_y()?)))
            .collect::<Result<Vec<_>, ClosedFormError>>()?;
        terms.push(AffineExpr {
            constant: 1.0 - t.constant,
            coeffs,
        });
    }
    let id = match set.id.strip_suffix("_mirror") {
        Some(base) => base.to_string(),
        None => format!("{}_mirror", set.id),
    };
    Ok(ExpressionSet {
        id,
        sense: match set.sense {
            BoundSense::LowerMax => BoundSense::UpperMin,
            BoundSense::UpperMin => BoundSense::LowerMax,
        },
        estimand: set.estimand,
        origin: SetOrigin::Mirrored,
        stratum_scoped: set.stratum_scoped,
        terms,
    })
}

/// Evaluates every term of the set against a distribution.
pub fn eval_terms(
    set: &ExpressionSet,
    d: &ObservedDistribution,
    s_context: Option<u8>,
) -> Result<Vec<f64>, ClosedFormError> {
    set.terms.iter().map(|t| t.eval(d, s_context)).collect()
}

/// Max (lower-bound sets) or min (upper-bound sets) over the terms.
pub fn eval_expression_set(
    set: &ExpressionSet,
    d: &ObservedDistribution,
    s_context: Option<u8>,
) -> Result<f64, ClosedFormError> {
    let vals = eval_terms(set, d, s_context)?;
    let folded = match set.sense {
        BoundSense::LowerMax => vals.into_iter().fold(f64::NEG_INFINITY, f64::max),
        BoundSense::UpperMin => vals.into_iter().fold(f64::INFINITY, f64::min),
    };
    Ok(folded)
}

pub fn eval_by_id(
    id: &str,
    d: &ObservedDistribution,
    s_context: Option<u8>,
) -> Result<f64, ClosedFormError> {
    eval_expression_set(get_expression_set(id)?, d, s_context)
}

/// Weighted componentwise average of per-stratum intervals.
pub fn covariate_average(
    intervals: &BTreeMap<u8, BoundsInterval>,
    weights: &BTreeMap<u8, f64>,
) -> Result<BoundsInterval, ClosedFormError> {
    if intervals.is_empty() {
        return Err(ClosedFormError::WeightMismatch("no strata".into()));
    }
    let ikeys: Vec<u8> = intervals.keys().copied().collect();
    let wkeys: Vec<u8> = weights.keys().copied().collect();
    if ikeys != wkeys {
        return Err(ClosedFormError::WeightMismatch(format!(
            "strata {ikeys:?} vs weights {wkeys:?}"
        )));
    }
    let total: f64 = weights.values().sum();
    if weights.values().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(ClosedFormError::WeightMismatch(format!(
            "weights must be nonnegative and sum to 1, got total {total}"
        )));
    }
    let mut lower = 0.0;
    let mut upper = 0.0;
    for (s, iv) in intervals {
        lower += weights[s] * iv.lower;
        upper += weights[s] * iv.upper;
    }
    Ok(BoundsInterval {
        lower,
        upper,
        method: Method::Ca,
        sharp_by_construction: false,
    })
}

/// Risk-difference interval from its potential-outcome components:
/// `[L1 - U0, U1 - L0]`, clipped to `[-1, 1]`.
pub fn compose_rd(ey1: &BoundsInterval, ey0: &BoundsInterval) -> BoundsInterval {
    BoundsInterval {
        lower: (ey1.lower - ey0.upper).clamp(-1.0, 1.0),
        upper: (ey1.upper - ey0.lower).clamp(-1.0, 1.0),
        method: ey1.method,
        sharp_by_construction: false,
    }
}

/// All expression-set ids in the registry.
pub fn expression_ids() -> Vec<&'static str> {
    registry().iter().map(|s| s.id.as_str()).collect()
}

pub fn get_expression_set(id: &str) -> Result<&'static ExpressionSet, ClosedFormError> {
    registry()
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| ClosedFormError::UnknownSet(id.to_string(), expression_ids().join(", ")))
}

pub fn registry() -> &'static [ExpressionSet] {
    static REGISTRY: OnceLock<Vec<ExpressionSet>> = OnceLock::new();
    REGISTRY.get_or_init(build_registry)
}

fn build_registry() -> Vec<ExpressionSet> {
    use BoundSense::*;
    use EstimandKind::*;
    use SetOrigin::*;

    let mut sets = Vec::new();

    // Simple no-instrument risk-difference bounds over the (X, Y) joint.
    sets.push(ExpressionSet::new(
        "simple_lower",
        LowerMax,
        RiskDifference,
        Base,
        false,
        vec![term(0.0, vec![(-1.0, pj(1, 0)), (-1.0, pj(0, 1))])],
    ));
    sets.push(ExpressionSet::new(
        "simple_upper",
        UpperMin,
        RiskDifference,
        Base,
        false,
        vec![term(1.0, vec![(-1.0, pj(1, 0)), (-1.0, pj(0, 1))])],
    ));

    // Untreated-arm lower bound, four terms over p_{yx.z}.
    let ey0_lower_terms = vec![
        term(0.0, vec![(1.0, cz(1, 0, 1))]),
        term(
            0.0,
            vec![
                (-1.0, cz(0, 0, 0)),
                (-1.0, cz(0, 1, 0)),
                (1.0, cz(1, 0, 1)),
                (1.0, cz(0, 1, 1)),
            ],
        ),
        term(
            0.0,
            vec![
                (1.0, cz(1, 0, 0)),
                (1.0, cz(0, 1, 0)),
                (-1.0, cz(0, 0, 1)),
                (-1.0, cz(0, 1, 1)),
            ],
        ),
        term(0.0, vec![(1.0, cz(1, 0, 0))]),
    ];
    sets.push(ExpressionSet::new(
        "bp_ey0_lower",
        LowerMax,
        Ey0,
        Base,
        false,
        ey0_lower_terms.clone(),
    ));
    let bp_ey0_upper = {
        let lower = sets.last().unwrap();
        let mut m = mirror_set(lower).expect("mirrorable");
        m.id = "bp_ey0_upper".into();
        m
    };
    sets.push(bp_ey0_upper);

    // Treated-arm lower bound, four terms over p_{yx.z}.
    let ey1_lower_terms = vec![
        term(
            1.0,
            vec![(-1.0, cz(0, 0, 0)), (-1.0, cz(0, 1, 0)), (-1.0, cz(1, 0, 0))],
        ),
        term(
            1.0,
            vec![(-1.0, cz(0, 0, 1)), (-1.0, cz(0, 1, 1)), (-1.0, cz(1, 0, 1))],
        ),
        term(
            1.0,
            vec![
                (-1.0, cz(0, 1, 0)),
                (-1.0, cz(1, 0, 0)),
                (-1.0, cz(0, 0, 1)),
                (-1.0, cz(0, 1, 1)),
            ],
        ),
        term(
            1.0,
            vec![
                (-1.0, cz(0, 0, 0)),
                (-1.0, cz(0, 1, 0)),
                (-1.0, cz(0, 1, 1)),
                (-1.0, cz(1, 0, 1)),
            ],
        ),
    ];
    sets.push(ExpressionSet::new(
        "bp_ey1_lower",
        LowerMax,
        Ey1,
        Base,
        false,
        ey1_lower_terms,
    ));
    let bp_ey1_upper = {
        let lower = sets.last().unwrap();
        let mut m = mirror_set(lower).expect("mirrorable");
        m.id = "bp_ey1_upper".into();
        m
    };
    sets.push(bp_ey1_upper);

    // The marginal untreated-arm set again under its display name.
    sets.push(ExpressionSet::new(
        "A_minus_S",
        LowerMax,
        Ey0,
        Base,
        false,
        ey0_lower_terms,
    ));

    // Stratum-conditional untreated-arm set, fully conditioned on the level.
    sets.push(ExpressionSet::new(
        "A_given_s",
        LowerMax,
        Ey0,
        Base,
        true,
        vec![
            term(0.0, vec![(1.0, czs(1, 0, 1))]),
            term(
                0.0,
                vec![
                    (-1.0, czs(0, 0, 0)),
                    (-1.0, czs(0, 1, 0)),
                    (1.0, czs(1, 0, 1)),
                    (1.0, czs(0, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, czs(1, 0, 0)),
                    (1.0, czs(0, 1, 0)),
                    (-1.0, czs(0, 0, 1)),
                    (-1.0, czs(0, 1, 1)),
                ],
            ),
            term(0.0, vec![(1.0, czs(1, 0, 0))]),
        ],
    ));

    // Variant whose third term mixes marginal and stratum-conditional atoms;
    // kept for auditability next to the fully conditioned set above.
    sets.push(ExpressionSet::new(
        "A_given_s_verbatim",
        LowerMax,
        Ey0,
        Base,
        true,
        vec![
            term(0.0, vec![(1.0, czs(1, 0, 1))]),
            term(
                0.0,
                vec![
                    (-1.0, czs(0, 0, 0)),
                    (-1.0, czs(0, 1, 0)),
                    (1.0, czs(1, 0, 1)),
                    (1.0, czs(0, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, cz(1, 0, 0)),
                    (1.0, cz(0, 1, 0)),
                    (-1.0, cz(0, 0, 1)),
                    (-1.0, czs(0, 1, 1)),
                ],
            ),
            term(0.0, vec![(1.0, czs(1, 0, 0))]),
        ],
    ));

    // Covariate-optimal untreated-arm lower bound when the covariate sits in
    // the confounded block and is independent of the instrument: sixteen
    // terms over p_{yxs.z}.
    sets.push(ExpressionSet::new(
        "A_co_setting_e",
        LowerMax,
        Ey0,
        Base,
        false,
        vec![
            term(0.0, vec![(1.0, jsz(1, 0, 0, 1)), (1.0, jsz(1, 0, 1, 1))]),
            term(
                0.0,
                vec![
                    (-1.0, jsz(0, 0, 0, 0)),
                    (-1.0, jsz(0, 1, 0, 0)),
                    (1.0, jsz(1, 0, 0, 1)),
                    (1.0, jsz(0, 1, 0, 1)),
                    (1.0, jsz(1, 0, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 0)),
                    (1.0, jsz(0, 1, 0, 0)),
                    (-1.0, jsz(0, 0, 0, 1)),
                    (-1.0, jsz(0, 1, 0, 1)),
                    (1.0, jsz(1, 0, 1, 1)),
                ],
            ),
            term(0.0, vec![(1.0, jsz(1, 0, 0, 0)), (1.0, jsz(1, 0, 1, 1))]),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 1)),
                    (-1.0, jsz(0, 0, 1, 0)),
                    (-1.0, jsz(0, 1, 1, 0)),
                    (1.0, jsz(1, 0, 1, 1)),
                    (1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (-1.0, jsz(0, 0, 0, 0)),
                    (-1.0, jsz(0, 1, 0, 0)),
                    (1.0, jsz(1, 0, 0, 1)),
                    (1.0, jsz(0, 1, 0, 1)),
                    (-1.0, jsz(0, 0, 1, 0)),
                    (-1.0, jsz(0, 1, 1, 0)),
                    (1.0, jsz(1, 0, 1, 1)),
                    (1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 0)),
                    (1.0, jsz(0, 1, 0, 0)),
                    (-1.0, jsz(0, 0, 0, 1)),
                    (-1.0, jsz(0, 1, 0, 1)),
                    (-1.0, jsz(0, 0, 1, 0)),
                    (-1.0, jsz(0, 1, 1, 0)),
                    (1.0, jsz(1, 0, 1, 1)),
                    (1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 0)),
                    (-1.0, jsz(0, 0, 1, 0)),
                    (-1.0, jsz(0, 1, 1, 0)),
                    (1.0, jsz(1, 0, 1, 1)),
                    (1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 1)),
                    (1.0, jsz(1, 0, 1, 0)),
                    (1.0, jsz(0, 1, 1, 0)),
                    (-1.0, jsz(0, 0, 1, 1)),
                    (-1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (-1.0, jsz(0, 0, 0, 0)),
                    (-1.0, jsz(0, 1, 0, 0)),
                    (1.0, jsz(1, 0, 0, 1)),
                    (1.0, jsz(0, 1, 0, 1)),
                    (1.0, jsz(1, 0, 1, 0)),
                    (1.0, jsz(0, 1, 1, 0)),
                    (-1.0, jsz(0, 0, 1, 1)),
                    (-1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 0)),
                    (1.0, jsz(0, 1, 0, 0)),
                    (-1.0, jsz(0, 0, 0, 1)),
                    (-1.0, jsz(0, 1, 0, 1)),
                    (1.0, jsz(1, 0, 1, 0)),
                    (1.0, jsz(0, 1, 1, 0)),
                    (-1.0, jsz(0, 0, 1, 1)),
                    (-1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 0)),
                    (1.0, jsz(1, 0, 1, 0)),
                    (1.0, jsz(0, 1, 1, 0)),
                    (-1.0, jsz(0, 0, 1, 1)),
                    (-1.0, jsz(0, 1, 1, 1)),
                ],
            ),
            term(0.0, vec![(1.0, jsz(1, 0, 0, 1)), (1.0, jsz(1, 0, 1, 0))]),
            term(
                0.0,
                vec![
                    (-1.0, jsz(0, 0, 0, 0)),
                    (-1.0, jsz(0, 1, 0, 0)),
                    (1.0, jsz(1, 0, 0, 1)),
                    (1.0, jsz(0, 1, 0, 1)),
                    (1.0, jsz(1, 0, 1, 0)),
                ],
            ),
            term(
                0.0,
                vec![
                    (1.0, jsz(1, 0, 0, 0)),
                    (1.0, jsz(0, 1, 0, 0)),
                    (-1.0, jsz(0, 0, 0, 1)),
                    (-1.0, jsz(0, 1, 0, 1)),
                    (1.0, jsz(1, 0, 1, 0)),
                ],
            ),
            term(0.0, vec![(1.0, jsz(1, 0, 0, 0)), (1.0, jsz(1, 0, 1, 0))]),
        ],
    ));

    // Stratum-conditional treated-arm lower bound (level from context).
    sets.push(ExpressionSet::new(
        "addiv_bp_per_s",
        LowerMax,
        Ey1,
        Base,
        true,
        vec![
            term(
                1.0,
                vec![
                    (-1.0, czs(0, 0, 0)),
                    (-1.0, czs(0, 1, 0)),
                    (-1.0, czs(1, 0, 0)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs(0, 0, 1)),
                    (-1.0, czs(0, 1, 1)),
                    (-1.0, czs(1, 0, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs(0, 1, 0)),
                    (-1.0, czs(1, 0, 0)),
                    (-1.0, czs(0, 0, 1)),
                    (-1.0, czs(0, 1, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs(0, 0, 0)),
                    (-1.0, czs(0, 1, 0)),
                    (-1.0, czs(0, 1, 1)),
                    (-1.0, czs(1, 0, 1)),
                ],
            ),
        ],
    ));

    // Covariate-optimal treated-arm lower bound when the covariate is a
    // second instrument-side cause of the treatment: sixteen terms over
    // p_{yx.zs} with explicit levels.
    sets.push(ExpressionSet::new(
        "addiv_co",
        LowerMax,
        Ey1,
        Base,
        false,
        vec![
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 0, 0)),
                    (-1.0, czs_at(0, 1, 0, 0)),
                    (-1.0, czs_at(1, 0, 0, 0)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 1, 0)),
                    (-1.0, czs_at(0, 1, 1, 0)),
                    (-1.0, czs_at(1, 0, 1, 0)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 0, 1)),
                    (-1.0, czs_at(0, 1, 0, 1)),
                    (-1.0, czs_at(1, 0, 0, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 1, 1)),
                    (-1.0, czs_at(0, 1, 1, 1)),
                    (-1.0, czs_at(1, 0, 1, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 1, 0, 0)),
                    (-1.0, czs_at(1, 0, 0, 0)),
                    (-1.0, czs_at(0, 0, 0, 1)),
                    (-1.0, czs_at(0, 1, 0, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 0, 0)),
                    (-1.0, czs_at(0, 1, 0, 0)),
                    (-1.0, czs_at(0, 1, 0, 1)),
                    (-1.0, czs_at(1, 0, 0, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 1, 0, 0)),
                    (-1.0, czs_at(1, 0, 0, 0)),
                    (-1.0, czs_at(0, 0, 1, 0)),
                    (-1.0, czs_at(0, 1, 1, 0)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 1, 0, 1)),
                    (-1.0, czs_at(1, 0, 0, 1)),
                    (-1.0, czs_at(0, 0, 1, 0)),
                    (-1.0, czs_at(0, 1, 1, 0)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 0, 0)),
                    (-1.0, czs_at(0, 1, 0, 0)),
                    (-1.0, czs_at(0, 1, 1, 0)),
                    (-1.0, czs_at(1, 0, 1, 0)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 0, 1)),
                    (-1.0, czs_at(0, 1, 0, 1)),
                    (-1.0, czs_at(0, 1, 1, 0)),
                    (-1.0, czs_at(1, 0, 1, 0)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 1, 1, 0)),
                    (-1.0, czs_at(1, 0, 1, 0)),
                    (-1.0, czs_at(0, 0, 1, 1)),
                    (-1.0, czs_at(0, 1, 1, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 1, 0, 0)),
                    (-1.0, czs_at(1, 0, 0, 0)),
                    (-1.0, czs_at(0, 0, 1, 1)),
                    (-1.0, czs_at(0, 1, 1, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 1, 0, 1)),
                    (-1.0, czs_at(1, 0, 0, 1)),
                    (-1.0, czs_at(0, 0, 1, 1)),
                    (-1.0, czs_at(0, 1, 1, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 0, 1)),
                    (-1.0, czs_at(0, 1, 0, 1)),
                    (-1.0, czs_at(0, 1, 1, 1)),
                    (-1.0, czs_at(1, 0, 1, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 0, 0)),
                    (-1.0, czs_at(0, 1, 0, 0)),
                    (-1.0, czs_at(0, 1, 1, 1)),
                    (-1.0, czs_at(1, 0, 1, 1)),
                ],
            ),
            term(
                1.0,
                vec![
                    (-1.0, czs_at(0, 0, 1, 0)),
                    (-1.0, czs_at(0, 1, 1, 0)),
                    (-1.0, czs_at(0, 1, 1, 1)),
                    (-1.0, czs_at(1, 0, 1, 1)),
                ],
            ),
        ],
    ));

    sets
}
