//! Probability tables over observed binary variables, and the push-forward
//! from a structural truth to its observed distribution.
//!
//! A table stores `2^n` nonnegative entries in lexicographic order of the
//! assignments (first declared variable most significant). The public contract
//! is named access only; positional codes are crate-internal.

use crate::model::{CausalModel, ResponseParameterization};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Input tables must sum to one within this tolerance; renormalization is
/// always explicit, never silent.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("unknown variable `{0}`")]
    UnknownVar(String),
    #[error("duplicate variable `{0}` in assignment")]
    DuplicateVar(String),
    #[error("conditioning event {0} has zero probability")]
    ZeroProbabilityEvent(String),
    #[error("table over {vars} variables needs {expected} entries, got {got}")]
    WrongLength {
        vars: usize,
        expected: usize,
        got: usize,
    },
    #[error("negative probability {value:.3e} at cell {cell}")]
    Negative { cell: String, value: f64 },
    #[error("table mass {0} is not 1 within {MASS_TOLERANCE:e}")]
    NotNormalized(f64),
    #[error("malformed distribution json: {0}")]
    Json(String),
    #[error("truth does not match the model: {0}")]
    DimensionMismatch(String),
}

/// A full joint probability table over named binary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDistribution {
    vars: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistSpec {
    vars: Vec<String>,
    p: BTreeMap<String, f64>,
}

fn bitstring(code: usize, n: usize) -> String {
    (0..n)
        .map(|i| {
            if (code >> (n - 1 - i)) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

impl ObservedDistribution {
    /// Builds a table from entries in lexicographic assignment order.
    pub fn new(vars: Vec<String>, probs: Vec<f64>) -> Result<Self, DistError> {
        let expected = 1usize << vars.len();
        if probs.len() != expected {
            return Err(DistError::WrongLength {
                vars: vars.len(),
                expected,
                got: probs.len(),
            });
        }
        let mut probs = probs;
        let mut sum = 0.0;
        for (i, p) in probs.iter_mut().enumerate() {
            if *p < -MASS_TOLERANCE {
                return Err(DistError::Negative {
                    cell: bitstring(i, vars.len()),
                    value: *p,
                });
            }
            if *p < 0.0 {
                *p = 0.0;
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(DistError::NotNormalized(sum));
        }
        Ok(ObservedDistribution { vars, probs })
    }

    pub fn from_named(vars: Vec<&str>, probs: Vec<f64>) -> Result<Self, DistError> {
        Self::new(vars.into_iter().map(String::from).collect(), probs)
    }

    /// The deterministic table with a single unit cell; used for empty
    /// variable lists (a zero-variable table is the scalar 1).
    pub fn point_mass(vars: Vec<String>, assignment: &[(String, u8)]) -> Result<Self, DistError> {
        let n = vars.len();
        let mut probs = vec![0.0; 1 << n];
        let mut code = 0usize;
        for v in &vars {
            let val = assignment
                .iter()
                .find(|(name, _)| name == v)
                .map(|(_, x)| *x)
                .ok_or_else(|| DistError::UnknownVar(v.clone()))?;
            code = (code << 1) | val as usize;
        }
        probs[code] = 1.0;
        Self::new(vars, probs)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn has_var(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v == name)
    }

    pub(crate) fn probs_raw(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn var_index(&self, name: &str) -> Result<usize, DistError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| DistError::UnknownVar(name.to_string()))
    }

    pub(crate) fn value_in_code(&self, code: usize, var_index: usize) -> u8 {
        ((code >> (self.vars.len() - 1 - var_index)) & 1) as u8
    }

    fn indices_of(&self, assignment: &[(&str, u8)]) -> Result<Vec<(usize, u8)>, DistError> {
        let mut out = Vec::with_capacity(assignment.len());
        for (name, val) in assignment {
            let idx = self.var_index(name)?;
            if out.iter().any(|(i, _)| *i == idx) {
                return Err(DistError::DuplicateVar(name.to_string()));
            }
            out.push((idx, *val));
        }
        Ok(out)
    }

    /// Probability of a (possibly partial) named assignment.
    pub fn prob_of(&self, assignment: &[(&str, u8)]) -> Result<f64, DistError> {
        let fixed = self.indices_of(assignment)?;
        let mut total = 0.0;
        for (code, p) in self.probs.iter().enumerate() {
            if fixed
                .iter()
                .all(|&(i, v)| self.value_in_code(code, i) == v)
            {
                total += p;
            }
        }
        Ok(total)
    }

    /// Conditional probability `P(event | given)`.
    pub fn cond_prob(&self, event: &[(&str, u8)], given: &[(&str, u8)]) -> Result<f64, DistError> {
        let pg = self.prob_of(given)?;
        if pg <= 0.0 {
            return Err(DistError::ZeroProbabilityEvent(format_event(given)));
        }
        let mut joint: Vec<(&str, u8)> = given.to_vec();
        joint.extend_from_slice(event);
        Ok(self.prob_of(&joint)? / pg)
    }

    /// Conditions on a partial assignment, returning the table over the
    /// remaining variables (declared order preserved).
    pub fn condition_on(&self, assignment: &[(&str, u8)]) -> Result<Self, DistError> {
        let fixed = self.indices_of(assignment)?;
        let ev = self.prob_of(assignment)?;
        if ev <= 0.0 {
            return Err(DistError::ZeroProbabilityEvent(format_event(assignment)));
        }
        let keep: Vec<usize> = (0..self.vars.len())
            .filter(|i| !fixed.iter().any(|(j, _)| j == i))
            .collect();
        let mut probs = vec![0.0; 1 << keep.len()];
        for (code, p) in self.probs.iter().enumerate() {
            if fixed
                .iter()
                .all(|&(i, v)| self.value_in_code(code, i) == v)
            {
                let mut sub = 0usize;
                for &i in &keep {
                    sub = (sub << 1) | self.value_in_code(code, i) as usize;
                }
                probs[sub] += p / ev;
            }
        }
        let vars = keep.iter().map(|&i| self.vars[i].clone()).collect();
        // Division by the event mass keeps the result within tolerance of 1.
        Self::new(vars, probs)
    }

    /// Sums out the named variables; order of the remaining ones is preserved.
    pub fn marginalize_out(&self, names: &[&str]) -> Result<Self, DistError> {
        let mut drop = Vec::with_capacity(names.len());
        for name in names {
            let idx = self.var_index(name)?;
            if !drop.contains(&idx) {
                drop.push(idx);
            }
        }
        let keep: Vec<usize> = (0..self.vars.len()).filter(|i| !drop.contains(i)).collect();
        let mut probs = vec![0.0; 1 << keep.len()];
        for (code, p) in self.probs.iter().enumerate() {
            let mut sub = 0usize;
            for &i in &keep {
                sub = (sub << 1) | self.value_in_code(code, i) as usize;
            }
            probs[sub] += p;
        }
        let vars = keep.iter().map(|&i| self.vars[i].clone()).collect();
        Self::new(vars, probs)
    }

    /// Explicitly rescales the table to unit mass.
    pub fn renormalized(&self) -> Self {
        let sum: f64 = self.probs.iter().sum();
        ObservedDistribution {
            vars: self.vars.clone(),
            probs: self.probs.iter().map(|p| p / sum).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut p = BTreeMap::new();
        for (code, &prob) in self.probs.iter().enumerate() {
            if prob != 0.0 {
                p.insert(bitstring(code, self.vars.len()), prob);
            }
        }
        serde_json::to_string_pretty(&DistSpec {
            vars: self.vars.clone(),
            p,
        })
        .expect("distribution serialization cannot fail")
    }

    /// Parses `{"vars": [...], "p": {"bitstring": prob, ...}}`; omitted cells
    /// are zero.
    pub fn from_json(text: &str) -> Result<Self, DistError> {
        let spec: DistSpec =
            serde_json::from_str(text).map_err(|e| DistError::Json(e.to_string()))?;
        let n = spec.vars.len();
        let mut probs = vec![0.0; 1 << n];
        for (key, value) in &spec.p {
            if key.len() != n || !key.chars().all(|c| c == '0' || c == '1') {
                return Err(DistError::Json(format!(
                    "key `{key}` is not a {n}-bit assignment string"
                )));
            }
            let code = usize::from_str_radix(key, 2).expect("validated bitstring");
            probs[code] = *value;
        }
        Self::new(spec.vars, probs)
    }
}

fn format_event(assignment: &[(&str, u8)]) -> String {
    let parts: Vec<String> = assignment
        .iter()
        .map(|(name, val)| format!("{name}={val}"))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

/// A full structural hypothesis: a distribution over joint response types plus
/// the observed left-block joint.
#[derive(Debug, Clone)]
pub struct StructuralTruth {
    pub model: String,
    /// Probability of each joint response type (the right-block latent).
    pub type_probs: Vec<f64>,
    /// Joint table over the left-block variables (a zero-variable table for
    /// models with an empty left block).
    pub left_joint: ObservedDistribution,
    /// Average treatment effect implied by `type_probs`.
    pub theta_true: f64,
}

impl StructuralTruth {
    pub fn new(
        model: &CausalModel,
        param: &ResponseParameterization,
        type_probs: Vec<f64>,
        left_joint: ObservedDistribution,
    ) -> Result<Self, DistError> {
        if type_probs.len() != param.type_count() {
            return Err(DistError::DimensionMismatch(format!(
                "{} type probabilities for a {}-type model",
                type_probs.len(),
                param.type_count()
            )));
        }
        if left_joint.vars() != model.left_block() {
            return Err(DistError::DimensionMismatch(format!(
                "left joint over {:?}, model left block is {:?}",
                left_joint.vars(),
                model.left_block()
            )));
        }
        let sum: f64 = type_probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(DistError::NotNormalized(sum));
        }
        if let Some(q) = type_probs.iter().find(|q| **q < 0.0) {
            return Err(DistError::Negative {
                cell: "type".into(),
                value: *q,
            });
        }
        let theta_true = recompute_theta(param, &type_probs, &left_joint);
        Ok(StructuralTruth {
            model: model.name().to_string(),
            type_probs,
            left_joint,
            theta_true,
        })
    }
}

/// Average treatment effect `E[Y(1) - Y(0)]` implied by a type distribution.
/// Left-block weights matter only if an intervened outcome evaluation reads a
/// left-block parent, which none of the builtin models do.
pub fn recompute_theta(
    param: &ResponseParameterization,
    type_probs: &[f64],
    left_joint: &ObservedDistribution,
) -> f64 {
    let lw = left_joint.probs_raw();
    let mut theta = 0.0;
    for (t, q) in type_probs.iter().enumerate() {
        if *q == 0.0 {
            continue;
        }
        let mut effect = 0.0;
        for (l, w) in lw.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let dy = param.outcome_under_do(l, t, 1) as f64 - param.outcome_under_do(l, t, 0) as f64;
            effect += w * dy;
        }
        theta += q * effect;
    }
    theta
}

/// Pushes a structural truth forward to the full observed joint:
/// `P(left, right) = P_left(left) * sum of q over types mapping left to right`.
pub fn pushforward_observed(
    model: &CausalModel,
    truth: &StructuralTruth,
) -> Result<ObservedDistribution, DistError> {
    let param = crate::model::parameterize(model)
        .map_err(|e| DistError::DimensionMismatch(e.to_string()))?;
    pushforward_with_param(model, &param, truth)
}

/// Push-forward with a precomputed parameterization (hot-loop variant).
pub fn pushforward_with_param(
    model: &CausalModel,
    param: &ResponseParameterization,
    truth: &StructuralTruth,
) -> Result<ObservedDistribution, DistError> {
    if truth.type_probs.len() != param.type_count() {
        return Err(DistError::DimensionMismatch(format!(
            "{} type probabilities for a {}-type model",
            truth.type_probs.len(),
            param.type_count()
        )));
    }
    if truth.left_joint.vars() != model.left_block() {
        return Err(DistError::DimensionMismatch(
            "left joint variables do not match the model's left block".into(),
        ));
    }
    let n = model.vars().len();
    let left = model.left_block();
    let right = model.right_block();
    // Bit position of each model variable inside the left or right code.
    let slots: Vec<(bool, usize)> = model
        .vars()
        .iter()
        .map(|v| {
            if let Some(i) = left.iter().position(|w| w == v) {
                (true, left.len() - 1 - i)
            } else {
                let i = right.iter().position(|w| w == v).expect("block partition");
                (false, right.len() - 1 - i)
            }
        })
        .collect();
    let mut probs = vec![0.0; 1 << n];
    let lw = truth.left_joint.probs_raw();
    for (l, w) in lw.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        for (t, q) in truth.type_probs.iter().enumerate() {
            if *q == 0.0 {
                continue;
            }
            let r = param.natural_right_code(l, t);
            let mut code = 0usize;
            for (is_left, bit) in &slots {
                let v = if *is_left { (l >> bit) & 1 } else { (r >> bit) & 1 };
                code = (code << 1) | v;
            }
            probs[code] += w * q;
        }
    }
    ObservedDistribution::new(model.vars().to_vec(), probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, parameterize};
    use proptest::prelude::*;

    fn uniform(vars: Vec<&str>) -> ObservedDistribution {
        let n = vars.len();
        ObservedDistribution::from_named(vars, vec![1.0 / (1 << n) as f64; 1 << n]).unwrap()
    }

    /// Deterministic non-uniform type distribution for fixture truths.
    fn ramp(n: usize) -> Vec<f64> {
        let total: f64 = (1..=n).map(|i| i as f64).sum();
        (1..=n).map(|i| i as f64 / total).collect()
    }

    #[test]
    fn condition_uniform_on_x() {
        let d = uniform(vec!["X", "Y"]);
        let c = d.condition_on(&[("X", 1)]).unwrap();
        assert_eq!(c.vars(), ["Y"]);
        assert!((c.prob_of(&[("Y", 0)]).unwrap() - 0.5).abs() < 1e-15);
        assert!((c.prob_of(&[("Y", 1)]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn condition_on_zero_probability_event_fails() {
        // All mass on (X=0, Y=1).
        let d = ObservedDistribution::from_named(vec!["X", "Y"], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let err = d.condition_on(&[("X", 1)]).unwrap_err();
        assert!(matches!(err, DistError::ZeroProbabilityEvent(_)));
        assert!(err.to_string().contains("X=1"));
    }

    #[test]
    fn condition_two_point_table_on_stratum() {
        // P(X=0,Y=1,S=1) = 0.5 and P(X=1,Y=1,S=0) = 0.5.
        let mut probs = vec![0.0; 8];
        probs[0b011] = 0.5;
        probs[0b110] = 0.5;
        let d = ObservedDistribution::from_named(vec!["X", "Y", "S"], probs).unwrap();
        let c = d.condition_on(&[("S", 1)]).unwrap();
        assert!((c.prob_of(&[("X", 0), ("Y", 1)]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginalize_nothing_is_identity() {
        let d = uniform(vec!["X", "Y"]);
        assert_eq!(d.marginalize_out(&[]).unwrap(), d);
    }

    #[test]
    fn marginalize_product_table() {
        // P(Z)P(X) with P(Z=1)=0.3, P(X=1)=0.8.
        let d = ObservedDistribution::from_named(
            vec!["Z", "X"],
            vec![0.7 * 0.2, 0.7 * 0.8, 0.3 * 0.2, 0.3 * 0.8],
        )
        .unwrap();
        let m = d.marginalize_out(&["Z"]).unwrap();
        assert_eq!(m.vars(), ["X"]);
        assert!((m.prob_of(&[("X", 1)]).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn unknown_variable_is_reported() {
        let d = uniform(vec!["X", "Y"]);
        assert!(matches!(
            d.marginalize_out(&["W"]),
            Err(DistError::UnknownVar(_))
        ));
    }

    #[test]
    fn rejects_unnormalized_table() {
        let err = ObservedDistribution::from_named(vec!["X"], vec![0.5, 0.6]).unwrap_err();
        assert!(matches!(err, DistError::NotNormalized(_)));
    }

    #[test]
    fn pushforward_perfect_compliance() {
        let m = builtin_model("iv_base").unwrap();
        let p = parameterize(&m).unwrap();
        // Point mass on the type (X=Z, Y=X); see the model module tests.
        let mut q = vec![0.0; 16];
        q[10] = 1.0;
        let left = ObservedDistribution::from_named(vec!["Z"], vec![0.5, 0.5]).unwrap();
        let truth = StructuralTruth::new(&m, &p, q, left).unwrap();
        let d = pushforward_observed(&m, &truth).unwrap();
        assert!((d.prob_of(&[("Z", 1), ("X", 1), ("Y", 1)]).unwrap() - 0.5).abs() < 1e-15);
        assert!((d.prob_of(&[("Z", 0), ("X", 0), ("Y", 0)]).unwrap() - 0.5).abs() < 1e-15);
        assert!((truth.theta_true - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pushforward_setting_e_normalizes_and_separates() {
        let m = builtin_model("e").unwrap();
        let p = parameterize(&m).unwrap();
        let q = ramp(512);
        let left = ObservedDistribution::from_named(vec!["Z"], vec![0.6, 0.4]).unwrap();
        let truth = StructuralTruth::new(&m, &p, q, left).unwrap();
        let d = pushforward_observed(&m, &truth).unwrap();
        let total: f64 = (0..16)
            .map(|c| {
                d.prob_of(&[
                    ("Z", ((c >> 3) & 1) as u8),
                    ("S", ((c >> 2) & 1) as u8),
                    ("X", ((c >> 1) & 1) as u8),
                    ("Y", (c & 1) as u8),
                ])
                .unwrap()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        for z in 0..2u8 {
            let c = d.condition_on(&[("Z", z)]).unwrap();
            let mass: f64 = c.probs_raw().iter().sum();
            assert!((mass - 1.0).abs() < 1e-12);
        }
        // The covariate is independent of the instrument by construction.
        for s in 0..2u8 {
            let p0 = d.cond_prob(&[("S", s)], &[("Z", 0)]).unwrap();
            let p1 = d.cond_prob(&[("S", s)], &[("Z", 1)]).unwrap();
            assert!((p0 - p1).abs() < 1e-12);
        }
    }

    #[test]
    fn pushforward_setting_f_is_z_invariant_within_strata() {
        let m = builtin_model("f").unwrap();
        let p = parameterize(&m).unwrap();
        let q = ramp(16);
        let left =
            ObservedDistribution::from_named(vec!["Z", "S"], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let truth = StructuralTruth::new(&m, &p, q, left).unwrap();
        let d = pushforward_observed(&m, &truth).unwrap();
        for s in 0..2u8 {
            for x in 0..2u8 {
                for y in 0..2u8 {
                    let p0 = d.cond_prob(&[("X", x), ("Y", y)], &[("Z", 0), ("S", s)]).unwrap();
                    let p1 = d.cond_prob(&[("X", x), ("Y", y)], &[("Z", 1), ("S", s)]).unwrap();
                    assert!((p0 - p1).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn theta_is_recomputable() {
        let m = builtin_model("e").unwrap();
        let p = parameterize(&m).unwrap();
        let q = ramp(512);
        let left = ObservedDistribution::from_named(vec!["Z"], vec![0.25, 0.75]).unwrap();
        let truth = StructuralTruth::new(&m, &p, q.clone(), left.clone()).unwrap();
        assert_eq!(truth.theta_true, recompute_theta(&p, &q, &left));
    }

    #[test]
    fn json_round_trip_with_omitted_zeros() {
        let mut probs = vec![0.0; 16];
        probs[0b0101] = 0.25;
        probs[0b1010] = 0.75;
        let d = ObservedDistribution::from_named(vec!["Z", "S", "X", "Y"], probs).unwrap();
        let text = d.to_json();
        let back = ObservedDistribution::from_json(&text).unwrap();
        assert_eq!(d, back);
        assert!(ObservedDistribution::from_json("{\"vars\":[\"X\"],\"p\":{\"2\":1.0}}").is_err());
    }

    proptest! {
        /// Conditioning and marginalizing commute with direct computation on
        /// the joint, exhaustively over the cells of 3-variable tables.
        #[test]
        fn condition_then_marginalize_commutes(raw in proptest::collection::vec(0.01f64..1.0, 8)) {
            let sum: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|p| p / sum).collect();
            let d = ObservedDistribution::from_named(vec!["A", "B", "C"], probs).unwrap();
            for b in 0..2u8 {
                let cm = d.condition_on(&[("B", b)]).unwrap().marginalize_out(&["C"]).unwrap();
                for a in 0..2u8 {
                    let direct = d.prob_of(&[("A", a), ("B", b)]).unwrap()
                        / d.prob_of(&[("B", b)]).unwrap();
                    prop_assert!((cm.prob_of(&[("A", a)]).unwrap() - direct).abs() < 1e-12);
                }
            }
        }

        /// Total mass is conserved by marginalization.
        #[test]
        fn marginalization_conserves_mass(raw in proptest::collection::vec(0.0f64..1.0, 8)) {
            let sum: f64 = raw.iter().sum();
            prop_assume!(sum > 1e-3);
            let probs: Vec<f64> = raw.iter().map(|p| p / sum).collect();
            let d = ObservedDistribution::from_named(vec!["A", "B", "C"], probs).unwrap();
            let m = d.marginalize_out(&["B"]).unwrap();
            let total: f64 = m.probs_raw().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
