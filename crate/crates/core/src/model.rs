//! Causal models over binary observed variables and their response-function
//! parameterizations.
//!
//! A model splits its observed variables into a *left block* (instrument side)
//! and a *right block* whose members are jointly confounded by a single latent.
//! The latent's influence on the right block is discretized by canonical
//! response-function types: every right-block variable gets one deterministic
//! map from its observed parents to a value, and a joint type picks one map per
//! variable. A distribution over joint types, together with a free joint
//! distribution over the left block, reproduces exactly the set of observed
//! distributions the model allows.
//!
//! Encoding conventions used throughout the crate:
//!
//! * An assignment to an ordered variable list `(v1, .., vk)` is encoded as an
//!   integer in `[0, 2^k)` with `v1` in the most significant bit, which makes
//!   the code equal to the lexicographic index of the assignment.
//! * A response function for a variable with `k` parents is indexed by an
//!   integer `j` in `[0, 2^(2^k))`: its value on the parent assignment with
//!   code `a` is bit `a` of `j` (least significant bit = assignment `0..0`).
//! * A joint type is a mixed-radix number over the right-block variables in
//!   declared order, first variable most significant.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Identifiers accepted by [`builtin_model`].
pub const BUILTIN_IDS: &[&str] = &[
    "iv_base",
    "confounded_pair",
    "s_model_1",
    "s_model_2",
    "a",
    "b",
    "c",
    "d",
    "e",
    "f",
    "mediator",
];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model id `{0}`; valid ids: {}", BUILTIN_IDS.join(", "))]
    UnknownId(String),
    #[error("model `{0}`: {1}")]
    Invalid(String, String),
    #[error("model `{0}` has no LP parameterization (strategy is BACKDOOR_ONLY)")]
    NoLpParameterization(String),
    #[error("malformed model json: {0}")]
    Json(String),
}

/// How bounds for the model are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentificationStrategy {
    /// Linear program over response-function types.
    #[serde(rename = "LP")]
    Lp,
    /// No single-latent right block exists; only back-door identification
    /// (and closed-form bounds on the observed margin) apply.
    #[serde(rename = "BACKDOOR_ONLY")]
    BackdoorOnly,
}

/// Which block the designated covariate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateSide {
    Left,
    Right,
}

/// A binary-variable structural model with a left (instrument-side) block and
/// a right (confounded-side) block.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalModel {
    name: String,
    vars: Vec<String>,
    edges: Vec<(String, String)>,
    left: Vec<String>,
    right: Vec<String>,
    exogenous: Vec<String>,
    treatment: String,
    outcome: String,
    covariate: Option<String>,
    strategy: IdentificationStrategy,
}

/// Serialized form of a model, matching the model JSON schema.
#[derive(Serialize, Deserialize)]
struct ModelSpec {
    name: String,
    vars: Vec<String>,
    edges: Vec<(String, String)>,
    left: Vec<String>,
    right: Vec<String>,
    #[serde(default)]
    exogenous: Vec<String>,
    treatment: String,
    outcome: String,
    #[serde(default)]
    covariate: Option<String>,
    strategy: IdentificationStrategy,
}

impl CausalModel {
    /// Builds and validates a model. All domains are binary by construction.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        vars: Vec<&str>,
        edges: Vec<(&str, &str)>,
        left: Vec<&str>,
        right: Vec<&str>,
        exogenous: Vec<&str>,
        treatment: &str,
        outcome: &str,
        covariate: Option<&str>,
        strategy: IdentificationStrategy,
    ) -> Result<Self, ModelError> {
        let spec = ModelSpec {
            name: name.into(),
            vars: vars.into_iter().map(String::from).collect(),
            edges: edges
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            left: left.into_iter().map(String::from).collect(),
            right: right.into_iter().map(String::from).collect(),
            exogenous: exogenous.into_iter().map(String::from).collect(),
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
            covariate: covariate.map(String::from),
            strategy,
        };
        Self::from_spec(spec)
    }

    fn from_spec(spec: ModelSpec) -> Result<Self, ModelError> {
        let m = CausalModel {
            name: spec.name,
            vars: spec.vars,
            edges: spec.edges,
            left: spec.left,
            right: spec.right,
            exogenous: spec.exogenous,
            treatment: spec.treatment,
            outcome: spec.outcome,
            covariate: spec.covariate,
            strategy: spec.strategy,
        };
        m.validate()?;
        Ok(m)
    }

    fn invalid(&self, msg: impl Into<String>) -> ModelError {
        ModelError::Invalid(self.name.clone(), msg.into())
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.vars.is_empty() {
            return Err(self.invalid("no observed variables"));
        }
        let unique: BTreeSet<&String> = self.vars.iter().collect();
        if unique.len() != self.vars.len() {
            return Err(self.invalid("duplicate variable names"));
        }
        let known = |v: &String| self.vars.contains(v);
        for (a, b) in &self.edges {
            if !known(a) || !known(b) {
                return Err(self.invalid(format!("edge ({a},{b}) references unknown variable")));
            }
            if a == b {
                return Err(self.invalid(format!("self-loop on {a}")));
            }
        }
        if self.topological_order(&self.vars).is_none() {
            return Err(self.invalid("edge set is cyclic"));
        }
        // Left and right blocks partition the observed variables.
        for v in self.left.iter().chain(self.right.iter()) {
            if !known(v) {
                return Err(self.invalid(format!("block member {v} is not a variable")));
            }
        }
        let left_set: BTreeSet<&String> = self.left.iter().collect();
        let right_set: BTreeSet<&String> = self.right.iter().collect();
        if left_set.intersection(&right_set).next().is_some() {
            return Err(self.invalid("left and right blocks overlap"));
        }
        if left_set.len() + right_set.len() != self.vars.len() {
            return Err(self.invalid("blocks do not cover all observed variables"));
        }
        if !right_set.contains(&self.treatment) {
            return Err(self.invalid("treatment must be in the right block"));
        }
        if !right_set.contains(&self.outcome) {
            return Err(self.invalid("outcome must be in the right block"));
        }
        for (a, b) in &self.edges {
            if right_set.contains(a) && left_set.contains(b) {
                return Err(self.invalid(format!("edge ({a},{b}) runs from right to left block")));
            }
        }
        for v in &self.exogenous {
            if !known(v) {
                return Err(self.invalid(format!("exogenous member {v} is not a variable")));
            }
            if self.edges.iter().any(|(_, b)| b == v) {
                return Err(self.invalid(format!("exogenous variable {v} has observed parents")));
            }
        }
        if let Some(c) = &self.covariate {
            if !known(c) {
                return Err(self.invalid(format!("covariate {c} is not a variable")));
            }
        }
        Ok(())
    }

    /// Deterministic topological order of `subset` (lowest declared index
    /// first among ready nodes); `None` if the edges restricted to `subset`
    /// are cyclic.
    fn topological_order(&self, subset: &[String]) -> Option<Vec<usize>> {
        let n = subset.len();
        let pos = |v: &String| subset.iter().position(|w| w == v);
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b) in &self.edges {
            if let (Some(i), Some(j)) = (pos(a), pos(b)) {
                out[i].push(j);
                indeg[j] += 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(&i) = ready.iter().min() {
            ready.retain(|&j| j != i);
            order.push(i);
            for &j in &out[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn left_block(&self) -> &[String] {
        &self.left
    }

    pub fn right_block(&self) -> &[String] {
        &self.right
    }

    pub fn exogenous(&self) -> &[String] {
        &self.exogenous
    }

    pub fn treatment(&self) -> &str {
        &self.treatment
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn covariate(&self) -> Option<&str> {
        self.covariate.as_deref()
    }

    pub fn strategy(&self) -> IdentificationStrategy {
        self.strategy
    }

    /// Side of the designated covariate, if one is declared.
    pub fn covariate_side(&self) -> Option<CovariateSide> {
        let c = self.covariate.as_ref()?;
        if self.left.contains(c) {
            Some(CovariateSide::Left)
        } else {
            Some(CovariateSide::Right)
        }
    }

    /// Observed parents of `v`, in declared variable order.
    pub fn parents_of(&self, v: &str) -> Vec<String> {
        self.vars
            .iter()
            .filter(|p| self.edges.iter().any(|(a, b)| a == *p && b == v))
            .cloned()
            .collect()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|(a, b)| a == from && b == to)
    }

    pub fn to_json(&self) -> String {
        let spec = ModelSpec {
            name: self.name.clone(),
            vars: self.vars.clone(),
            edges: self.edges.clone(),
            left: self.left.clone(),
            right: self.right.clone(),
            exogenous: self.exogenous.clone(),
            treatment: self.treatment.clone(),
            outcome: self.outcome.clone(),
            covariate: self.covariate.clone(),
            strategy: self.strategy,
        };
        serde_json::to_string_pretty(&spec).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let spec: ModelSpec =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        Self::from_spec(spec)
    }
}

/// Returns one of the builtin models by id.
pub fn builtin_model(id: &str) -> Result<CausalModel, ModelError> {
    use IdentificationStrategy::*;
    let m = match id {
        "iv_base" => CausalModel::new(
            id,
            vec!["Z", "X", "Y"],
            vec![("Z", "X"), ("X", "Y")],
            vec!["Z"],
            vec!["X", "Y"],
            vec!["Z"],
            "X",
            "Y",
            None,
            Lp,
        ),
        "confounded_pair" => CausalModel::new(
            id,
            vec!["X", "Y"],
            vec![("X", "Y")],
            vec![],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            None,
            Lp,
        ),
        "s_model_1" => CausalModel::new(
            id,
            vec!["S", "X", "Y"],
            vec![("S", "X"), ("X", "Y")],
            vec!["S"],
            vec!["X", "Y"],
            vec!["S"],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "s_model_2" => CausalModel::new(
            id,
            vec!["S", "X", "Y"],
            vec![("S", "X"), ("S", "Y"), ("X", "Y")],
            vec![],
            vec!["S", "X", "Y"],
            vec![],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "a" => CausalModel::new(
            id,
            vec!["Z", "S", "X", "Y"],
            vec![("S", "Z"), ("Z", "X"), ("X", "Y")],
            vec!["Z", "S"],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "b" => CausalModel::new(
            id,
            vec!["Z", "S", "X", "Y"],
            vec![("Z", "S"), ("Z", "X"), ("X", "Y")],
            vec!["Z", "S"],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "c" => CausalModel::new(
            id,
            vec!["Z", "S", "X", "Y"],
            vec![("S", "Z"), ("S", "X"), ("Z", "X"), ("X", "Y")],
            vec!["Z", "S"],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "d" => CausalModel::new(
            id,
            vec!["Z", "S", "X", "Y"],
            vec![("Z", "S"), ("S", "X"), ("Z", "X"), ("X", "Y")],
            vec!["Z", "S"],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "e" => CausalModel::new(
            id,
            vec!["Z", "S", "X", "Y"],
            vec![("S", "X"), ("S", "Y"), ("Z", "X"), ("X", "Y")],
            vec!["Z"],
            vec!["S", "X", "Y"],
            vec!["Z"],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "f" => CausalModel::new(
            id,
            vec!["Z", "S", "X", "Y"],
            vec![("Z", "S"), ("S", "X"), ("X", "Y")],
            vec!["Z", "S"],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            Some("S"),
            Lp,
        ),
        "mediator" => CausalModel::new(
            id,
            vec!["Z", "S", "X", "Y"],
            vec![("Z", "X"), ("S", "Y"), ("X", "Y")],
            vec!["Z"],
            vec!["S", "X", "Y"],
            vec!["Z"],
            "X",
            "Y",
            Some("S"),
            BackdoorOnly,
        ),
        other => return Err(ModelError::UnknownId(other.to_string())),
    };
    m
}

/// One right-block variable with its enumerated response functions.
#[derive(Debug, Clone)]
pub struct ResponseVar {
    pub name: String,
    /// Observed parents in declared variable order.
    pub parents: Vec<String>,
    /// Number of response functions: `2^(2^k)` for `k` parents.
    pub fn_count: usize,
    /// For each parent: `Ok(i)` = position in the left block, `Err(j)` =
    /// position in the right block.
    parent_slots: Vec<Result<usize, usize>>,
}

/// The canonical response-function index space of a model's right block.
#[derive(Debug, Clone)]
pub struct ResponseParameterization {
    model_name: String,
    left_vars: Vec<String>,
    right_vars: Vec<ResponseVar>,
    /// Positions into `right_vars`, in evaluation (topological) order.
    eval_order: Vec<usize>,
    treatment_pos: usize,
    outcome_pos: usize,
    type_count: usize,
}

impl ResponseParameterization {
    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn left_vars(&self) -> &[String] {
        &self.left_vars
    }

    pub fn right_vars(&self) -> &[ResponseVar] {
        &self.right_vars
    }

    /// Cardinality of the joint type space.
    pub fn type_count(&self) -> usize {
        self.type_count
    }

    pub fn left_cell_count(&self) -> usize {
        1 << self.left_vars.len()
    }

    pub fn right_cell_count(&self) -> usize {
        1 << self.right_vars.len()
    }

    /// Decomposes a joint type into per-variable response-function indices
    /// (declared right-block order).
    pub fn split_type(&self, mut t: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.right_vars.len()];
        for pos in (0..self.right_vars.len()).rev() {
            idx[pos] = t % self.right_vars[pos].fn_count;
            t /= self.right_vars[pos].fn_count;
        }
        idx
    }

    fn eval(&self, left_code: usize, t: usize, forced_treatment: Option<u8>) -> usize {
        let fns = self.split_type(t);
        let k_left = self.left_vars.len();
        let mut right_vals = vec![0u8; self.right_vars.len()];
        for &pos in &self.eval_order {
            let rv = &self.right_vars[pos];
            let val = if pos == self.treatment_pos && forced_treatment.is_some() {
                forced_treatment.unwrap()
            } else {
                let mut a = 0usize;
                for slot in &rv.parent_slots {
                    let bit = match *slot {
                        Ok(li) => ((left_code >> (k_left - 1 - li)) & 1) as u8,
                        Err(ri) => right_vals[ri],
                    };
                    a = (a << 1) | bit as usize;
                }
                ((fns[pos] >> a) & 1) as u8
            };
            right_vals[pos] = val;
        }
        let mut code = 0usize;
        for v in &right_vals {
            code = (code << 1) | *v as usize;
        }
        code
    }

    /// Right-block assignment code produced by joint type `t` on the left
    /// assignment `left_code` (deterministic push-forward).
    pub fn natural_right_code(&self, left_code: usize, t: usize) -> usize {
        self.eval(left_code, t, None)
    }

    /// Outcome value under an intervention setting the treatment to `x`;
    /// all other right-block variables follow their response functions.
    pub fn outcome_under_do(&self, left_code: usize, t: usize, x: u8) -> u8 {
        let code = self.eval(left_code, t, Some(x));
        self.right_value(code, self.outcome_pos)
    }

    /// Value of the covariate within the right block under type `t` (natural,
    /// no intervention). Only meaningful when the covariate is right-block.
    pub fn right_var_natural_value(&self, left_code: usize, t: usize, pos: usize) -> u8 {
        let code = self.eval(left_code, t, None);
        self.right_value(code, pos)
    }

    /// Extracts one variable's value from a right-block assignment code.
    pub fn right_value(&self, right_code: usize, pos: usize) -> u8 {
        let k = self.right_vars.len();
        ((right_code >> (k - 1 - pos)) & 1) as u8
    }

    /// Position of a variable in the right block, if present.
    pub fn right_pos(&self, name: &str) -> Option<usize> {
        self.right_vars.iter().position(|rv| rv.name == name)
    }
}

/// Enumerates the canonical response-function types of an LP model.
///
/// The enumeration is deterministic: response functions are ordered by their
/// truth tables (parents in declared order), and joint types are mixed-radix
/// numbers over the right-block variables in declared order.
pub fn parameterize(m: &CausalModel) -> Result<ResponseParameterization, ModelError> {
    if m.strategy() != IdentificationStrategy::Lp {
        return Err(ModelError::NoLpParameterization(m.name().to_string()));
    }
    let left_vars: Vec<String> = m.left_block().to_vec();
    let right_names: Vec<String> = m.right_block().to_vec();
    let mut right_vars = Vec::with_capacity(right_names.len());
    for name in &right_names {
        let parents = m.parents_of(name);
        let parent_slots = parents
            .iter()
            .map(|p| {
                if let Some(i) = left_vars.iter().position(|v| v == p) {
                    Ok(i)
                } else {
                    Err(right_names
                        .iter()
                        .position(|v| v == p)
                        .expect("parent must be observed"))
                }
            })
            .collect();
        let k = parents.len();
        if k > 4 {
            return Err(ModelError::Invalid(
                m.name().to_string(),
                format!("{name} has {k} observed parents; response enumeration capped at 4"),
            ));
        }
        right_vars.push(ResponseVar {
            name: name.clone(),
            parents,
            fn_count: 1usize << (1usize << k),
            parent_slots,
        });
    }
    let eval_order = m
        .topological_order(&right_names)
        .expect("validated model is acyclic");
    let type_count = right_vars.iter().map(|rv| rv.fn_count).product();
    Ok(ResponseParameterization {
        model_name: m.name().to_string(),
        left_vars,
        treatment_pos: right_names
            .iter()
            .position(|v| v == m.treatment())
            .expect("treatment is right-block"),
        outcome_pos: right_names
            .iter()
            .position(|v| v == m.outcome())
            .expect("outcome is right-block"),
        right_vars,
        eval_order,
        type_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_ids_all_resolve() {
        for id in BUILTIN_IDS {
            builtin_model(id).unwrap();
        }
    }

    #[test]
    fn unknown_id_lists_valid_ids() {
        let err = builtin_model("nope").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nope"));
        assert!(msg.contains("iv_base"));
        assert!(msg.contains("mediator"));
    }

    #[test]
    fn iv_base_shape() {
        let m = builtin_model("iv_base").unwrap();
        assert!(m.has_edge("Z", "X") && m.has_edge("X", "Y"));
        assert_eq!(m.right_block(), ["X", "Y"]);
        assert_eq!(m.left_block(), ["Z"]);
    }

    #[test]
    fn setting_e_shape() {
        let m = builtin_model("e").unwrap();
        assert_eq!(m.right_block(), ["S", "X", "Y"]);
        assert_eq!(m.exogenous(), ["Z"]);
        assert_eq!(m.parents_of("X"), ["Z", "S"]);
        assert_eq!(m.parents_of("Y"), ["S", "X"]);
    }

    #[test]
    fn setting_f_has_no_direct_instrument_edge() {
        let m = builtin_model("f").unwrap();
        assert!(m.has_edge("Z", "S") && m.has_edge("S", "X") && m.has_edge("X", "Y"));
        assert!(!m.has_edge("Z", "X"));
    }

    /// Golden adjacency tables for the six simulation settings.
    #[test]
    fn settings_a_to_f_golden_edges() {
        let expect: &[(&str, &[(&str, &str)])] = &[
            ("a", &[("S", "Z"), ("Z", "X"), ("X", "Y")]),
            ("b", &[("Z", "S"), ("Z", "X"), ("X", "Y")]),
            ("c", &[("S", "Z"), ("S", "X"), ("Z", "X"), ("X", "Y")]),
            ("d", &[("Z", "S"), ("S", "X"), ("Z", "X"), ("X", "Y")]),
            ("e", &[("S", "X"), ("S", "Y"), ("Z", "X"), ("X", "Y")]),
            ("f", &[("Z", "S"), ("S", "X"), ("X", "Y")]),
        ];
        for (id, edges) in expect {
            let m = builtin_model(id).unwrap();
            let got: BTreeSet<(String, String)> = m.edges().iter().cloned().collect();
            let want: BTreeSet<(String, String)> = edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            assert_eq!(got, want, "edges of setting {id}");
        }
    }

    #[test]
    fn type_counts() {
        assert_eq!(
            parameterize(&builtin_model("iv_base").unwrap())
                .unwrap()
                .type_count(),
            16
        );
        assert_eq!(
            parameterize(&builtin_model("e").unwrap())
                .unwrap()
                .type_count(),
            512
        );
        assert_eq!(
            parameterize(&builtin_model("c").unwrap())
                .unwrap()
                .type_count(),
            64
        );
        assert_eq!(
            parameterize(&builtin_model("s_model_2").unwrap())
                .unwrap()
                .type_count(),
            128
        );
        assert_eq!(
            parameterize(&builtin_model("confounded_pair").unwrap())
                .unwrap()
                .type_count(),
            8
        );
    }

    #[test]
    fn backdoor_only_has_no_parameterization() {
        let m = builtin_model("mediator").unwrap();
        assert!(matches!(
            parameterize(&m),
            Err(ModelError::NoLpParameterization(_))
        ));
    }

    #[test]
    fn parameterize_is_deterministic() {
        let m = builtin_model("e").unwrap();
        let p1 = parameterize(&m).unwrap();
        let p2 = parameterize(&m).unwrap();
        for t in 0..p1.type_count() {
            for l in 0..p1.left_cell_count() {
                assert_eq!(p1.natural_right_code(l, t), p2.natural_right_code(l, t));
            }
        }
    }

    /// Every (type, left assignment) pair yields exactly one right assignment.
    #[test]
    fn pushforward_is_deterministic_and_total() {
        for id in BUILTIN_IDS {
            let m = builtin_model(id).unwrap();
            if m.strategy() != IdentificationStrategy::Lp {
                continue;
            }
            let p = parameterize(&m).unwrap();
            for l in 0..p.left_cell_count() {
                for t in 0..p.type_count() {
                    let r1 = p.natural_right_code(l, t);
                    let r2 = p.natural_right_code(l, t);
                    assert_eq!(r1, r2);
                    assert!(r1 < p.right_cell_count());
                }
            }
        }
    }

    #[test]
    fn iv_base_response_semantics() {
        // Type layout for iv_base: t = 4*jx + jy with jx the truth table of
        // z -> x and jy the truth table of x -> y. Type (X=Z, Y=X) means
        // jx = 0b10 = 2 and jy = 0b10 = 2, so t = 10.
        let m = builtin_model("iv_base").unwrap();
        let p = parameterize(&m).unwrap();
        let t = 4 * 2 + 2;
        assert_eq!(p.natural_right_code(0, t), 0b00);
        assert_eq!(p.natural_right_code(1, t), 0b11);
        assert_eq!(p.outcome_under_do(0, t, 1), 1);
        assert_eq!(p.outcome_under_do(1, t, 0), 0);
    }

    #[test]
    fn model_json_round_trip() {
        let m = builtin_model("e").unwrap();
        let text = m.to_json();
        let back = CausalModel::from_json(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_right_to_left_edge() {
        let err = CausalModel::new(
            "bad",
            vec!["Z", "X", "Y"],
            vec![("X", "Z"), ("X", "Y")],
            vec!["Z"],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            None,
            IdentificationStrategy::Lp,
        )
        .unwrap_err();
        assert!(err.to_string().contains("right to left"));
    }

    #[test]
    fn rejects_cycle() {
        let err = CausalModel::new(
            "bad",
            vec!["X", "Y"],
            vec![("X", "Y"), ("Y", "X")],
            vec![],
            vec!["X", "Y"],
            vec![],
            "X",
            "Y",
            None,
            IdentificationStrategy::Lp,
        )
        .unwrap_err();
        assert!(err.to_string().contains("cyclic"));
    }
}
