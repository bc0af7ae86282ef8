//! Bound computation over a model and an observed distribution: the
//! covariate-optimal LP bounds with witness extraction, the closed-form
//! covariate-marginal and covariate-averaged bounds, pointwise and uniform
//! sharpness feasibility checks, and back-door identification.

use crate::bounds::{BoundsInterval, Estimand, EstimandKind, IntervalError, Method};
use crate::closedform::{self as cf, ClosedFormError};
use crate::dist::{DistError, ObservedDistribution, StructuralTruth};
use crate::lp::{solve_lp, solve_lp_exact, LinearProgram, LpError, LpStatus};
use crate::model::{
    parameterize, CausalModel, CovariateSide, IdentificationStrategy, ModelError,
    ResponseParameterization,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("model `{0}` only supports back-door identification, not LP bounds")]
    BackdoorOnly(String),
    #[error("model `{0}` declares no covariate")]
    NoCovariate(String),
    #[error("distribution variables {dist:?} do not match model variables {model:?}")]
    VarsMismatch { dist: Vec<String>, model: Vec<String> },
    #[error("distribution is inconsistent with the model: {0}")]
    InconsistentDistribution(String),
    #[error("covariate level {0} has zero probability")]
    ZeroStratum(u8),
    #[error("positivity violated: cell {0} is empty")]
    Positivity(String),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("back-door identification needs the risk difference estimand")]
    BackdoorEstimand,
    #[error("model `{0}` has more than one non-covariate left-block variable")]
    AmbiguousInstrument(String),
}

/// A model with its parameterization and precomputed evaluation tables,
/// reusable across many distributions.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    model: CausalModel,
    param: ResponseParameterization,
    /// `[left_code][type] -> right code` under no intervention.
    natural: Vec<Vec<u8>>,
    /// `[x][left_code][type] -> outcome value` under `do(treatment = x)`.
    y_do: [Vec<Vec<u8>>; 2],
    /// Natural covariate value per `[left_code][type]` when the covariate is
    /// right-block.
    s_natural: Option<Vec<Vec<u8>>>,
}

impl PreparedModel {
    pub fn new(model: &CausalModel) -> Result<Self, EngineError> {
        if model.strategy() != IdentificationStrategy::Lp {
            return Err(EngineError::BackdoorOnly(model.name().to_string()));
        }
        let param = parameterize(model)?;
        let lc = param.left_cell_count();
        let tc = param.type_count();
        let mut natural = vec![vec![0u8; tc]; lc];
        let mut y0 = vec![vec![0u8; tc]; lc];
        let mut y1 = vec![vec![0u8; tc]; lc];
        for l in 0..lc {
            for t in 0..tc {
                natural[l][t] = param.natural_right_code(l, t) as u8;
                y0[l][t] = param.outcome_under_do(l, t, 0);
                y1[l][t] = param.outcome_under_do(l, t, 1);
            }
        }
        let s_natural = match (model.covariate(), model.covariate_side()) {
            (Some(c), Some(CovariateSide::Right)) => {
                let pos = param.right_pos(c).expect("covariate is right-block");
                let mut table = vec![vec![0u8; tc]; lc];
                for (l, row) in natural.iter().enumerate() {
                    for (t, &code) in row.iter().enumerate() {
                        table[l][t] = param.right_value(code as usize, pos);
                    }
                }
                Some(table)
            }
            _ => None,
        };
        Ok(PreparedModel {
            model: model.clone(),
            param,
            natural,
            y_do: [y0, y1],
            s_natural,
        })
    }

    pub fn model(&self) -> &CausalModel {
        &self.model
    }

    pub fn param(&self) -> &ResponseParameterization {
        &self.param
    }

    pub fn type_count(&self) -> usize {
        self.param.type_count()
    }

    fn left_count(&self) -> usize {
        self.param.left_cell_count()
    }

    fn right_count(&self) -> usize {
        self.param.right_cell_count()
    }

    /// Effect contribution of `(left cell, type)` for an estimand kind.
    fn effect(&self, kind: EstimandKind, l: usize, t: usize) -> f64 {
        match kind {
            EstimandKind::Ey0 => self.y_do[0][l][t] as f64,
            EstimandKind::Ey1 => self.y_do[1][l][t] as f64,
            EstimandKind::RiskDifference => {
                self.y_do[1][l][t] as f64 - self.y_do[0][l][t] as f64
            }
        }
    }

    /// Average treatment effect implied by a type distribution and left-cell
    /// weights.
    pub fn theta(&self, type_probs: &[f64], left_probs: &[f64]) -> f64 {
        let mut v = 0.0;
        for (l, w) in left_probs.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for (t, q) in type_probs.iter().enumerate() {
                if *q != 0.0 {
                    v += w * q * self.effect(EstimandKind::RiskDifference, l, t);
                }
            }
        }
        v
    }

    /// Name of each left-block cell, e.g. `Z=1,S=0`.
    fn left_cell_name(&self, l: usize) -> String {
        let vars = self.param.left_vars();
        let k = vars.len();
        let parts: Vec<String> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{v}={}", (l >> (k - 1 - i)) & 1))
            .collect();
        parts.join(",")
    }

    fn covariate_left_bit(&self) -> Option<usize> {
        let c = self.model.covariate()?;
        let vars = self.param.left_vars();
        vars.iter()
            .position(|v| v == c)
            .map(|i| vars.len() - 1 - i)
    }
}

/// Joint mass of the observed distribution split by (left cell, right cell).
struct BlockJoint {
    left_probs: Vec<f64>,
    joint: Vec<Vec<f64>>,
}

fn block_joint(pm: &PreparedModel, d: &ObservedDistribution) -> Result<BlockJoint, EngineError> {
    let model = pm.model();
    if d.vars() != model.vars() {
        return Err(EngineError::VarsMismatch {
            dist: d.vars().to_vec(),
            model: model.vars().to_vec(),
        });
    }
    let left = model.left_block();
    let right = model.right_block();
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
    let n = model.vars().len();
    let mut joint = vec![vec![0.0; pm.right_count()]; pm.left_count()];
    let mut left_probs = vec![0.0; pm.left_count()];
    for (code, &p) in d.probs_raw().iter().enumerate() {
        let mut l = 0usize;
        let mut r = 0usize;
        for (i, (is_left, bit)) in slots.iter().enumerate() {
            let v = (code >> (n - 1 - i)) & 1;
            if *is_left {
                l |= v << bit;
            } else {
                r |= v << bit;
            }
        }
        joint[l][r] += p;
        left_probs[l] += p;
    }
    Ok(BlockJoint { left_probs, joint })
}

/// Linearized objective over types: the estimand value multiplied by the
/// observed probability of its conditioning event (1 for marginal estimands).
fn linearized_objective(
    pm: &PreparedModel,
    bj: &BlockJoint,
    e: Estimand,
) -> Result<Vec<f64>, EngineError> {
    let side = match e.given_covariate {
        None => None,
        Some(s) => {
            let side = pm
                .model()
                .covariate_side()
                .ok_or_else(|| EngineError::NoCovariate(pm.model().name().to_string()))?;
            Some((side, s))
        }
    };
    let mut c = vec![0.0; pm.type_count()];
    for (l, w) in bj.left_probs.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        if let Some((CovariateSide::Left, s)) = side {
            let bit = pm.covariate_left_bit().expect("left covariate");
            if ((l >> bit) & 1) as u8 != s {
                continue;
            }
        }
        for (t, ct) in c.iter_mut().enumerate() {
            let indicator = match side {
                Some((CovariateSide::Right, s)) => {
                    let tbl = pm.s_natural.as_ref().expect("right covariate");
                    (tbl[l][t] == s) as u8 as f64
                }
                _ => 1.0,
            };
            if indicator != 0.0 {
                *ct += w * indicator * pm.effect(e.kind, l, t);
            }
        }
    }
    Ok(c)
}

/// Feasibility rows of the bound LP: one per (positive left cell, right cell),
/// the right-hand side being the right-block conditional probability.
fn cell_rows(
    pm: &PreparedModel,
    bj: &BlockJoint,
    keep_left: impl Fn(usize) -> bool,
    keep_right: impl Fn(usize) -> bool,
    n_cols: usize,
) -> (Vec<(Vec<f64>, f64)>, Vec<String>) {
    let tc = pm.type_count();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for l in 0..pm.left_count() {
        if !keep_left(l) {
            continue;
        }
        let pl = bj.left_probs[l];
        if pl <= 0.0 {
            skipped.push(pm.left_cell_name(l));
            continue;
        }
        for r in 0..pm.right_count() {
            if !keep_right(r) {
                continue;
            }
            let mut row = vec![0.0; n_cols];
            for t in 0..tc {
                if pm.natural[l][t] as usize == r {
                    row[t] = 1.0;
                }
            }
            rows.push((row, bj.joint[l][r] / pl));
        }
    }
    (rows, skipped)
}

fn simplex_row(tc: usize, n_cols: usize) -> (Vec<f64>, f64) {
    let mut row = vec![0.0; n_cols];
    for v in row.iter_mut().take(tc) {
        *v = 1.0;
    }
    (row, 1.0)
}

/// The bound LP plus warning records for omitted zero-probability left cells.
#[derive(Debug, Clone)]
pub struct BoundsLp {
    pub lp: LinearProgram,
    pub skipped_cells: Vec<String>,
}

/// Builds the bound LP for an estimand: one equality row per observed cell
/// within each positive left-block cell, the type-simplex row, and the
/// linearized estimand as objective.
pub fn build_bounds_lp(
    m: &CausalModel,
    d: &ObservedDistribution,
    e: Estimand,
) -> Result<BoundsLp, EngineError> {
    let pm = PreparedModel::new(m)?;
    build_bounds_lp_prepared(&pm, d, e)
}

pub fn build_bounds_lp_prepared(
    pm: &PreparedModel,
    d: &ObservedDistribution,
    e: Estimand,
) -> Result<BoundsLp, EngineError> {
    let bj = block_joint(pm, d)?;
    let tc = pm.type_count();
    let (mut rows, skipped) = cell_rows(pm, &bj, |_| true, |_| true, tc);
    rows.push(simplex_row(tc, tc));
    let objective = linearized_objective(pm, &bj, e)?;
    Ok(BoundsLp {
        lp: LinearProgram::new(objective, rows)?,
        skipped_cells: skipped,
    })
}

/// Covariate-optimal bounds with retained optimizing solutions.
#[derive(Debug, Clone)]
pub struct CoBounds {
    pub interval: BoundsInterval,
    pub min_solution: Vec<f64>,
    pub max_solution: Vec<f64>,
    pub skipped_cells: Vec<String>,
}

pub fn co_bounds(
    m: &CausalModel,
    d: &ObservedDistribution,
    e: Estimand,
) -> Result<CoBounds, EngineError> {
    let pm = PreparedModel::new(m)?;
    co_bounds_prepared(&pm, d, e, false)
}

/// LP bounds; `exact` switches the solver to rational arithmetic.
pub fn co_bounds_prepared(
    pm: &PreparedModel,
    d: &ObservedDistribution,
    e: Estimand,
    exact: bool,
) -> Result<CoBounds, EngineError> {
    let blp = build_bounds_lp_prepared(pm, d, e)?;
    let solve = if exact { solve_lp_exact } else { solve_lp };
    let lo = solve(&blp.lp, crate::lp::Sense::Min)?;
    let hi = solve(&blp.lp, crate::lp::Sense::Max)?;
    if lo.status == LpStatus::Infeasible || hi.status == LpStatus::Infeasible {
        return Err(EngineError::InconsistentDistribution(format!(
            "no type distribution reproduces the observed cells of model `{}`",
            pm.model().name()
        )));
    }
    let mut lower = lo.optimum.expect("optimal");
    let mut upper = hi.optimum.expect("optimal");
    if let Some(s) = e.given_covariate {
        let c = pm
            .model()
            .covariate()
            .ok_or_else(|| EngineError::NoCovariate(pm.model().name().to_string()))?;
        let ps = d.prob_of(&[(c, s)])?;
        if ps <= 0.0 {
            return Err(EngineError::ZeroStratum(s));
        }
        lower /= ps;
        upper /= ps;
    }
    let interval = BoundsInterval::new(lower, upper, e.kind, Method::Co, true)?;
    Ok(CoBounds {
        interval,
        min_solution: lo.solution.expect("optimal"),
        max_solution: hi.solution.expect("optimal"),
        skipped_cells: blp.skipped_cells,
    })
}

/// Reassembles a structural truth from an LP solution: the type distribution
/// from the solution vector, the left joint copied from the observed table.
pub fn witness_distribution(
    m: &CausalModel,
    d: &ObservedDistribution,
    solution: &[f64],
) -> Result<StructuralTruth, EngineError> {
    let pm = PreparedModel::new(m)?;
    witness_distribution_prepared(&pm, d, solution)
}

pub fn witness_distribution_prepared(
    pm: &PreparedModel,
    d: &ObservedDistribution,
    solution: &[f64],
) -> Result<StructuralTruth, EngineError> {
    let tc = pm.type_count();
    if solution.len() < tc {
        return Err(EngineError::InconsistentDistribution(format!(
            "solution has {} entries, model needs {tc}",
            solution.len()
        )));
    }
    let mut q: Vec<f64> = solution[..tc]
        .iter()
        .map(|v| if *v < 0.0 { 0.0 } else { *v })
        .collect();
    let mass: f64 = q.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(EngineError::InconsistentDistribution(format!(
            "solution mass {mass} is not a type distribution"
        )));
    }
    for v in q.iter_mut() {
        *v /= mass;
    }
    let right: Vec<&str> = pm.model().right_block().iter().map(|s| s.as_str()).collect();
    let left_joint = d.marginalize_out(&right)?;
    Ok(StructuralTruth::new(
        pm.model(),
        pm.param(),
        q,
        left_joint,
    )?)
}

/// Name of the single non-covariate left-block variable, if any.
fn instrument_name(model: &CausalModel) -> Result<Option<String>, EngineError> {
    let mut names: Vec<&String> = model
        .left_block()
        .iter()
        .filter(|v| Some(v.as_str()) != model.covariate())
        .collect();
    match names.len() {
        0 => Ok(None),
        1 => Ok(Some(names.remove(0).clone())),
        _ => Err(EngineError::AmbiguousInstrument(model.name().to_string())),
    }
}

/// Closed-form interval on a table that contains an instrument, per estimand.
fn instrumented_interval(
    table: &ObservedDistribution,
    kind: EstimandKind,
    method: Method,
) -> Result<BoundsInterval, EngineError> {
    let interval = |lo_id: &str, hi_id: &str, k: EstimandKind| -> Result<BoundsInterval, EngineError> {
        Ok(BoundsInterval::new(
            cf::eval_by_id(lo_id, table, None)?,
            cf::eval_by_id(hi_id, table, None)?,
            k,
            method,
            false,
        )?)
    };
    let iv = match kind {
        EstimandKind::Ey0 => interval("bp_ey0_lower", "bp_ey0_upper", EstimandKind::Ey0)?,
        EstimandKind::Ey1 => interval("bp_ey1_lower", "bp_ey1_upper", EstimandKind::Ey1)?,
        EstimandKind::RiskDifference => {
            let ey1 = interval("bp_ey1_lower", "bp_ey1_upper", EstimandKind::Ey1)?;
            let ey0 = interval("bp_ey0_lower", "bp_ey0_upper", EstimandKind::Ey0)?;
            let mut rd = cf::compose_rd(&ey1, &ey0);
            rd.method = method;
            rd
        }
    };
    Ok(iv)
}

/// Assumption-free interval on a table without an instrument.
fn plain_interval(
    table: &ObservedDistribution,
    kind: EstimandKind,
    method: Method,
) -> Result<BoundsInterval, EngineError> {
    let iv = match kind {
        EstimandKind::RiskDifference => {
            let mut rd = BoundsInterval::new(
                cf::eval_by_id("simple_lower", table, None)?,
                cf::eval_by_id("simple_upper", table, None)?,
                EstimandKind::RiskDifference,
                method,
                false,
            )?;
            rd.method = method;
            rd
        }
        EstimandKind::Ey0 => {
            let seen = table.prob_of(&[("Y", 1), ("X", 0)])?;
            let hidden = table.prob_of(&[("X", 1)])?;
            BoundsInterval::new(seen, seen + hidden, EstimandKind::Ey0, method, false)?
        }
        EstimandKind::Ey1 => {
            let seen = table.prob_of(&[("Y", 1), ("X", 1)])?;
            let hidden = table.prob_of(&[("X", 0)])?;
            BoundsInterval::new(seen, seen + hidden, EstimandKind::Ey1, method, false)?
        }
    };
    Ok(iv)
}

fn table_interval(
    model: &CausalModel,
    table: &ObservedDistribution,
    kind: EstimandKind,
    method: Method,
) -> Result<BoundsInterval, EngineError> {
    match instrument_name(model)? {
        Some(_) => instrumented_interval(table, kind, method),
        None => plain_interval(table, kind, method),
    }
}

/// Covariate-marginal bounds: the closed-form evaluator on the table with the
/// covariate summed out.
pub fn cm_bounds(
    model: &CausalModel,
    d: &ObservedDistribution,
    kind: EstimandKind,
) -> Result<BoundsInterval, EngineError> {
    let table = match model.covariate() {
        Some(c) if d.has_var(c) => d.marginalize_out(&[c])?,
        _ => d.clone(),
    };
    table_interval(model, &table, kind, Method::Cm)
}

/// Covariate-averaged bounds with the per-stratum pieces retained.
#[derive(Debug, Clone)]
pub struct CaBounds {
    pub interval: BoundsInterval,
    pub per_stratum: BTreeMap<u8, BoundsInterval>,
    pub weights: BTreeMap<u8, f64>,
    pub skipped_strata: Vec<u8>,
}

pub fn ca_bounds(
    model: &CausalModel,
    d: &ObservedDistribution,
    kind: EstimandKind,
) -> Result<CaBounds, EngineError> {
    let c = model
        .covariate()
        .ok_or_else(|| EngineError::NoCovariate(model.name().to_string()))?;
    let mut per_stratum = BTreeMap::new();
    let mut weights = BTreeMap::new();
    let mut skipped = Vec::new();
    for s in 0..2u8 {
        let ps = d.prob_of(&[(c, s)])?;
        if ps <= 0.0 {
            skipped.push(s);
            continue;
        }
        let cond = d.condition_on(&[(c, s)])?;
        let mut iv = table_interval(model, &cond, kind, Method::Ca)?;
        iv.method = Method::Ca;
        per_stratum.insert(s, iv);
        weights.insert(s, ps);
    }
    if per_stratum.is_empty() {
        return Err(EngineError::ZeroStratum(0));
    }
    let interval = cf::covariate_average(&per_stratum, &weights)?;
    Ok(CaBounds {
        interval,
        per_stratum,
        weights,
        skipped_strata: skipped,
    })
}

/// Point identification by covariate adjustment:
/// `sum_s P(S=s) [P(Y=1|X=1,S=s) - P(Y=1|X=0,S=s)]`.
pub fn backdoor_rd(d: &ObservedDistribution) -> Result<f64, EngineError> {
    let margin = if d.has_var("Z") {
        d.marginalize_out(&["Z"])?
    } else {
        d.clone()
    };
    for x in 0..2u8 {
        for s in 0..2u8 {
            if margin.prob_of(&[("X", x), ("S", s)])? <= 0.0 {
                return Err(EngineError::Positivity(format!("X={x},S={s}")));
            }
        }
    }
    let mut v = 0.0;
    for s in 0..2u8 {
        let ps = margin.prob_of(&[("S", s)])?;
        let treated = margin.cond_prob(&[("Y", 1)], &[("X", 1), ("S", s)])?;
        let control = margin.cond_prob(&[("Y", 1)], &[("X", 0), ("S", s)])?;
        v += ps * (treated - control);
    }
    Ok(v)
}

/// Method dispatcher used by the CLI and the simulation study.
pub fn compute_method(
    model: &CausalModel,
    d: &ObservedDistribution,
    kind: EstimandKind,
    method: Method,
) -> Result<BoundsInterval, EngineError> {
    match method {
        Method::Cm => cm_bounds(model, d, kind),
        Method::Ca => Ok(ca_bounds(model, d, kind)?.interval),
        Method::Co => Ok(co_bounds(model, d, Estimand::marginal(kind))?.interval),
        Method::Backdoor => {
            if kind != EstimandKind::RiskDifference {
                return Err(EngineError::BackdoorEstimand);
            }
            let v = backdoor_rd(d)?;
            Ok(BoundsInterval::new(
                v,
                v,
                EstimandKind::RiskDifference,
                Method::Backdoor,
                true,
            )?)
        }
    }
}

/// Result of one sharpness feasibility check.
#[derive(Debug, Clone)]
pub struct SharpnessCheck {
    pub feasible: bool,
    pub witness: Option<StructuralTruth>,
}

#[derive(Debug, Clone)]
pub struct PointwiseSharpness {
    pub per_stratum: BTreeMap<u8, SharpnessCheck>,
    pub skipped_strata: Vec<u8>,
}

/// Stratum filter for cell rows: for a left covariate, restrict the left
/// cells; for a right covariate, restrict the right cells.
fn stratum_filters(
    pm: &PreparedModel,
    s: u8,
) -> Result<(Box<dyn Fn(usize) -> bool>, Box<dyn Fn(usize) -> bool>), EngineError> {
    let side = pm
        .model()
        .covariate_side()
        .ok_or_else(|| EngineError::NoCovariate(pm.model().name().to_string()))?;
    match side {
        CovariateSide::Left => {
            let bit = pm.covariate_left_bit().expect("left covariate");
            Ok((
                Box::new(move |l: usize| ((l >> bit) & 1) as u8 == s),
                Box::new(|_| true),
            ))
        }
        CovariateSide::Right => {
            let c = pm.model().covariate().unwrap().to_string();
            let pos = pm.param().right_pos(&c).expect("right covariate");
            let k = pm.model().right_block().len();
            let bit = k - 1 - pos;
            Ok((
                Box::new(|_| true),
                Box::new(move |r: usize| ((r >> bit) & 1) as u8 == s),
            ))
        }
    }
}

/// Builds and solves a feasibility program: the given cell rows, the type
/// simplex row, and one slack-augmented inequality `theta-row <= rhs` per
/// entry of `inequalities`.
fn feasibility_check(
    pm: &PreparedModel,
    cell_constraints: Vec<(Vec<f64>, f64)>,
    inequalities: Vec<(Vec<f64>, f64)>,
    d: &ObservedDistribution,
) -> Result<SharpnessCheck, EngineError> {
    let tc = pm.type_count();
    let n_cols = tc + inequalities.len();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, rhs) in cell_constraints {
        let mut wide = row;
        wide.resize(n_cols, 0.0);
        rows.push((wide, rhs));
    }
    rows.push(simplex_row(tc, n_cols));
    for (i, (coeffs, rhs)) in inequalities.into_iter().enumerate() {
        let mut wide = coeffs;
        wide.resize(n_cols, 0.0);
        wide[tc + i] = 1.0;
        rows.push((wide, rhs));
    }
    let lp = LinearProgram::new(vec![0.0; n_cols], rows)?;
    let out = solve_lp(&lp, crate::lp::Sense::Min)?;
    match out.status {
        LpStatus::Infeasible => Ok(SharpnessCheck {
            feasible: false,
            witness: None,
        }),
        LpStatus::Optimal => {
            let witness =
                witness_distribution_prepared(pm, d, out.solution.as_deref().expect("optimal"))?;
            Ok(SharpnessCheck {
                feasible: true,
                witness: Some(witness),
            })
        }
    }
}

/// Per-stratum feasibility of attaining each conditional bound within epsilon
/// using only that stratum's observed constraints; witnesses can differ by
/// stratum.
pub fn pointwise_sharpness_check(
    m: &CausalModel,
    d: &ObservedDistribution,
    kind: EstimandKind,
    bounds_per_s: &BTreeMap<u8, f64>,
    epsilon: f64,
) -> Result<PointwiseSharpness, EngineError> {
    if epsilon <= 0.0 {
        return Err(EngineError::InvalidEpsilon(epsilon));
    }
    let pm = PreparedModel::new(m)?;
    let c = m
        .covariate()
        .ok_or_else(|| EngineError::NoCovariate(m.name().to_string()))?;
    let bj = block_joint(&pm, d)?;
    let tc = pm.type_count();
    let mut per_stratum = BTreeMap::new();
    let mut skipped = Vec::new();
    for (&s, &bound) in bounds_per_s {
        let ps = d.prob_of(&[(c, s)])?;
        if ps <= 0.0 {
            skipped.push(s);
            continue;
        }
        let (keep_l, keep_r) = stratum_filters(&pm, s)?;
        let (cells, _) = cell_rows(&pm, &bj, &*keep_l, &*keep_r, tc);
        let theta_row = linearized_objective(&pm, &bj, Estimand::conditional(kind, s))?;
        let check = feasibility_check(
            &pm,
            cells,
            vec![(theta_row, (bound + epsilon) * ps)],
            d,
        )?;
        per_stratum.insert(s, check);
    }
    Ok(PointwiseSharpness {
        per_stratum,
        skipped_strata: skipped,
    })
}

/// Single-distribution feasibility of attaining every conditional bound
/// simultaneously: all observed constraints plus one linearized inequality
/// per stratum.
pub fn uniform_sharpness_check(
    m: &CausalModel,
    d: &ObservedDistribution,
    kind: EstimandKind,
    bounds_per_s: &BTreeMap<u8, f64>,
    epsilon: f64,
) -> Result<SharpnessCheck, EngineError> {
    if epsilon <= 0.0 {
        return Err(EngineError::InvalidEpsilon(epsilon));
    }
    let pm = PreparedModel::new(m)?;
    let c = m
        .covariate()
        .ok_or_else(|| EngineError::NoCovariate(m.name().to_string()))?;
    let bj = block_joint(&pm, d)?;
    let tc = pm.type_count();
    let (cells, _) = cell_rows(&pm, &bj, |_| true, |_| true, tc);
    let mut inequalities = Vec::new();
    for (&s, &bound) in bounds_per_s {
        let ps = d.prob_of(&[(c, s)])?;
        if ps <= 0.0 {
            continue;
        }
        let theta_row = linearized_objective(&pm, &bj, Estimand::conditional(kind, s))?;
        inequalities.push((theta_row, (bound + epsilon) * ps));
    }
    feasibility_check(&pm, cells, inequalities, d)
}

/// Testable implications of the builtin models, checked before bounding when
/// requested: instrument-covariate independence where the structure implies
/// it, and within-stratum invariance in the instrument for the fully mediated
/// model.
pub fn validate_model_constraints(
    model: &CausalModel,
    d: &ObservedDistribution,
    tol: f64,
) -> Result<(), EngineError> {
    match model.name() {
        "e" | "mediator" => {
            for s in 0..2u8 {
                let p0 = d.cond_prob(&[("S", s)], &[("Z", 0)])?;
                let p1 = d.cond_prob(&[("S", s)], &[("Z", 1)])?;
                if (p0 - p1).abs() > tol {
                    return Err(EngineError::InconsistentDistribution(format!(
                        "covariate depends on the instrument: P(S={s}|Z=0)={p0:.6} vs P(S={s}|Z=1)={p1:.6}"
                    )));
                }
            }
        }
        "f" => {
            for s in 0..2u8 {
                for x in 0..2u8 {
                    for y in 0..2u8 {
                        let p0 = d.cond_prob(&[("X", x), ("Y", y)], &[("Z", 0), ("S", s)])?;
                        let p1 = d.cond_prob(&[("X", x), ("Y", y)], &[("Z", 1), ("S", s)])?;
                        if (p0 - p1).abs() > tol {
                            return Err(EngineError::InconsistentDistribution(format!(
                                "stratum S={s} is not invariant in the instrument at (X={x},Y={y})"
                            )));
                        }
                    }
                }
            }
        }
        _ => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::pushforward_observed;
    use crate::model::builtin_model;

    fn uninformative_iv_table() -> ObservedDistribution {
        let p = |y: usize, x: usize| [0.1, 0.2, 0.3, 0.4][(y << 1) | x];
        let mut probs = vec![0.0; 8];
        for z in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    probs[(z << 2) | (x << 1) | y] = 0.5 * p(y, x);
                }
            }
        }
        ObservedDistribution::from_named(vec!["Z", "X", "Y"], probs).unwrap()
    }

    fn compliance_table() -> ObservedDistribution {
        let mut probs = vec![0.0; 8];
        probs[0b000] = 0.5;
        probs[0b111] = 0.5;
        ObservedDistribution::from_named(vec!["Z", "X", "Y"], probs).unwrap()
    }

    /// The two-point table: P(X=0,Y=1|S=1) = 1 and P(X=1,Y=1|S=0) = 1 with
    /// equal stratum weights, over (S, X, Y).
    fn two_point_stratum_table() -> ObservedDistribution {
        let mut probs = vec![0.0; 8];
        probs[0b101] = 0.5; // S=1, X=0, Y=1
        probs[0b011] = 0.5; // S=0, X=1, Y=1
        ObservedDistribution::from_named(vec!["S", "X", "Y"], probs).unwrap()
    }

    #[test]
    fn lp_shapes() {
        let m = builtin_model("iv_base").unwrap();
        let blp = build_bounds_lp(
            &m,
            &uninformative_iv_table(),
            Estimand::marginal(EstimandKind::Ey0),
        )
        .unwrap();
        assert_eq!(blp.lp.n_vars(), 16);
        assert_eq!(blp.lp.constraints().len(), 9); // 2 x 4 cells + simplex
        assert_eq!(blp.lp.simplex_row_count(), 1);
        assert!(blp.skipped_cells.is_empty());

        let m = builtin_model("e").unwrap();
        let pm = PreparedModel::new(&m).unwrap();
        let left = ObservedDistribution::from_named(vec!["Z"], vec![0.5, 0.5]).unwrap();
        let q = vec![1.0 / 512.0; 512];
        let truth = StructuralTruth::new(&m, pm.param(), q, left).unwrap();
        let d = pushforward_observed(&m, &truth).unwrap();
        let blp =
            build_bounds_lp(&m, &d, Estimand::marginal(EstimandKind::RiskDifference)).unwrap();
        assert_eq!(blp.lp.n_vars(), 512);
        assert_eq!(blp.lp.constraints().len(), 17); // 2 x 8 cells + simplex
    }

    #[test]
    fn perfect_compliance_point_identifies_rd() {
        let m = builtin_model("iv_base").unwrap();
        let co = co_bounds(
            &m,
            &compliance_table(),
            Estimand::marginal(EstimandKind::RiskDifference),
        )
        .unwrap();
        assert!((co.interval.lower - 1.0).abs() < 1e-9);
        assert!((co.interval.upper - 1.0).abs() < 1e-9);
        // Witness reproduces the bound.
        let w = witness_distribution(&m, &compliance_table(), &co.min_solution).unwrap();
        assert!((w.theta_true - 1.0).abs() < 1e-8);
    }

    #[test]
    fn uninformative_instrument_reduces_to_single_arm_bounds() {
        let m = builtin_model("iv_base").unwrap();
        let d = uninformative_iv_table();
        let co = co_bounds(&m, &d, Estimand::marginal(EstimandKind::Ey0)).unwrap();
        assert!((co.interval.lower - 0.3).abs() < 1e-9, "{:?}", co.interval);
        assert!((co.interval.upper - 0.9).abs() < 1e-9, "{:?}", co.interval);
        // Same endpoints from the closed forms (cm on a no-covariate model).
        let cm = cm_bounds(&m, &d, EstimandKind::Ey0).unwrap();
        assert!((cm.lower - co.interval.lower).abs() < 1e-9);
        assert!((cm.upper - co.interval.upper).abs() < 1e-9);
    }

    #[test]
    fn zero_probability_left_cell_is_skipped_with_warning() {
        let m = builtin_model("iv_base").unwrap();
        let mut probs = vec![0.0; 8];
        probs[0b000] = 0.3;
        probs[0b011] = 0.7; // only Z=0 cells are populated
        let d = ObservedDistribution::from_named(vec!["Z", "X", "Y"], probs).unwrap();
        let blp = build_bounds_lp(&m, &d, Estimand::marginal(EstimandKind::Ey0)).unwrap();
        assert_eq!(blp.skipped_cells, vec!["Z=1".to_string()]);
        assert_eq!(blp.lp.constraints().len(), 5); // 4 cells + simplex
    }

    #[test]
    fn backdoor_only_model_is_rejected_by_the_lp_path() {
        let m = builtin_model("mediator").unwrap();
        let d = ObservedDistribution::from_named(vec!["Z", "S", "X", "Y"], vec![1.0 / 16.0; 16])
            .unwrap();
        assert!(matches!(
            build_bounds_lp(&m, &d, Estimand::marginal(EstimandKind::RiskDifference)),
            Err(EngineError::BackdoorOnly(_))
        ));
    }

    #[test]
    fn backdoor_collapses_under_independence() {
        // S independent of (X, Y): adjustment equals the crude contrast.
        let pxy = [0.1, 0.2, 0.3, 0.4]; // P(X=x, Y=y) indexed x<<1|y
        let mut probs = vec![0.0; 8];
        for s in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    probs[(s << 2) | (x << 1) | y] = 0.5 * pxy[(x << 1) | y];
                }
            }
        }
        let d = ObservedDistribution::from_named(vec!["S", "X", "Y"], probs).unwrap();
        let crude = d.cond_prob(&[("Y", 1)], &[("X", 1)]).unwrap()
            - d.cond_prob(&[("Y", 1)], &[("X", 0)]).unwrap();
        let adjusted = backdoor_rd(&d).unwrap();
        assert!((crude - adjusted).abs() < 1e-12);
    }

    #[test]
    fn backdoor_reports_empty_cell() {
        let mut probs = vec![0.0; 8];
        probs[0b000] = 0.5;
        probs[0b111] = 0.5;
        let d = ObservedDistribution::from_named(vec!["S", "X", "Y"], probs).unwrap();
        let err = backdoor_rd(&d).unwrap_err();
        assert!(matches!(err, EngineError::Positivity(_)));
    }

    #[test]
    fn two_point_table_is_pointwise_but_not_uniformly_attainable() {
        let m = builtin_model("s_model_1").unwrap();
        let d = two_point_stratum_table();
        // Conditional simple lower bounds: 0 at S=0, -1 at S=1.
        let mut bounds = BTreeMap::new();
        for s in 0..2u8 {
            let cond = d.condition_on(&[("S", s)]).unwrap();
            bounds.insert(
                s,
                cf::eval_by_id("simple_lower", &cond, None).unwrap(),
            );
        }
        assert!((bounds[&0] - 0.0).abs() < 1e-12);
        assert!((bounds[&1] - (-1.0)).abs() < 1e-12);

        let pw =
            pointwise_sharpness_check(&m, &d, EstimandKind::RiskDifference, &bounds, 0.1).unwrap();
        assert!(pw.per_stratum[&0].feasible);
        assert!(pw.per_stratum[&1].feasible);

        let uni =
            uniform_sharpness_check(&m, &d, EstimandKind::RiskDifference, &bounds, 0.5).unwrap();
        assert!(!uni.feasible);

        // Vacuous slack makes everything attainable.
        let pw = pointwise_sharpness_check(&m, &d, EstimandKind::RiskDifference, &bounds, 2.0)
            .unwrap();
        assert!(pw.per_stratum.values().all(|c| c.feasible));
    }

    #[test]
    fn pointwise_witnesses_attain_their_strata() {
        let m = builtin_model("s_model_1").unwrap();
        let d = two_point_stratum_table();
        let bounds: BTreeMap<u8, f64> = [(0u8, 0.0), (1u8, -1.0)].into();
        let pw =
            pointwise_sharpness_check(&m, &d, EstimandKind::RiskDifference, &bounds, 0.05).unwrap();
        let w1 = pw.per_stratum[&1].witness.as_ref().unwrap();
        assert!(w1.theta_true < -1.0 + 0.05 + 1e-7);
    }

    #[test]
    fn epsilon_must_be_positive() {
        let m = builtin_model("s_model_1").unwrap();
        let d = two_point_stratum_table();
        let bounds: BTreeMap<u8, f64> = [(0u8, 0.0), (1u8, -1.0)].into();
        assert!(matches!(
            uniform_sharpness_check(&m, &d, EstimandKind::RiskDifference, &bounds, 0.0),
            Err(EngineError::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn model_constraint_validation_flags_bad_input() {
        let m = builtin_model("e").unwrap();
        // S perfectly correlated with Z.
        let mut probs = vec![0.0; 16];
        probs[0b0000] = 0.5; // Z=0, S=0
        probs[0b1100] = 0.5; // Z=1, S=1
        let d = ObservedDistribution::from_named(vec!["Z", "S", "X", "Y"], probs).unwrap();
        assert!(validate_model_constraints(&m, &d, 1e-6).is_err());
    }
}
