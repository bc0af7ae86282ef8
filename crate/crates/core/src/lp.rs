//! Dense equality-form linear programs over nonnegative variables, solved by
//! a two-phase primal simplex with Bland's rule.
//!
//! Problems here are tiny (at most a few hundred variables, around twenty
//! rows) but solved in large numbers. The float path uses a small pivot
//! tolerance and finishes with a clean basis re-solve against the original
//! data to shed accumulated tableau drift. The exact path runs the same
//! algorithm over arbitrary-precision rationals and is used as a referee
//! wherever a test needs tolerances tighter than float drift allows.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use thiserror::Error;

type BigRational = Ratio<BigInt>;

/// Declared infeasible only when the phase-one optimum exceeds this.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Float pivot tolerance.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("objective is unbounded over the feasible set")]
    Unbounded,
    #[error("pivot limit exceeded ({0} pivots)")]
    IterationLimit(usize),
}

/// An equality-constrained LP over the nonnegative orthant.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<(Vec<f64>, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, constraints: Vec<(Vec<f64>, f64)>) -> Result<Self, LpError> {
        let n_vars = objective.len();
        if n_vars == 0 {
            return Err(LpError::Malformed("no variables".into()));
        }
        for (i, (row, _)) in constraints.iter().enumerate() {
            if row.len() != n_vars {
                return Err(LpError::Malformed(format!(
                    "constraint {i} has {} coefficients, expected {n_vars}",
                    row.len()
                )));
            }
        }
        Ok(LinearProgram {
            n_vars,
            objective,
            constraints,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[(Vec<f64>, f64)] {
        &self.constraints
    }

    /// Number of rows that are exactly the all-ones simplex constraint.
    pub fn simplex_row_count(&self) -> usize {
        self.constraints
            .iter()
            .filter(|(row, rhs)| *rhs == 1.0 && row.iter().all(|c| *c == 1.0))
            .count()
    }

    /// Plain-text tableau for diagnostics.
    pub fn dump(&self) -> String {
        format!("{self}")
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vars: {}", self.n_vars)?;
        write!(f, "obj:")?;
        for c in &self.objective {
            write!(f, " {c:9.4}")?;
        }
        writeln!(f)?;
        for (i, (row, rhs)) in self.constraints.iter().enumerate() {
            write!(f, "c{i:02}:")?;
            for c in row {
                write!(f, " {c:9.4}")?;
            }
            writeln!(f, " = {rhs:9.4}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Solver outcome. When optimal, `solution` is primal feasible and `optimum`
/// is its objective value. When infeasible, `infeasibility_certificate` holds
/// a Farkas dual ray `y` with `y'A <= 0` componentwise and `y'b > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub optimum: Option<f64>,
    pub solution: Option<Vec<f64>>,
    pub infeasibility_certificate: Option<Vec<f64>>,
}

/// Scalar field the simplex runs over.
trait Field:
    Clone
    + PartialOrd
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn pivot_tol() -> Self;
    fn feas_tol() -> Self;
}

impl Field for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn pivot_tol() -> Self {
        PIVOT_TOLERANCE
    }
    fn feas_tol() -> Self {
        FEASIBILITY_TOLERANCE
    }
}

impl Field for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite probability coefficients")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).expect("rational fits in f64 range")
    }
    fn pivot_tol() -> Self {
        BigRational::zero()
    }
    fn feas_tol() -> Self {
        BigRational::zero()
    }
}

const MAX_PIVOTS: usize = 200_000;

/// Dense simplex tableau with an explicit reduced-cost row.
struct Tableau<T> {
    ncols: usize,
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    red: Vec<T>,
    obj: T,
}

impl<T: Field> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / p;
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for k in 0..self.ncols {
                let delta = f.clone() * self.rows[r][k].clone();
                self.rows[i][k] = self.rows[i][k].clone() - delta;
            }
            self.rhs[i] = self.rhs[i].clone() - f * self.rhs[r].clone();
        }
        let f = self.red[c].clone();
        if !f.is_zero() {
            for k in 0..self.ncols {
                let delta = f.clone() * self.rows[r][k].clone();
                self.red[k] = self.red[k].clone() - delta;
            }
            self.obj = self.obj.clone() + f * self.rhs[r].clone();
        }
        self.basis[r] = c;
    }

    /// Recomputes reduced costs and the objective value for cost vector `c`
    /// (length `ncols`) from the current basis.
    fn reset_costs(&mut self, costs: &[T]) {
        self.red = costs.to_vec();
        self.obj = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b].clone();
            if cb.is_zero() {
                continue;
            }
            for k in 0..self.ncols {
                let delta = cb.clone() * self.rows[i][k].clone();
                self.red[k] = self.red[k].clone() - delta;
            }
            self.obj = self.obj.clone() + cb * self.rhs[i].clone();
        }
    }

    /// Bland's rule iteration until optimality; columns at or beyond
    /// `col_limit` are barred from entering.
    fn run(&mut self, col_limit: usize) -> Result<(), LpError> {
        let tol = T::pivot_tol();
        for _ in 0..MAX_PIVOTS {
            let entering = (0..col_limit).find(|&j| self.red[j] < -tol.clone());
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(T, usize)> = None; // (ratio, row)
            for i in 0..self.rows.len() {
                if self.rows[i][c] > tol {
                    let ratio = self.rhs[i].clone() / self.rows[i][c].clone();
                    let better = match &leave {
                        None => true,
                        Some((best, row)) => {
                            ratio < *best
                                || (ratio == *best && self.basis[i] < self.basis[*row])
                        }
                    };
                    if better {
                        leave = Some((ratio, i));
                    }
                }
            }
            let Some((_, r)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, c);
        }
        Err(LpError::IterationLimit(MAX_PIVOTS))
    }
}

fn solve_generic<T: Field>(p: &LinearProgram, sense: Sense) -> Result<LpOutcome, LpError> {
    let n = p.n_vars;
    let m = p.constraints.len();
    if m == 0 {
        return Err(LpError::Malformed("no constraints".into()));
    }
    let sign = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    // Sign-normalize rows so every right-hand side is nonnegative.
    let mut flipped = vec![false; m];
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs: Vec<T> = Vec::with_capacity(m);
    for (i, (row, b)) in p.constraints.iter().enumerate() {
        let flip = *b < 0.0;
        flipped[i] = flip;
        let s = if flip { -1.0 } else { 1.0 };
        rows.push(row.iter().map(|&v| T::from_f64(s * v)).collect());
        rhs.push(T::from_f64(s * b));
    }

    // Phase 1: artificial basis, minimize the artificial mass.
    let ncols = n + m;
    let mut tab = Tableau {
        ncols,
        rows: (0..m)
            .map(|i| {
                let mut r = rows[i].clone();
                r.extend((0..m).map(|k| if k == i { T::one() } else { T::zero() }));
                r
            })
            .collect(),
        rhs: rhs.clone(),
        basis: (n..n + m).collect(),
        red: Vec::new(),
        obj: T::zero(),
    };
    let phase1_costs: Vec<T> = (0..ncols)
        .map(|j| if j < n { T::zero() } else { T::one() })
        .collect();
    tab.reset_costs(&phase1_costs);
    tab.run(n)?;

    if tab.obj > T::feas_tol() {
        // Farkas ray from the phase-one multipliers, mapped back through the
        // row sign flips.
        let ray: Vec<f64> = (0..m)
            .map(|i| {
                let y = T::one() - tab.red[n + i].clone();
                let v = y.to_f64();
                if flipped[i] {
                    -v
                } else {
                    v
                }
            })
            .collect();
        return Ok(LpOutcome {
            status: LpStatus::Infeasible,
            optimum: None,
            solution: None,
            infeasibility_certificate: Some(ray),
        });
    }

    // Drive leftover artificials out of the basis; rows where no original
    // column can pivot are redundant and get dropped.
    let tol = T::pivot_tol();
    let mut drop_rows = Vec::new();
    for i in 0..tab.rows.len() {
        if tab.basis[i] < n {
            continue;
        }
        let col = (0..n).find(|&j| {
            tab.rows[i][j] > tol.clone() || tab.rows[i][j] < -tol.clone()
        });
        match col {
            Some(j) => tab.pivot(i, j),
            None => drop_rows.push(i),
        }
    }
    for &i in drop_rows.iter().rev() {
        tab.rows.remove(i);
        tab.rhs.remove(i);
        tab.basis.remove(i);
    }

    // Phase 2 on the original columns only.
    for row in tab.rows.iter_mut() {
        row.truncate(n);
    }
    tab.ncols = n;
    let costs: Vec<T> = p.objective.iter().map(|&c| T::from_f64(sign * c)).collect();
    tab.reset_costs(&costs);
    tab.run(n)?;

    // Clean re-solve of the basic system against the original data.
    let kept: Vec<usize> = (0..m).filter(|i| !drop_rows.contains(i)).collect();
    let solution = resolve_basis::<T>(p, &kept, &tab.basis)
        .unwrap_or_else(|| {
            let mut x = vec![0.0; n];
            for (i, &b) in tab.basis.iter().enumerate() {
                x[b] = tab.rhs[i].to_f64();
            }
            x
        });
    let optimum: f64 = solution
        .iter()
        .zip(p.objective.iter())
        .map(|(x, c)| x * c)
        .sum();
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        optimum: Some(optimum),
        solution: Some(solution),
        infeasibility_certificate: None,
    })
}

/// Solves `B x_B = b` for the final basis by Gaussian elimination on the
/// original constraint data; returns `None` if the basis matrix is singular
/// at working precision.
fn resolve_basis<T: Field>(
    p: &LinearProgram,
    kept_rows: &[usize],
    basis: &[usize],
) -> Option<Vec<f64>> {
    let k = kept_rows.len();
    if basis.len() != k {
        return None;
    }
    let mut a: Vec<Vec<T>> = kept_rows
        .iter()
        .map(|&i| {
            let (row, _) = &p.constraints[i];
            basis.iter().map(|&j| T::from_f64(row[j])).collect()
        })
        .collect();
    let mut b: Vec<T> = kept_rows
        .iter()
        .map(|&i| T::from_f64(p.constraints[i].1))
        .collect();
    let tol = T::pivot_tol();
    for col in 0..k {
        let piv = (col..k).max_by(|&r1, &r2| {
            let a1 = abs_val(&a[r1][col]);
            let a2 = abs_val(&a[r2][col]);
            a1.partial_cmp(&a2).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(abs_val(&a[piv][col]) > tol.clone()) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..k {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone() / a[col][col].clone();
            for c2 in col..k {
                let delta = f.clone() * a[col][c2].clone();
                a[r][c2] = a[r][c2].clone() - delta;
            }
            let delta = f * b[col].clone();
            b[r] = b[r].clone() - delta;
        }
    }
    let mut x = vec![0.0; p.n_vars];
    for (i, &j) in basis.iter().enumerate() {
        let v = (b[i].clone() / a[i][i].clone()).to_f64();
        // Basic values are nonnegative up to float drift.
        x[j] = if v < 0.0 && v > -1e-9 { 0.0 } else { v };
    }
    Some(x)
}

fn abs_val<T: Field>(v: &T) -> T {
    if *v < T::zero() {
        -v.clone()
    } else {
        v.clone()
    }
}

/// Floating-point solve (pivot tolerance 1e-10, infeasibility declared above
/// a phase-one mass of 1e-8).
pub fn solve_lp(p: &LinearProgram, sense: Sense) -> Result<LpOutcome, LpError> {
    solve_generic::<f64>(p, sense)
}

/// Exact solve over arbitrary-precision rationals; every f64 coefficient is
/// converted to its exact rational value.
pub fn solve_lp_exact(p: &LinearProgram, sense: Sense) -> Result<LpOutcome, LpError> {
    solve_generic::<BigRational>(p, sense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forced_program() -> LinearProgram {
        LinearProgram::new(
            vec![1.0, 0.0],
            vec![(vec![1.0, 1.0], 1.0), (vec![1.0, 0.0], 0.3)],
        )
        .unwrap()
    }

    #[test]
    fn forced_value() {
        let p = forced_program();
        let out = solve_lp(&p, Sense::Min).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.optimum.unwrap() - 0.3).abs() < 1e-12);
        let out = solve_lp(&p, Sense::Max).unwrap();
        assert!((out.optimum.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn contradictory_mass_is_infeasible_with_certificate() {
        let p = LinearProgram::new(
            vec![1.0, 0.0],
            vec![(vec![1.0, 1.0], 1.0), (vec![1.0, 1.0], 0.5)],
        )
        .unwrap();
        let out = solve_lp(&p, Sense::Min).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
        let y = out.infeasibility_certificate.unwrap();
        let yb: f64 = y
            .iter()
            .zip(p.constraints().iter())
            .map(|(yi, (_, b))| yi * b)
            .sum();
        assert!(yb > 1e-8, "certificate must separate: y'b = {yb}");
        for j in 0..p.n_vars() {
            let ya: f64 = y
                .iter()
                .zip(p.constraints().iter())
                .map(|(yi, (row, _))| yi * row[j])
                .sum();
            assert!(ya <= 1e-9, "y'A[{j}] = {ya} must be nonpositive");
        }
    }

    #[test]
    fn malformed_row_is_rejected() {
        let err = LinearProgram::new(vec![1.0, 0.0], vec![(vec![1.0], 1.0)]).unwrap_err();
        assert!(matches!(err, LpError::Malformed(_)));
    }

    #[test]
    fn unbounded_is_an_error_not_a_value() {
        let p = LinearProgram::new(
            vec![-1.0, 0.0],
            vec![(vec![0.0, 1.0], 1.0)],
        )
        .unwrap();
        assert!(matches!(solve_lp(&p, Sense::Min), Err(LpError::Unbounded)));
    }

    #[test]
    fn redundant_and_duplicated_rows_terminate() {
        // The same simplex row three times plus a forcing row, and a zero
        // right-hand side forcing a degenerate vertex.
        let p = LinearProgram::new(
            vec![0.0, 1.0, 2.0],
            vec![
                (vec![1.0, 1.0, 1.0], 1.0),
                (vec![1.0, 1.0, 1.0], 1.0),
                (vec![1.0, 1.0, 1.0], 1.0),
                (vec![0.0, 0.0, 1.0], 0.0),
                (vec![1.0, 0.0, 0.0], 0.25),
            ],
        )
        .unwrap();
        let out = solve_lp(&p, Sense::Min).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.optimum.unwrap() - 0.75).abs() < 1e-12);
        let x = out.solution.unwrap();
        assert!((x[0] - 0.25).abs() < 1e-12 && (x[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn point_mass_degenerate_table_terminates() {
        // Many zero right-hand sides (a point-mass observation).
        let mut cons = vec![(vec![1.0; 8], 1.0)];
        for j in 0..7 {
            let mut row = vec![0.0; 8];
            row[j] = 1.0;
            cons.push((row, 0.0));
        }
        let p = LinearProgram::new(vec![1.0; 8], cons).unwrap();
        let out = solve_lp(&p, Sense::Min).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.optimum.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solutions_are_feasible_and_match_optimum() {
        let p = forced_program();
        let out = solve_lp(&p, Sense::Min).unwrap();
        let x = out.solution.unwrap();
        for (row, b) in p.constraints() {
            let ax: f64 = row.iter().zip(x.iter()).map(|(a, v)| a * v).sum();
            assert!((ax - b).abs() < 1e-9);
        }
        let cx: f64 = p.objective().iter().zip(x.iter()).map(|(c, v)| c * v).sum();
        assert!((cx - out.optimum.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn identical_programs_give_identical_outcome_bytes() {
        let p = forced_program();
        let a = solve_lp(&p, Sense::Min).unwrap();
        let b = solve_lp(&p.clone(), Sense::Min).unwrap();
        assert_eq!(
            a.optimum.unwrap().to_bits(),
            b.optimum.unwrap().to_bits()
        );
        let xa = a.solution.unwrap();
        let xb = b.solution.unwrap();
        assert_eq!(xa.len(), xb.len());
        for (u, v) in xa.iter().zip(xb.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn exact_mode_agrees_with_float_on_small_programs() {
        let p = LinearProgram::new(
            vec![0.3, -0.7, 0.1, 0.0],
            vec![
                (vec![1.0, 1.0, 1.0, 1.0], 1.0),
                (vec![1.0, 0.0, 1.0, 0.0], 0.4),
            ],
        )
        .unwrap();
        for sense in [Sense::Min, Sense::Max] {
            let f = solve_lp(&p, sense).unwrap().optimum.unwrap();
            let e = solve_lp_exact(&p, sense).unwrap().optimum.unwrap();
            assert!((f - e).abs() < 1e-12, "{f} vs {e}");
        }
    }

    #[test]
    fn infeasible_only_beyond_phase_one_tolerance() {
        // Mass mismatch of 1e-9 sits inside the declared tolerance.
        let p = LinearProgram::new(
            vec![1.0, 0.0],
            vec![
                (vec![1.0, 1.0], 1.0),
                (vec![1.0, 1.0], 1.0 + 1e-9),
            ],
        )
        .unwrap();
        let out = solve_lp(&p, Sense::Min).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
    }
}
