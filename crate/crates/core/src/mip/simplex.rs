//! Bounded-variable primal simplex.
//!
//! Solves `min/max c.x + d` subject to dense linear constraints and finite
//! per-variable box bounds. This is the bounding engine for the shallow-ReLU
//! branch-and-bound and for the enumeration oracle, so it favors determinism
//! and robustness over raw speed: Bland's rule throughout (no cycling), and
//! reduced costs plus basic values are recomputed from the tableau every
//! iteration instead of being patched incrementally.

use thiserror::Error;

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Constraint comparison operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Le,
    Ge,
    Eq,
}

/// A dense linear constraint `coeffs . v (op) rhs`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub op: ConstraintOp,
    pub rhs: f64,
}

/// A linear program over box-bounded variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub obj_constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
}

/// Solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution returned by [`solve_lp`]. `value` and `point` are meaningful only
/// when `status == Optimal`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex iteration limit reached ({0} iterations)")]
    IterationLimit(usize),
}

/// Pivot/zero tolerance. Entries smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-9;
/// Residual infeasibility accepted at the end of phase 1.
const FEAS_TOL: f64 = 1e-7;

impl LinearProgram {
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(point)
            .map(|(c, x)| c * x)
            .sum::<f64>()
            + self.obj_constant
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(
                "bound vectors must match objective length".into(),
            ));
        }
        for j in 0..n {
            if !self.lower[j].is_finite() || !self.upper[j].is_finite() {
                return Err(LpError::Malformed(format!(
                    "variable {j} has non-finite bounds"
                )));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!(
                    "variable {j} has lower > upper"
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "constraint {i} has wrong arity"
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed(format!(
                    "constraint {i} has non-finite data"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    /// Rows of B^-1 [A | I_slack | D_art], plus the transformed rhs.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<VarStatus>,
    /// Current value of every nonbasic variable (basics are derived).
    val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_total: usize,
}

impl Tableau {
    fn basic_values(&self) -> Vec<f64> {
        let m = self.rows.len();
        let mut bx = vec![0.0; m];
        for r in 0..m {
            let mut v = self.rhs[r];
            for j in 0..self.n_total {
                if !matches!(self.status[j], VarStatus::Basic(_)) {
                    v -= self.rows[r][j] * self.val[j];
                }
            }
            bx[r] = v;
        }
        bx
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.rows.len();
        let mut z = cost.to_vec();
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..self.n_total {
                    z[j] -= cb * self.rows[r][j];
                }
            }
        }
        z
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let piv = self.rows[r][q];
        debug_assert!(piv.abs() > PIVOT_TOL);
        let inv = 1.0 / piv;
        for v in self.rows[r].iter_mut() {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][q];
            if factor != 0.0 {
                for j in 0..self.n_total {
                    self.rows[i][j] -= factor * pivot_row[j];
                }
                self.rows[i][q] = 0.0;
                self.rhs[i] -= factor * pivot_rhs;
            }
        }
    }

    /// One Bland-rule simplex pass minimizing `cost`. Returns false on
    /// unboundedness.
    fn run(&mut self, cost: &[f64], max_iter: usize) -> Result<bool, LpError> {
        for _ in 0..max_iter {
            let z = self.reduced_costs(cost);
            let mut entering = None;
            for j in 0..self.n_total {
                if self.upper[j] - self.lower[j] <= 0.0 {
                    continue; // fixed variables never move
                }
                match self.status[j] {
                    VarStatus::AtLower if z[j] < -PIVOT_TOL => {
                        entering = Some((j, 1.0));
                    }
                    VarStatus::AtUpper if z[j] > PIVOT_TOL => {
                        entering = Some((j, -1.0));
                    }
                    _ => continue,
                }
                if entering.is_some() {
                    break;
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(true);
            };

            let bx = self.basic_values();
            let row_limit = |r: usize, bvar: usize| -> Option<(f64, f64)> {
                let coeff = -dir * self.rows[r][q];
                if coeff > PIVOT_TOL {
                    Some((
                        ((self.upper[bvar] - bx[r]) / coeff).max(0.0),
                        self.upper[bvar],
                    ))
                } else if coeff < -PIVOT_TOL {
                    Some((
                        ((self.lower[bvar] - bx[r]) / coeff).max(0.0),
                        self.lower[bvar],
                    ))
                } else {
                    None
                }
            };

            // Minimum step before the entering variable or some basic variable
            // hits a bound; the entering variable's own range allows a plain
            // bound flip.
            let mut min_ratio = self.upper[q] - self.lower[q];
            for (r, &bvar) in self.basis.iter().enumerate() {
                if let Some((ratio, _)) = row_limit(r, bvar) {
                    min_ratio = min_ratio.min(ratio);
                }
            }
            if min_ratio.is_infinite() {
                return Ok(false);
            }

            // Bland: among all limits tied at the minimum, leave on the
            // smallest variable index. The flip option counts with index q.
            let threshold = min_ratio + 1e-12;
            let mut best_var = if self.upper[q] - self.lower[q] <= threshold {
                Some(q)
            } else {
                None
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, &bvar) in self.basis.iter().enumerate() {
                if let Some((ratio, bound)) = row_limit(r, bvar) {
                    if ratio <= threshold && best_var.is_none_or(|bv| bvar < bv) {
                        best_var = Some(bvar);
                        leave = Some((r, bound));
                    }
                }
            }
            let best = min_ratio;

            match leave {
                None => {
                    // Entering variable flips to its opposite bound.
                    self.status[q] = match self.status[q] {
                        VarStatus::AtLower => {
                            self.val[q] = self.upper[q];
                            VarStatus::AtUpper
                        }
                        VarStatus::AtUpper => {
                            self.val[q] = self.lower[q];
                            VarStatus::AtLower
                        }
                        VarStatus::Basic(_) => unreachable!("entering variable is nonbasic"),
                    };
                }
                Some((r, bound)) => {
                    let leaving = self.basis[r];
                    self.val[q] += dir * best;
                    self.val[leaving] = bound;
                    self.status[leaving] = if bound == self.upper[leaving]
                        && self.lower[leaving] != self.upper[leaving]
                    {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.pivot(r, q);
                    self.status[q] = VarStatus::Basic(r);
                    self.basis[r] = q;
                }
            }
        }
        Err(LpError::IterationLimit(max_iter))
    }

    fn drop_row(&mut self, r: usize) {
        self.rows.swap_remove(r);
        self.rhs.swap_remove(r);
        let removed = self.basis.swap_remove(r);
        self.status[removed] = VarStatus::AtLower;
        self.val[removed] = self.lower[removed];
        if r < self.basis.len() {
            self.status[self.basis[r]] = VarStatus::Basic(r);
        }
    }
}

/// Solve a box-bounded linear program exactly.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.objective.len();
    let m = lp.constraints.len();
    let n_total = n + 2 * m; // structurals, slacks, artificials

    let mut lower = vec![0.0; n_total];
    let mut upper = vec![0.0; n_total];
    lower[..n].copy_from_slice(&lp.lower);
    upper[..n].copy_from_slice(&lp.upper);
    for (i, c) in lp.constraints.iter().enumerate() {
        let (lo, hi) = match c.op {
            ConstraintOp::Le => (0.0, f64::INFINITY),
            ConstraintOp::Ge => (f64::NEG_INFINITY, 0.0),
            ConstraintOp::Eq => (0.0, 0.0),
        };
        lower[n + i] = lo;
        upper[n + i] = hi;
        // Artificials start disabled; enabled per-row below when needed.
        lower[n + m + i] = 0.0;
        upper[n + m + i] = 0.0;
    }

    let mut status = vec![VarStatus::AtLower; n_total];
    let mut val = lower.clone();
    val[..n].copy_from_slice(&lp.lower);

    // Build rows [A | I | D] and choose the starting basis per row: the slack
    // when the residual fits its bounds, otherwise an artificial.
    let mut rows = vec![vec![0.0; n_total]; m];
    let mut rhs = vec![0.0; m];
    let mut basis = vec![0usize; m];
    let mut need_phase1 = false;
    for (i, c) in lp.constraints.iter().enumerate() {
        rows[i][..n].copy_from_slice(&c.coeffs);
        rows[i][n + i] = 1.0;
        rhs[i] = c.rhs;
        let resid = c.rhs
            - c.coeffs
                .iter()
                .zip(&val[..n])
                .map(|(a, x)| a * x)
                .sum::<f64>();
        if resid >= lower[n + i] - FEAS_TOL && resid <= upper[n + i] + FEAS_TOL {
            basis[i] = n + i;
            status[n + i] = VarStatus::Basic(i);
        } else {
            // Clamp the slack to its nearest bound and cover the gap with an
            // artificial of matching sign.
            let clamped = resid.clamp(lower[n + i], upper[n + i]);
            let clamped = if clamped.is_finite() { clamped } else { 0.0 };
            val[n + i] = clamped;
            status[n + i] = if clamped == upper[n + i] && lower[n + i] != upper[n + i] {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            let gap = resid - clamped;
            if gap < 0.0 {
                // Keep the basis column at +1 so the starting tableau is
                // B^-1 A with identity basis columns.
                for v in rows[i].iter_mut() {
                    *v = -*v;
                }
                rhs[i] = -rhs[i];
            }
            rows[i][n + m + i] = 1.0;
            upper[n + m + i] = f64::INFINITY;
            basis[i] = n + m + i;
            status[n + m + i] = VarStatus::Basic(i);
            need_phase1 = true;
        }
    }

    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        status,
        val,
        lower,
        upper,
        n_total,
    };
    let max_iter = 2000 * (n_total + m + 10);

    if need_phase1 {
        let mut cost1 = vec![0.0; n_total];
        for j in n + m..n_total {
            if tab.upper[j] > 0.0 {
                cost1[j] = 1.0;
            }
        }
        let bounded = tab.run(&cost1, max_iter)?;
        debug_assert!(bounded, "phase-1 objective is bounded below by zero");
        let bx = tab.basic_values();
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= n + m)
            .map(|(r, _)| bx[r].abs())
            .sum();
        if infeas > FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                value: f64::NAN,
                point: vec![],
            });
        }
        // Pivot zero-valued artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.basis.len() {
            if tab.basis[r] >= n + m {
                let col = (0..n + m).find(|&j| {
                    !matches!(tab.status[j], VarStatus::Basic(_))
                        && tab.rows[r][j].abs() > PIVOT_TOL
                });
                match col {
                    Some(q) => {
                        let art = tab.basis[r];
                        tab.pivot(r, q);
                        tab.status[q] = VarStatus::Basic(r);
                        tab.basis[r] = q;
                        tab.status[art] = VarStatus::AtLower;
                        tab.val[art] = 0.0;
                        tab.upper[art] = 0.0;
                        r += 1;
                    }
                    None => tab.drop_row(r),
                }
            } else {
                r += 1;
            }
        }
        // Freeze all artificials for phase 2.
        for j in n + m..n_total {
            tab.upper[j] = 0.0;
        }
    }

    let mut cost = vec![0.0; n_total];
    let flip = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for j in 0..n {
        cost[j] = flip * lp.objective[j];
    }
    let bounded = tab.run(&cost, max_iter)?;
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NAN,
            point: vec![],
        });
    }

    let bx = tab.basic_values();
    for (r, &j) in tab.basis.iter().enumerate() {
        tab.val[j] = bx[r];
    }
    let point: Vec<f64> = (0..n)
        .map(|j| tab.val[j].clamp(lp.lower[j], lp.upper[j]))
        .collect();
    let value = lp.evaluate(&point);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        point,
    })
}
