//! Exact optimizer for shallow ReLU problems.
//!
//! A shallow problem is `c.v + d + sum_j w_j * relu(a_j.v + b_j)` over a box;
//! no nested ReLUs. These are solved exactly by branch and bound over ReLU
//! activation phases with LP-relaxation bounding. Big-M encodings appear only
//! in the LP-format export path ([`lpfile`]); the internal solver branches on
//! phases instead, which keeps the numerics free of M constants.

pub mod lpfile;
pub mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use lpfile::{export_lp_text, parse_lp_text, LpFileError, ParsedLp};
pub use simplex::{
    solve_lp, ConstraintOp, LinearConstraint, LinearProgram, LpError, LpSolution, LpStatus, Sense,
};

/// One weighted ReLU of an affine form: `weight * relu(coeffs.v + constant)`.
#[derive(Debug, Clone)]
pub struct ReluTerm {
    pub weight: f64,
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl ReluTerm {
    fn pre_activation(&self, point: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(point)
            .map(|(a, x)| a * x)
            .sum::<f64>()
            + self.constant
    }

    /// Interval of the pre-activation over the given box.
    fn interval(&self, lower: &[f64], upper: &[f64]) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (j, a) in self.coeffs.iter().enumerate() {
            if *a >= 0.0 {
                lo += a * lower[j];
                hi += a * upper[j];
            } else {
                lo += a * upper[j];
                hi += a * lower[j];
            }
        }
        (lo, hi)
    }
}

/// Optimization of a linear term plus weighted ReLUs of affine forms over a box.
#[derive(Debug, Clone)]
pub struct ShallowReluProblem {
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    pub linear_coeffs: Vec<f64>,
    pub constant: f64,
    pub relu_terms: Vec<ReluTerm>,
    pub sense: Sense,
}

#[derive(Debug, Error)]
pub enum MipError {
    #[error("malformed shallow problem: {0}")]
    Malformed(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl ShallowReluProblem {
    /// Build a validated problem. Terms with an all-zero affine part are
    /// folded into the constant, and zero-weight terms are dropped.
    pub fn new(
        box_lower: Vec<f64>,
        box_upper: Vec<f64>,
        linear_coeffs: Vec<f64>,
        constant: f64,
        relu_terms: Vec<ReluTerm>,
        sense: Sense,
    ) -> Result<Self, MipError> {
        let n = box_lower.len();
        if box_upper.len() != n || linear_coeffs.len() != n {
            return Err(MipError::Malformed("dimension mismatch".into()));
        }
        for j in 0..n {
            if !box_lower[j].is_finite() || !box_upper[j].is_finite() || box_lower[j] > box_upper[j]
            {
                return Err(MipError::Malformed(format!("bad box at coordinate {j}")));
            }
        }
        let mut folded = constant;
        let mut terms = Vec::with_capacity(relu_terms.len());
        for term in relu_terms {
            if term.coeffs.len() != n {
                return Err(MipError::Malformed("relu term arity mismatch".into()));
            }
            if term.weight == 0.0 {
                continue;
            }
            if term.coeffs.iter().all(|a| *a == 0.0) {
                folded += term.weight * term.constant.max(0.0);
            } else {
                terms.push(term);
            }
        }
        Ok(ShallowReluProblem {
            box_lower,
            box_upper,
            linear_coeffs,
            constant: folded,
            relu_terms: terms,
            sense,
        })
    }

    pub fn dim(&self) -> usize {
        self.box_lower.len()
    }

    /// Exact objective value at a point.
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        let mut v = self.constant;
        for (c, x) in self.linear_coeffs.iter().zip(point) {
            v += c * x;
        }
        for term in &self.relu_terms {
            v += term.weight * term.pre_activation(point).max(0.0);
        }
        v
    }

    /// Negate the objective, turning max into min and vice versa.
    fn negated(&self) -> ShallowReluProblem {
        ShallowReluProblem {
            box_lower: self.box_lower.clone(),
            box_upper: self.box_upper.clone(),
            linear_coeffs: self.linear_coeffs.iter().map(|c| -c).collect(),
            constant: -self.constant,
            relu_terms: self
                .relu_terms
                .iter()
                .map(|t| ReluTerm {
                    weight: -t.weight,
                    coeffs: t.coeffs.clone(),
                    constant: t.constant,
                })
                .collect(),
            sense: match self.sense {
                Sense::Minimize => Sense::Maximize,
                Sense::Maximize => Sense::Minimize,
            },
        }
    }
}

/// Solver status for a shallow problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptStatus {
    Optimal,
    BudgetExhausted,
}

/// Result of a shallow solve. For `Minimize`, `certified_bound` is a valid
/// global lower bound and `incumbent_value` a feasible objective value;
/// mirrored for `Maximize`.
#[derive(Debug, Clone)]
pub struct OptResult {
    pub certified_bound: f64,
    pub incumbent_value: f64,
    pub incumbent_point: Vec<f64>,
    pub status: OptStatus,
    pub nodes_explored: u64,
}

/// Relative convergence gap used by [`solve_shallow`]. Much tighter than the
/// engine's default tolerance: the exactness tests compare against the
/// enumeration oracle at absolute 1e-8, and the certified/incumbent gap is
/// bounded by this value times the incumbent scale.
pub const DEFAULT_REL_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Free,
    Active,
    Inactive,
}

/// Min-heap entry ordered by bound, then insertion order.
struct OpenNode {
    bound: f64,
    seq: u64,
    phases: Vec<Phase>,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest bound first.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct BnB<'a> {
    problem: &'a ShallowReluProblem, // canonical minimize form
    intervals: Vec<(f64, f64)>,
    root_phases: Vec<Phase>,
    rel_gap: f64,
}

impl<'a> BnB<'a> {
    fn new(problem: &'a ShallowReluProblem, rel_gap: f64) -> Self {
        let intervals: Vec<(f64, f64)> = problem
            .relu_terms
            .iter()
            .map(|t| t.interval(&problem.box_lower, &problem.box_upper))
            .collect();
        // One-signed terms are fixed immediately and never branched.
        let root_phases = intervals
            .iter()
            .map(|&(lo, hi)| {
                if lo >= 0.0 {
                    Phase::Active
                } else if hi <= 0.0 {
                    Phase::Inactive
                } else {
                    Phase::Free
                }
            })
            .collect();
        BnB {
            problem,
            intervals,
            root_phases,
            rel_gap,
        }
    }

    /// Build and solve the LP relaxation of a node. Free terms with positive
    /// weight are exact (the epigraph of a convex term); free terms with
    /// negative weight are relaxed with the chord of the triangle.
    fn node_lp(&self, phases: &[Phase]) -> Result<LpSolution, LpError> {
        let p = self.problem;
        let n = p.dim();
        let free: Vec<usize> = (0..phases.len())
            .filter(|&j| phases[j] == Phase::Free)
            .collect();
        let total = n + free.len();

        let mut objective = vec![0.0; total];
        let mut obj_constant = p.constant;
        objective[..n].copy_from_slice(&p.linear_coeffs);

        let mut lower = vec![0.0; total];
        let mut upper = vec![0.0; total];
        lower[..n].copy_from_slice(&p.box_lower);
        upper[..n].copy_from_slice(&p.box_upper);

        let mut constraints = Vec::new();
        for (slot, &j) in free.iter().enumerate() {
            let term = &p.relu_terms[j];
            let (lo, hi) = self.intervals[j];
            let col = n + slot;
            objective[col] = term.weight;
            lower[col] = 0.0;
            upper[col] = hi.max(0.0);
            // s_j >= a_j.v + b_j
            let mut coeffs = vec![0.0; total];
            coeffs[..n].copy_from_slice(&term.coeffs);
            coeffs[col] = -1.0;
            constraints.push(LinearConstraint {
                coeffs,
                op: ConstraintOp::Le,
                rhs: -term.constant,
            });
            if term.weight < 0.0 {
                // s_j <= slope * (a_j.v + b_j) + intercept (the chord).
                let slope = hi / (hi - lo);
                let intercept = -hi * lo / (hi - lo);
                let mut coeffs = vec![0.0; total];
                for (k, a) in term.coeffs.iter().enumerate() {
                    coeffs[k] = -slope * a;
                }
                coeffs[col] = 1.0;
                constraints.push(LinearConstraint {
                    coeffs,
                    op: ConstraintOp::Le,
                    rhs: slope * term.constant + intercept,
                });
            }
        }
        for (j, phase) in phases.iter().enumerate() {
            let term = &p.relu_terms[j];
            match phase {
                Phase::Free => {}
                Phase::Active => {
                    obj_constant += term.weight * term.constant;
                    for (k, a) in term.coeffs.iter().enumerate() {
                        objective[k] += term.weight * a;
                    }
                    // Implied when the term is one-signed over the whole box.
                    if self.intervals[j].0 < 0.0 {
                        let mut coeffs = vec![0.0; total];
                        coeffs[..n].copy_from_slice(&term.coeffs);
                        constraints.push(LinearConstraint {
                            coeffs,
                            op: ConstraintOp::Ge,
                            rhs: -term.constant,
                        });
                    }
                }
                Phase::Inactive => {
                    if self.intervals[j].1 > 0.0 {
                        let mut coeffs = vec![0.0; total];
                        coeffs[..n].copy_from_slice(&term.coeffs);
                        constraints.push(LinearConstraint {
                            coeffs,
                            op: ConstraintOp::Le,
                            rhs: -term.constant,
                        });
                    }
                }
            }
        }

        solve_lp(&LinearProgram {
            sense: Sense::Minimize,
            objective,
            obj_constant,
            lower,
            upper,
            constraints,
        })
    }

    /// Branch on the free term with the largest potential relaxation error,
    /// `|w_j| * min(U_j, -L_j)`; ties go to the lowest index.
    fn branch_term(&self, phases: &[Phase]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, phase) in phases.iter().enumerate() {
            if *phase != Phase::Free || self.problem.relu_terms[j].weight >= 0.0 {
                continue;
            }
            let (lo, hi) = self.intervals[j];
            let score = self.problem.relu_terms[j].weight.abs() * hi.min(-lo);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn gap_tol(&self, incumbent: f64) -> f64 {
        self.rel_gap * incumbent.abs().max(1.0)
    }
}

/// Minimize or maximize a shallow ReLU problem to proven optimality within
/// the time budget. On exhaustion the result still carries a valid certified
/// bound and the best incumbent found.
pub fn solve_shallow(problem: &ShallowReluProblem, budget: Duration) -> OptResult {
    solve_shallow_with(problem, budget, DEFAULT_REL_GAP)
}

pub fn solve_shallow_with(
    problem: &ShallowReluProblem,
    budget: Duration,
    rel_gap: f64,
) -> OptResult {
    match problem.sense {
        Sense::Minimize => solve_min(problem, budget, rel_gap),
        Sense::Maximize => {
            let neg = problem.negated();
            let r = solve_min(&neg, budget, rel_gap);
            OptResult {
                certified_bound: -r.certified_bound,
                incumbent_value: -r.incumbent_value,
                incumbent_point: r.incumbent_point,
                status: r.status,
                nodes_explored: r.nodes_explored,
            }
        }
    }
}

fn solve_min(problem: &ShallowReluProblem, budget: Duration, rel_gap: f64) -> OptResult {
    debug_assert_eq!(problem.sense, Sense::Minimize);
    let start = Instant::now();
    let bnb = BnB::new(problem, rel_gap);

    let mut nodes: u64 = 0;
    let mut queue: BinaryHeap<OpenNode> = BinaryHeap::new();
    let mut seq: u64 = 0;
    // Lowest bound among regions retired without exploration (gap-pruned
    // children, exact leaves, LP failures). The certificate takes the
    // minimum over these as well, so it stays a valid global lower bound no
    // matter which regions were cut short.
    let mut retired_min = f64::INFINITY;

    let root = bnb
        .node_lp(&bnb.root_phases)
        .expect("root LP over a nonempty box is well formed");
    nodes += 1;
    debug_assert_eq!(
        root.status,
        LpStatus::Optimal,
        "root relaxation is always feasible"
    );
    let point = &root.point[..problem.dim()];
    let mut incumbent = problem.evaluate(point);
    let mut incumbent_point = point.to_vec();
    queue.push(OpenNode {
        bound: root.value,
        seq,
        phases: bnb.root_phases.clone(),
    });

    let finish = |certified: f64, incumbent: f64, incumbent_point: Vec<f64>, nodes: u64, timed_out: bool| {
        let certified = certified.min(incumbent);
        let status = if !timed_out && incumbent - certified <= bnb.gap_tol(incumbent) {
            OptStatus::Optimal
        } else {
            OptStatus::BudgetExhausted
        };
        OptResult {
            certified_bound: certified,
            incumbent_value: incumbent,
            incumbent_point,
            status,
            nodes_explored: nodes,
        }
    };

    while let Some(node) = queue.pop() {
        if node.bound >= incumbent - bnb.gap_tol(incumbent) {
            // Best-first order: every remaining open node is at least as high.
            let certified = node.bound.min(retired_min);
            return finish(certified, incumbent, incumbent_point, nodes, false);
        }
        if start.elapsed() > budget {
            let open_min = node
                .bound
                .min(queue.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min));
            return finish(open_min.min(retired_min), incumbent, incumbent_point, nodes, true);
        }

        let Some(branch) = bnb.branch_term(&node.phases) else {
            // All branchable terms fixed: node.bound is exact here, and the
            // incumbent update below captured it when the node was created.
            retired_min = retired_min.min(node.bound);
            continue;
        };
        for phase in [Phase::Inactive, Phase::Active] {
            let mut phases = node.phases.clone();
            phases[branch] = phase;
            let sol = match bnb.node_lp(&phases) {
                Ok(sol) => sol,
                Err(_) => {
                    // Numerical failure: the region stays unexplored, so only
                    // the parent bound is known for it. Never claim more.
                    retired_min = retired_min.min(node.bound);
                    continue;
                }
            };
            nodes += 1;
            if sol.status != LpStatus::Optimal {
                continue; // infeasible region contributes nothing
            }
            let value = problem.evaluate(&sol.point[..problem.dim()]);
            if value < incumbent {
                incumbent = value;
                incumbent_point = sol.point[..problem.dim()].to_vec();
            }
            let bound = sol.value.max(node.bound);
            if bound < incumbent - bnb.gap_tol(incumbent) {
                seq += 1;
                queue.push(OpenNode { bound, seq, phases });
            } else {
                retired_min = retired_min.min(bound);
            }
        }
    }

    finish(retired_min, incumbent, incumbent_point, nodes, false)
}
