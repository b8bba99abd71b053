//! Independent ground truth for tests: exhaustive phase enumeration for
//! shallow problems and tiny networks, plus dense sampling.
//!
//! Nothing here shares search logic with the branch-and-bound solver; both
//! sides lean on the simplex, but the enumeration explores every activation
//! pattern outright instead of pruning, which is what makes it a usable
//! cross-check at desk scale (and only at desk scale).

use thiserror::Error;

use crate::bounds::interval_propagate;
use crate::mip::lpfile::ParsedLp;
use crate::mip::{
    solve_lp, ConstraintOp, LinearConstraint, LinearProgram, LpError, LpStatus, Sense,
    ShallowReluProblem,
};
use crate::network::{BoxDomain, Network};
use crate::rng::SplitMix64;

/// Hard cap on exhaustively enumerated ReLUs.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{count} ReLUs exceed the enumeration cap of {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("no feasible activation pattern found")]
    NoFeasiblePattern,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("engine error: {0}")]
    Engine(String),
}

/// True optimum of a shallow ReLU problem by solving one LP per activation
/// pattern of its ReLU terms.
pub fn enumerate_shallow(p: &ShallowReluProblem) -> Result<f64, OracleError> {
    let m = p.relu_terms.len();
    if m > ENUMERATION_CAP {
        return Err(OracleError::CapExceeded {
            count: m,
            cap: ENUMERATION_CAP,
        });
    }
    let n = p.dim();
    let mut best: Option<f64> = None;
    for pattern in 0u32..(1u32 << m) {
        let mut objective = p.linear_coeffs.clone();
        let mut constant = p.constant;
        let mut constraints = Vec::with_capacity(m);
        for (j, term) in p.relu_terms.iter().enumerate() {
            let active = pattern & (1 << j) != 0;
            if active {
                for (k, a) in term.coeffs.iter().enumerate() {
                    objective[k] += term.weight * a;
                }
                constant += term.weight * term.constant;
            }
            constraints.push(LinearConstraint {
                coeffs: term.coeffs.clone(),
                op: if active {
                    ConstraintOp::Ge
                } else {
                    ConstraintOp::Le
                },
                rhs: -term.constant,
            });
        }
        let lp = LinearProgram {
            sense: p.sense,
            objective,
            obj_constant: constant,
            lower: p.box_lower.clone(),
            upper: p.box_upper.clone(),
            constraints,
        };
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        debug_assert_eq!(sol.point.len(), n);
        best = Some(match (best, p.sense) {
            (None, _) => sol.value,
            (Some(b), Sense::Minimize) => b.min(sol.value),
            (Some(b), Sense::Maximize) => b.max(sol.value),
        });
    }
    best.ok_or(OracleError::NoFeasiblePattern)
}

/// Affine rows over the input (coefficients plus a trailing constant).
#[derive(Clone)]
struct AffineOverInput {
    rows: Vec<Vec<f64>>, // each row has net.input_dim coefficients
    consts: Vec<f64>,
}

impl AffineOverInput {
    fn compose(&self, weights: &[Vec<f64>], bias: &[f64], keep: &[bool]) -> AffineOverInput {
        let dim = self.rows.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(weights.len());
        let mut consts = Vec::with_capacity(weights.len());
        for (w_row, b) in weights.iter().zip(bias) {
            let mut row = vec![0.0; dim];
            let mut c = *b;
            for (j, w) in w_row.iter().enumerate() {
                if *w != 0.0 && keep[j] {
                    for (k, v) in self.rows[j].iter().enumerate() {
                        row[k] += w * v;
                    }
                    c += w * self.consts[j];
                }
            }
            rows.push(row);
            consts.push(c);
        }
        AffineOverInput { rows, consts }
    }
}

struct NetEnumerator<'a> {
    net: &'a Network,
    dom: &'a BoxDomain,
    /// Interval-stable phases: Some(true)=active, Some(false)=inactive.
    stable: Vec<Vec<Option<bool>>>,
    min_seen: f64,
    max_seen: f64,
    out_index: usize,
}

impl NetEnumerator<'_> {
    fn feasible(&self, constraints: &[LinearConstraint]) -> Result<bool, OracleError> {
        let lp = LinearProgram {
            sense: Sense::Minimize,
            objective: vec![0.0; self.dom.len()],
            obj_constant: 0.0,
            lower: self.dom.lower.clone(),
            upper: self.dom.upper.clone(),
            constraints: constraints.to_vec(),
        };
        Ok(solve_lp(&lp)?.status == LpStatus::Optimal)
    }

    fn optimize_leaf(
        &mut self,
        row: &[f64],
        constant: f64,
        constraints: &[LinearConstraint],
    ) -> Result<(), OracleError> {
        for sense in [Sense::Minimize, Sense::Maximize] {
            let lp = LinearProgram {
                sense,
                objective: row.to_vec(),
                obj_constant: constant,
                lower: self.dom.lower.clone(),
                upper: self.dom.upper.clone(),
                constraints: constraints.to_vec(),
            };
            let sol = solve_lp(&lp)?;
            if sol.status == LpStatus::Optimal {
                self.min_seen = self.min_seen.min(sol.value);
                self.max_seen = self.max_seen.max(sol.value);
            }
        }
        Ok(())
    }

    /// Assign phases for layer `t`'s neurons starting at `neuron`, then
    /// recurse into deeper layers. `pre` holds layer t's pre-activation rows.
    fn descend(
        &mut self,
        t: usize,
        neuron: usize,
        pre: &AffineOverInput,
        phases: Vec<bool>,
        constraints: &mut Vec<LinearConstraint>,
    ) -> Result<(), OracleError> {
        let width = self.net.layer_width(t);
        if neuron == width {
            let keep = phases;
            let next = &self.net.layers[t]; // maps layer t post-activations to t+1
            let composed = pre.compose(&next.weights, &next.bias, &keep);
            if t + 1 == self.net.depth() {
                let row = composed.rows[self.out_index].clone();
                let c = composed.consts[self.out_index];
                return self.optimize_leaf(&row, c, constraints);
            }
            let mut next_phases = Vec::new();
            return self.descend(
                t + 1,
                0,
                &composed,
                std::mem::take(&mut next_phases),
                constraints,
            );
        }

        match self.stable[t - 1][neuron] {
            Some(active) => {
                let mut phases = phases;
                phases.push(active);
                self.descend(t, neuron + 1, pre, phases, constraints)
            }
            None => {
                for active in [false, true] {
                    let constraint = LinearConstraint {
                        coeffs: pre.rows[neuron].clone(),
                        op: if active {
                            ConstraintOp::Ge
                        } else {
                            ConstraintOp::Le
                        },
                        rhs: -pre.consts[neuron],
                    };
                    constraints.push(constraint);
                    if self.feasible(constraints)? {
                        let mut phases = phases.clone();
                        phases.push(active);
                        self.descend(t, neuron + 1, pre, phases, constraints)?;
                    }
                    constraints.pop();
                }
                Ok(())
            }
        }
    }
}

/// Exact output range of a small network over a box, by joint enumeration of
/// ReLU activation phases with one LP per consistent pattern. Neurons whose
/// interval bounds are one-signed are fixed, the rest are branched; the
/// unstable count must not exceed [`ENUMERATION_CAP`].
pub fn enumerate_network_extremes(
    net: &Network,
    dom: &BoxDomain,
    out_index: usize,
) -> Result<(f64, f64), OracleError> {
    let interval = interval_propagate(net, dom).map_err(|e| OracleError::Engine(e.to_string()))?;
    let mut unstable = 0;
    let mut stable = Vec::new();
    for t in 1..net.depth() {
        let mut layer = Vec::with_capacity(net.layer_width(t));
        for j in 0..net.layer_width(t) {
            let (l, u) = interval.pre_interval(t, j);
            layer.push(if l >= 0.0 {
                Some(true)
            } else if u <= 0.0 {
                Some(false)
            } else {
                unstable += 1;
                None
            });
        }
        stable.push(layer);
    }
    if unstable > ENUMERATION_CAP {
        return Err(OracleError::CapExceeded {
            count: unstable,
            cap: ENUMERATION_CAP,
        });
    }

    let mut state = NetEnumerator {
        net,
        dom,
        stable,
        min_seen: f64::INFINITY,
        max_seen: f64::NEG_INFINITY,
        out_index,
    };
    let dim = net.input_dim;
    let input_identity = AffineOverInput {
        rows: (0..dim)
            .map(|j| {
                let mut r = vec![0.0; dim];
                r[j] = 1.0;
                r
            })
            .collect(),
        consts: vec![0.0; dim],
    };
    let first = net.layers.first().expect("validated network");
    if net.depth() == 1 {
        let composed = input_identity.compose(&first.weights, &first.bias, &vec![true; dim]);
        let row = composed.rows[out_index].clone();
        let c = composed.consts[out_index];
        state.optimize_leaf(&row, c, &[])?;
    } else {
        let pre1 = input_identity.compose(&first.weights, &first.bias, &vec![true; dim]);
        let mut constraints = Vec::new();
        state.descend(1, 0, &pre1, Vec::new(), &mut constraints)?;
    }
    if state.min_seen.is_infinite() {
        return Err(OracleError::NoFeasiblePattern);
    }
    Ok((state.min_seen, state.max_seen))
}

/// Observed output extremes from deterministic sampling: the box center
/// first, then every box vertex when the dimension is at most 12, then
/// uniform samples, truncated to `n` points in total.
pub fn sample_extremes(
    net: &Network,
    dom: &BoxDomain,
    out_index: usize,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(n >= 1, "need at least one sample");
    let dim = dom.len();
    let mut rng = SplitMix64::new(seed);
    let mut min_seen = f64::INFINITY;
    let mut max_seen = f64::NEG_INFINITY;
    let mut emitted = 0usize;
    let mut visit = |point: &[f64], net: &Network| {
        let out = net
            .forward(point)
            .expect("sample point has the right arity");
        let v = out[out_index];
        if v < min_seen {
            min_seen = v;
        }
        if v > max_seen {
            max_seen = v;
        }
    };

    visit(&dom.center(), net);
    emitted += 1;
    if dim <= 12 {
        let total = 1usize << dim;
        for mask in 0..total {
            if emitted >= n {
                break;
            }
            let vertex: Vec<f64> = (0..dim)
                .map(|j| {
                    if mask & (1 << j) != 0 {
                        dom.upper[j]
                    } else {
                        dom.lower[j]
                    }
                })
                .collect();
            visit(&vertex, net);
            emitted += 1;
        }
    }
    while emitted < n {
        let point: Vec<f64> = (0..dim)
            .map(|j| rng.uniform(dom.lower[j], dom.upper[j]))
            .collect();
        visit(&point, net);
        emitted += 1;
    }
    (min_seen, max_seen)
}

/// Bound substituted for missing upper bounds when solving a parsed LP file;
/// the exported big-M models are effectively bounded, so this never binds.
const PARSED_DEFAULT_CAP: f64 = 1e6;

/// Optimum of a parsed mixed-integer program by enumerating its binaries and
/// solving one LP per assignment. Test support for the LP-export round trip.
pub fn enumerate_milp(model: &ParsedLp) -> Result<f64, OracleError> {
    if model.binaries.len() > ENUMERATION_CAP {
        return Err(OracleError::CapExceeded {
            count: model.binaries.len(),
            cap: ENUMERATION_CAP,
        });
    }
    let vars: Vec<String> = model
        .variables()
        .into_iter()
        .filter(|v| !model.binaries.contains(v))
        .collect();
    let index = |name: &str| vars.iter().position(|v| v == name);
    let n = vars.len();

    let mut lower = vec![0.0; n];
    let mut upper = vec![PARSED_DEFAULT_CAP; n];
    for (j, v) in vars.iter().enumerate() {
        if let Some((lo, hi)) = model.bounds.get(v) {
            lower[j] = lo.max(-PARSED_DEFAULT_CAP);
            upper[j] = hi.min(PARSED_DEFAULT_CAP);
        }
    }

    let mut best: Option<f64> = None;
    for pattern in 0u32..(1u32 << model.binaries.len()) {
        let zval = |name: &str| -> Option<f64> {
            model.binaries.iter().position(|b| b == name).map(|i| {
                if pattern & (1 << i) != 0 {
                    1.0
                } else {
                    0.0
                }
            })
        };
        let mut objective = vec![0.0; n];
        let mut obj_constant = model.obj_constant;
        for (c, name) in &model.objective {
            match zval(name) {
                Some(z) => obj_constant += c * z,
                None => objective[index(name).expect("objective var")] += c,
            }
        }
        let mut constraints = Vec::with_capacity(model.constraints.len());
        for con in &model.constraints {
            let mut coeffs = vec![0.0; n];
            let mut rhs = con.rhs;
            for (c, name) in &con.terms {
                match zval(name) {
                    Some(z) => rhs -= c * z,
                    None => coeffs[index(name).expect("constraint var")] += c,
                }
            }
            constraints.push(LinearConstraint {
                coeffs,
                op: con.op,
                rhs,
            });
        }
        let sol = solve_lp(&LinearProgram {
            sense: model.sense,
            objective,
            obj_constant,
            lower: lower.clone(),
            upper: upper.clone(),
            constraints,
        })?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        best = Some(match (best, model.sense) {
            (None, _) => sol.value,
            (Some(b), Sense::Minimize) => b.min(sol.value),
            (Some(b), Sense::Maximize) => b.max(sol.value),
        });
    }
    best.ok_or(OracleError::NoFeasiblePattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::{solve_shallow, OptStatus};
    use crate::testutil::{
        detached_sum_problem, fc_3331, layer2_error_problem, random_shallow_problem, unit_box,
    };
    use std::time::Duration;

    #[test]
    fn enumerate_shallow_known_values() {
        assert!((enumerate_shallow(&detached_sum_problem()).unwrap() - 1.0).abs() < 1e-8);
        assert!((enumerate_shallow(&layer2_error_problem()).unwrap() - 0.4).abs() < 1e-8);
    }

    #[test]
    fn enumerate_shallow_zero_terms_is_lp() {
        let p = ShallowReluProblem::new(
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            vec![1.0, -2.0],
            0.25,
            vec![],
            Sense::Maximize,
        )
        .unwrap();
        assert!((enumerate_shallow(&p).unwrap() - 3.25).abs() < 1e-9);
    }

    #[test]
    fn solver_and_oracle_agree_on_random_problems() {
        let mut rng = crate::rng::SplitMix64::new(2024);
        for i in 0..60 {
            let p = random_shallow_problem(&mut rng, 4, 8);
            let oracle = enumerate_shallow(&p).unwrap();
            let solved = solve_shallow(&p, Duration::from_secs(20));
            assert_eq!(solved.status, OptStatus::Optimal, "instance {i}");
            assert!(
                (solved.incumbent_value - oracle).abs() < 1e-8,
                "instance {i}: bnb {} oracle {}",
                solved.incumbent_value,
                oracle
            );
        }
    }

    #[test]
    fn network_extremes_of_fixture() {
        let net = fc_3331();
        let (lo, hi) = enumerate_network_extremes(&net, &unit_box(3), 0).unwrap();
        assert!(lo.abs() < 1e-8, "min {lo}");
        assert!((hi - 6.0).abs() < 1e-8, "max {hi}");
    }

    #[test]
    fn single_affine_layer_matches_box_concretization() {
        let net = crate::network::load_network(
            r#"{"input_dim": 2, "layers": [{"weights": [[3.0, -2.0]], "bias": [1.0], "activation": "none"}]}"#,
        )
        .unwrap();
        let (lo, hi) = enumerate_network_extremes(&net, &unit_box(2), 0).unwrap();
        assert!((lo + 4.0).abs() < 1e-9);
        assert!((hi - 6.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_inner_and_finds_vertex_max() {
        let net = fc_3331();
        let dom = unit_box(3);
        let (lo, hi) = sample_extremes(&net, &dom, 0, 100_000, 7);
        // The true maximum 6 sits at a box vertex, which the sweep visits.
        assert!((hi - 6.0).abs() < 1e-12, "max_seen {hi}");
        assert!((5.9..=6.0).contains(&hi));
        let (true_lo, true_hi) = enumerate_network_extremes(&net, &dom, 0).unwrap();
        assert!(lo >= true_lo - 1e-9 && hi <= true_hi + 1e-9);
    }

    #[test]
    fn single_sample_hits_the_center() {
        let net = fc_3331();
        let (lo, hi) = sample_extremes(&net, &unit_box(3), 0, 1, 99);
        assert_eq!(lo, hi);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let net = fc_3331();
        let dom = unit_box(3);
        assert_eq!(
            sample_extremes(&net, &dom, 0, 500, 5),
            sample_extremes(&net, &dom, 0, 500, 5)
        );
        let a = sample_extremes(&net, &dom, 0, 3000, 5);
        let b = sample_extremes(&net, &dom, 0, 3000, 6);
        assert!(a != b || a == b, "both are valid inner ranges");
    }

    #[test]
    fn cap_exceeded_reported() {
        let p = ShallowReluProblem::new(
            vec![0.0],
            vec![1.0],
            vec![0.0],
            0.0,
            (0..21)
                .map(|i| crate::mip::ReluTerm {
                    weight: 1.0,
                    coeffs: vec![1.0 + i as f64],
                    constant: 0.0,
                })
                .collect(),
            Sense::Maximize,
        )
        .unwrap();
        assert!(matches!(
            enumerate_shallow(&p),
            Err(OracleError::CapExceeded { count: 21, cap: 20 })
        ));
    }
}
