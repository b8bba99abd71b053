//! Back-substitution error terms and their minimization.
//!
//! Every time a ReLU layer is relaxed during back-substitution, the relaxed
//! form exceeds the true one by a per-layer error that is non-negative for
//! upper bounds (non-positive for lower bounds) over the whole box. Plain
//! symbolic propagation only uses that sign; here the error is assembled as a
//! shallow ReLU problem and minimized exactly, and the certified minimum is
//! subtracted from every candidate concretized at a later depth. The final
//! input-layer query is additionally solved exactly instead of being relaxed
//! once more.

use std::time::{Duration, Instant};

use crate::bounds::{
    concretize_box, substitute_previous_layer, Concretization, EngineConfig, EngineError,
    EngineStats, LayerBounds, Mode, ReluRelaxation, Side, SymbolicLinearForm,
};
use crate::mip::{solve_shallow_with, OptStatus, ReluTerm, Sense, ShallowReluProblem};
use crate::network::{Activation, BoxDomain, Network};

/// Time budget shared by every MIP solve of one neuron-and-side computation.
#[derive(Debug, Clone)]
pub struct NeuronBudget {
    deadline: Instant,
}

impl NeuronBudget {
    pub fn start(budget_ms: u64) -> NeuronBudget {
        NeuronBudget {
            deadline: Instant::now() + Duration::from_millis(budget_ms),
        }
    }

    pub fn remaining(&self) -> Duration {
        self.deadline.saturating_duration_since(Instant::now())
    }
}

/// The relaxation error of one activation layer, as a shallow problem over
/// the box of the layer feeding it.
#[derive(Debug, Clone)]
pub struct ErrorTerm {
    /// The activation layer whose over-approximation this error measures.
    pub layer_index: usize,
    /// Coefficients of the symbolic form at the moment layer `layer_index`
    /// was relaxed.
    pub outer_coeffs: Vec<f64>,
    /// The relaxation actually chosen for that layer.
    pub relaxation: ReluRelaxation,
    /// min/max of this problem bounds the error from below/above.
    pub problem: ShallowReluProblem,
    pub side: Side,
}

impl ErrorTerm {
    /// Error value at concrete post-activations of layer `layer_index - 1`.
    pub fn evaluate(&self, prev_post: &[f64]) -> f64 {
        self.problem.evaluate(prev_post)
    }
}

/// Build the error term created by relaxing layer `t` under `relaxation`,
/// where `form` is the symbolic form over layer `t`'s post-activations just
/// before the substitution. The error is boxed by the concrete post bounds of
/// layer `t - 1`, a superset of the reachable set.
pub fn assemble_error_term(
    form: &SymbolicLinearForm,
    relaxation: &ReluRelaxation,
    net: &Network,
    bounds: &LayerBounds,
    side: Side,
) -> Result<ErrorTerm, EngineError> {
    let t = form.layer_index;
    if t == 0 || t > net.depth() {
        return Err(EngineError::BadLayer { layer: t });
    }
    if bounds.layers() < t {
        return Err(EngineError::MissingBounds { layer: t - 1 });
    }
    let layer = &net.layers[t - 1];
    let prev_width = net.layer_width(t - 1);
    let (box_lo, box_hi) = bounds.post_box(t - 1);

    // Relaxed side minus the exact side:
    //   (w . slope) (W v + b) + w . intercept - sum_j w_j relu(W_j v + b_j).
    let mut linear = vec![0.0; prev_width];
    let mut constant = 0.0;
    let mut relu_terms = Vec::with_capacity(form.coeffs.len());
    for (j, w) in form.coeffs.iter().enumerate() {
        constant += w * relaxation.intercept[j];
        let scaled = w * relaxation.slope[j];
        if scaled != 0.0 {
            for (k, a) in layer.weights[j].iter().enumerate() {
                linear[k] += scaled * a;
            }
            constant += scaled * layer.bias[j];
        }
        relu_terms.push(ReluTerm {
            weight: -w,
            coeffs: layer.weights[j].clone(),
            constant: layer.bias[j],
        });
    }
    let sense = match side {
        Side::Upper => Sense::Minimize,
        Side::Lower => Sense::Maximize,
    };
    let problem = ShallowReluProblem::new(
        box_lo.to_vec(),
        box_hi.to_vec(),
        linear,
        constant,
        relu_terms,
        sense,
    )
    .expect("error-term problem is well formed by construction");
    Ok(ErrorTerm {
        layer_index: t,
        outer_coeffs: form.coeffs.clone(),
        relaxation: relaxation.clone(),
        problem,
        side,
    })
}

/// Outcome of one error minimization.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBound {
    /// Signed correction: subtracting it from a candidate tightens the bound.
    /// Non-negative for upper-side terms, non-positive for lower-side terms.
    pub correction: f64,
    /// Raw certified optimum bound before clamping at the trivial zero.
    pub raw_bound: f64,
    pub exhausted: bool,
}

/// Certified bound on the error-term optimum, clamped so it never falls back
/// past the trivial bound of zero. Budget exhaustion degrades gracefully: the
/// solver's certified bound is still valid, and zero is the floor.
pub fn minimize_error(
    term: &ErrorTerm,
    budget: Duration,
    tolerance: f64,
    stats: &mut EngineStats,
) -> ErrorBound {
    let result = solve_shallow_with(&term.problem, budget, tolerance);
    stats.mip_solves += 1;
    stats.bnb_nodes += result.nodes_explored;
    let exhausted = result.status == OptStatus::BudgetExhausted;
    if exhausted {
        stats.budget_exhausted += 1;
    }
    let correction = match term.side {
        Side::Upper => result.certified_bound.max(0.0),
        Side::Lower => result.certified_bound.min(0.0),
    };
    ErrorBound {
        correction,
        raw_bound: result.certified_bound,
        exhausted,
    }
}

fn shallow_for_form(
    form: &SymbolicLinearForm,
    net: &Network,
    box_lo: &[f64],
    box_hi: &[f64],
    side: Side,
) -> ShallowReluProblem {
    let p = form.layer_index;
    let layer = &net.layers[p - 1];
    let prev_width = net.layer_width(p - 1);
    let sense = match side {
        Side::Upper => Sense::Maximize,
        Side::Lower => Sense::Minimize,
    };
    match layer.activation {
        Activation::Identity => {
            let mut linear = vec![0.0; prev_width];
            let mut constant = form.constant;
            for (j, w) in form.coeffs.iter().enumerate() {
                if *w != 0.0 {
                    for (k, a) in layer.weights[j].iter().enumerate() {
                        linear[k] += w * a;
                    }
                    constant += w * layer.bias[j];
                }
            }
            ShallowReluProblem::new(
                box_lo.to_vec(),
                box_hi.to_vec(),
                linear,
                constant,
                vec![],
                sense,
            )
        }
        Activation::Relu => {
            let relu_terms = form
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, w)| ReluTerm {
                    weight: *w,
                    coeffs: layer.weights[j].clone(),
                    constant: layer.bias[j],
                })
                .collect();
            ShallowReluProblem::new(
                box_lo.to_vec(),
                box_hi.to_vec(),
                vec![0.0; prev_width],
                form.constant,
                relu_terms,
                sense,
            )
        }
    }
    .expect("partial concretization problem is well formed")
}

/// Concretize a form over layer `p` by solving the one-ReLU-deep problem
/// `form(act(W^{p-1} v + b^{p-1}))` over layer `p-1`'s post box exactly
/// (the input box when p = 1). Valid side-bound even on budget exhaustion.
pub fn concretize_partial_mip(
    form: &SymbolicLinearForm,
    net: &Network,
    bounds: &LayerBounds,
    side: Side,
    budget: Duration,
    tolerance: f64,
    stats: &mut EngineStats,
) -> Result<(f64, bool), EngineError> {
    let p = form.layer_index;
    if p == 0 || p > net.depth() {
        return Err(EngineError::BadLayer { layer: p });
    }
    if bounds.layers() < p {
        return Err(EngineError::MissingBounds { layer: p - 1 });
    }
    let (box_lo, box_hi) = bounds.post_box(p - 1);
    let problem = shallow_for_form(form, net, box_lo, box_hi, side);
    let result = solve_shallow_with(&problem, budget, tolerance);
    stats.mip_solves += 1;
    stats.bnb_nodes += result.nodes_explored;
    let exhausted = result.status == OptStatus::BudgetExhausted;
    if exhausted {
        stats.budget_exhausted += 1;
    }
    Ok((result.certified_bound, exhausted))
}

/// Exact (or certified-side) optimum of a form over layer 1's
/// post-activations, rewritten as ReLUs of input neurons over `dom`.
pub fn direct_first_layer_bound(
    form: &SymbolicLinearForm,
    net: &Network,
    dom: &BoxDomain,
    side: Side,
    budget: Duration,
    tolerance: f64,
    stats: &mut EngineStats,
) -> Result<(f64, bool), EngineError> {
    if form.layer_index != 1 {
        return Err(EngineError::BadLayer {
            layer: form.layer_index,
        });
    }
    let problem = shallow_for_form(form, net, &dom.lower, &dom.upper, side);
    let result = solve_shallow_with(&problem, budget, tolerance);
    stats.mip_solves += 1;
    stats.bnb_nodes += result.nodes_explored;
    let exhausted = result.status == OptStatus::BudgetExhausted;
    if exhausted {
        stats.budget_exhausted += 1;
    }
    Ok((result.certified_bound, exhausted))
}

/// One depth of a back-substitution trace.
#[derive(Debug, Clone)]
pub struct DepthRecord {
    /// The symbolic form over layer `form.layer_index`'s post-activations.
    pub form: SymbolicLinearForm,
    /// Box concretization at this depth, minus the running error sum.
    pub candidate_box: f64,
    /// Shallow-MIP concretization at this depth, when one was solved.
    pub candidate_mip: Option<f64>,
    /// Error corrections accumulated from deeper layers when this depth was
    /// concretized.
    pub error_sum: f64,
}

/// Result of one neuron-and-side back-substitution.
#[derive(Debug, Clone)]
pub struct BackSubOutcome {
    pub bound: f64,
    pub stats: EngineStats,
    pub trace: Vec<DepthRecord>,
    pub error_terms: Vec<ErrorTerm>,
}

/// Iterate the back-substitution from `form`'s layer down to the input,
/// keeping the tightest candidate seen across all depths.
///
/// Symbolic concretizes with the closed-form box optimum at every depth.
/// MiniMip adds one exact solve of the final input-layer query. DeepMip
/// subtracts certified error minima from every candidate below the term's
/// layer and, under the shallow-MIP concretization strategy, also solves the
/// one-ReLU-deep problem at every intermediate depth.
pub fn back_substitute(
    net: &Network,
    bounds: &LayerBounds,
    form: SymbolicLinearForm,
    side: Side,
    cfg: &EngineConfig,
    budget: &NeuronBudget,
) -> Result<BackSubOutcome, EngineError> {
    let deep = cfg.mode == Mode::DeepMip;
    let mut stats = EngineStats::default();
    let mut best = side.loosest();
    let mut err_sum = 0.0;
    let mut fallback = false;
    let mut trace = Vec::with_capacity(form.layer_index + 1);
    let mut error_terms = Vec::new();
    let mut form = form;

    loop {
        let p = form.layer_index;
        let (box_lo, box_hi) = bounds.post_box(p);
        let candidate_box = concretize_box(&form, box_lo, box_hi, side) - err_sum;
        best = side.tighter(best, candidate_box);

        let want_mip = p >= 1
            && match cfg.mode {
                Mode::DeepMip => p == 1 || cfg.concretization == Concretization::ShallowMip,
                Mode::MiniMip => p == 1,
                _ => false,
            };
        let mut candidate_mip = None;
        if want_mip {
            let remaining = budget.remaining();
            if remaining.is_zero() {
                fallback = true;
            } else {
                let (raw, exhausted) = concretize_partial_mip(
                    &form,
                    net,
                    bounds,
                    side,
                    remaining,
                    cfg.tolerance,
                    &mut stats,
                )?;
                fallback |= exhausted;
                let adjusted = raw - err_sum;
                candidate_mip = Some(adjusted);
                best = side.tighter(best, adjusted);
            }
        }
        trace.push(DepthRecord {
            form: form.clone(),
            candidate_box,
            candidate_mip,
            error_sum: err_sum,
        });

        if p == 0 {
            break;
        }
        let (next, relaxation) = substitute_previous_layer(&form, net, bounds, &cfg.alpha, side)?;
        if deep && net.activation(p) == Activation::Relu {
            let term = assemble_error_term(&form, &relaxation, net, bounds, side)?;
            let remaining = budget.remaining();
            if remaining.is_zero() {
                fallback = true;
            } else {
                let eb = minimize_error(&term, remaining, cfg.tolerance, &mut stats);
                fallback |= eb.exhausted;
                err_sum += eb.correction;
            }
            error_terms.push(term);
        }
        form = next;
    }

    if fallback {
        stats.fallback_neurons += 1;
    }
    Ok(BackSubOutcome {
        bound: best,
        stats,
        trace,
        error_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{
        back_substitute_neuron, compute_all_bounds, interval_propagate, AlphaPolicy,
    };
    use crate::network::load_network;
    use crate::testutil::{fc_3331, unit_box};

    fn zero_alpha_cfg(mode: Mode) -> EngineConfig {
        EngineConfig {
            mode,
            alpha: AlphaPolicy::explicit_zero(&[3, 3, 1]),
            ..EngineConfig::default()
        }
    }

    fn long_budget() -> Duration {
        Duration::from_secs(30)
    }

    /// Symbolic bounds of the fixture net, with the layer-2 relaxation error
    /// term assembled for the output neuron.
    fn output_layer2_error() -> ErrorTerm {
        let net = fc_3331();
        let dom = unit_box(3);
        let cfg = zero_alpha_cfg(Mode::Symbolic);
        let (bounds, _) = compute_all_bounds(&net, &dom, &cfg).unwrap();
        let form = SymbolicLinearForm::over_post(2, vec![1.0, 1.0, 1.0], 0.0);
        let (_, relaxation) =
            substitute_previous_layer(&form, &net, &bounds, &cfg.alpha, Side::Upper).unwrap();
        assemble_error_term(&form, &relaxation, &net, &bounds, Side::Upper).unwrap()
    }

    #[test]
    fn layer2_error_term_matches_hand_derivation() {
        let term = output_layer2_error();
        assert_eq!(term.layer_index, 2);
        let p = &term.problem;
        assert_eq!(p.box_lower, vec![0.0, 0.0, 0.0]);
        assert_eq!(p.box_upper, vec![2.0, 2.0, 1.0]);
        assert!(p.linear_coeffs[0].abs() < 1e-12);
        assert!((p.linear_coeffs[1] - 2.0).abs() < 1e-12);
        assert!((p.linear_coeffs[2] - 0.2).abs() < 1e-12);
        assert!((p.constant - 2.4).abs() < 1e-12);
        assert_eq!(p.relu_terms.len(), 3);
        assert!(p.relu_terms.iter().all(|t| t.weight == -1.0));
    }

    #[test]
    fn layer2_error_minimum_is_two_fifths() {
        let term = output_layer2_error();
        let mut stats = EngineStats::default();
        let eb = minimize_error(&term, long_budget(), 1e-8, &mut stats);
        assert!(!eb.exhausted);
        assert!(
            (eb.correction - 0.4).abs() < 1e-8,
            "correction {}",
            eb.correction
        );
        assert!(eb.raw_bound >= -1e-9);
    }

    #[test]
    fn first_layer_error_of_x20_is_detached_by_one() {
        // Relaxing layer 1 while upper-bounding x^2_0 yields
        // x0_0 + 2 - relu(x0_0 + x0_1) - relu(x0_0 - x0_1), minimum 1.
        let net = fc_3331();
        let dom = unit_box(3);
        let bounds = interval_propagate(&net, &dom).unwrap();
        let form = SymbolicLinearForm::over_post(1, vec![1.0, 1.0, 0.0], 0.0);
        let (_, relaxation) =
            substitute_previous_layer(&form, &net, &bounds, &AlphaPolicy::FixedZero, Side::Upper)
                .unwrap();
        let term = assemble_error_term(&form, &relaxation, &net, &bounds, Side::Upper).unwrap();
        assert_eq!(term.problem.relu_terms.len(), 2);
        assert!((term.problem.linear_coeffs[0] - 1.0).abs() < 1e-12);
        assert!((term.problem.constant - 2.0).abs() < 1e-12);
        let mut stats = EngineStats::default();
        let eb = minimize_error(&term, long_budget(), 1e-8, &mut stats);
        assert!((eb.correction - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stable_layer_error_is_zero() {
        // Shift biases so every first-layer neuron is active on the domain.
        let mut net = fc_3331();
        net.layers[0].bias = vec![10.0, 10.0, 10.0];
        let dom = unit_box(3);
        let bounds = interval_propagate(&net, &dom).unwrap();
        let form = SymbolicLinearForm::over_post(1, vec![1.0, -2.0, 0.5], 0.0);
        let (_, relaxation) =
            substitute_previous_layer(&form, &net, &bounds, &AlphaPolicy::FixedZero, Side::Upper)
                .unwrap();
        let term = assemble_error_term(&form, &relaxation, &net, &bounds, Side::Upper).unwrap();
        let mut stats = EngineStats::default();
        let eb = minimize_error(&term, long_budget(), 1e-8, &mut stats);
        assert!(eb.correction.abs() < 1e-9);
        assert!(eb.raw_bound.abs() < 1e-9);
    }

    #[test]
    fn direct_first_layer_examples() {
        let net = fc_3331();
        let dom = unit_box(3);
        let bounds = interval_propagate(&net, &dom).unwrap();
        let mut stats = EngineStats::default();
        // max(2 relu(x0 - x1) + relu(x2)/5 + 12/5) over the unit box. The
        // two ReLU arguments depend on disjoint inputs, so both peaks are
        // attained jointly: 2*2 + 1/5 + 12/5 = 6.6.
        let form = SymbolicLinearForm::over_post(1, vec![0.0, 2.0, 0.2], 2.4);
        let (v, _) = direct_first_layer_bound(
            &form,
            &net,
            &dom,
            Side::Upper,
            long_budget(),
            1e-8,
            &mut stats,
        )
        .unwrap();
        assert!((v - 6.6).abs() < 1e-8, "direct query {v}");
        let (via_partial, _) = concretize_partial_mip(
            &form,
            &net,
            &bounds,
            Side::Upper,
            long_budget(),
            1e-8,
            &mut stats,
        )
        .unwrap();
        assert!((via_partial - 6.6).abs() < 1e-12);
    }

    #[test]
    fn direct_first_layer_stable_and_min_cases() {
        // max relu(x) over [1, 2] = 2.
        let net = load_network(
            r#"{"input_dim": 1, "layers": [
                {"weights": [[1.0]], "bias": [0.0], "activation": "relu"},
                {"weights": [[1.0]], "bias": [0.0], "activation": "none"}]}"#,
        )
        .unwrap();
        let dom = BoxDomain::new(vec![1.0], vec![2.0]).unwrap();
        let mut stats = EngineStats::default();
        let form = SymbolicLinearForm::over_post(1, vec![1.0], 0.0);
        let (v, _) = direct_first_layer_bound(
            &form,
            &net,
            &dom,
            Side::Upper,
            long_budget(),
            1e-8,
            &mut stats,
        )
        .unwrap();
        assert!((v - 2.0).abs() < 1e-9);

        // min(relu(x+y) + relu(x-y)) over the unit square = 0.
        let net2 = load_network(
            r#"{"input_dim": 2, "layers": [
                {"weights": [[1.0, 1.0], [1.0, -1.0]], "bias": [0.0, 0.0], "activation": "relu"},
                {"weights": [[1.0, 1.0]], "bias": [0.0], "activation": "none"}]}"#,
        )
        .unwrap();
        let dom2 = unit_box(2);
        let form2 = SymbolicLinearForm::over_post(1, vec![1.0, 1.0], 0.0);
        let (v2, _) = direct_first_layer_bound(
            &form2,
            &net2,
            &dom2,
            Side::Lower,
            long_budget(),
            1e-8,
            &mut stats,
        )
        .unwrap();
        assert!(v2.abs() < 1e-9);
    }

    #[test]
    fn partial_mip_equals_box_concretization_on_stable_layers() {
        // When every ReLU of the substituted layer is one-signed over the
        // previous box, the one-deep solve degenerates to a linear program
        // over the box and must match the closed-form concretization of the
        // (exactly) relaxed form.
        let mut rng = crate::rng::SplitMix64::new(50);
        let mut stats = EngineStats::default();
        for _ in 0..50 {
            let mut net = crate::testutil::random_network(&mut rng, &[2, 3, 2], 1.0);
            for b in net.layers[0].bias.iter_mut() {
                *b += 6.0; // keeps layer 1 active over the unit box
            }
            let dom = unit_box(2);
            let bounds = interval_propagate(&net, &dom).unwrap();
            assert!(
                (0..3).all(|j| bounds.pre_lower[1][j] >= 0.0),
                "layer must be stable"
            );
            let form = SymbolicLinearForm::over_post(
                1,
                (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect(),
                rng.uniform(-1.0, 1.0),
            );
            for side in [Side::Upper, Side::Lower] {
                let (mip, exhausted) = concretize_partial_mip(
                    &form,
                    &net,
                    &bounds,
                    side,
                    long_budget(),
                    1e-8,
                    &mut stats,
                )
                .unwrap();
                assert!(!exhausted);
                let (sub, _) =
                    substitute_previous_layer(&form, &net, &bounds, &AlphaPolicy::FixedZero, side)
                        .unwrap();
                let boxed = crate::bounds::concretize_box(&sub, &dom.lower, &dom.upper, side);
                assert!(
                    (mip - boxed).abs() < 1e-8,
                    "side {side:?}: mip {mip} box {boxed}"
                );
            }
        }
    }

    #[test]
    fn constant_form_partial_mip_returns_constant() {
        let net = fc_3331();
        let bounds = interval_propagate(&net, &unit_box(3)).unwrap();
        let form = SymbolicLinearForm::over_post(2, vec![0.0, 0.0, 0.0], 3.25);
        let mut stats = EngineStats::default();
        let (v, _) = concretize_partial_mip(
            &form,
            &net,
            &bounds,
            Side::Upper,
            long_budget(),
            1e-8,
            &mut stats,
        )
        .unwrap();
        assert!((v - 3.25).abs() < 1e-9);
    }

    #[test]
    fn output_upper_bound_per_mode() {
        let net = fc_3331();
        let dom = unit_box(3);
        for (mode, expected) in [
            (Mode::Symbolic, 6.6),
            // The exact input-layer query evaluates to 6.6; with no error
            // subtraction MiniMip cannot go below it here.
            (Mode::MiniMip, 6.6),
            // The depth-2 shallow solve already reaches the true maximum 6,
            // and min(E^2) = 2/5 keeps later candidates at 6.2.
            (Mode::DeepMip, 6.0),
        ] {
            let cfg = zero_alpha_cfg(mode);
            let (bounds, _) = compute_all_bounds(&net, &dom, &cfg).unwrap();
            let outcome = back_substitute_neuron(&net, &bounds, 3, 0, Side::Upper, &cfg).unwrap();
            assert!(
                (outcome.bound - expected).abs() < 1e-8,
                "{mode:?}: got {} want {expected}",
                outcome.bound
            );
        }
    }

    #[test]
    fn deepmip_records_layer2_error_minimum() {
        let net = fc_3331();
        let dom = unit_box(3);
        let cfg = zero_alpha_cfg(Mode::DeepMip);
        let (bounds, _) = compute_all_bounds(&net, &dom, &cfg).unwrap();
        let outcome = back_substitute_neuron(&net, &bounds, 3, 0, Side::Upper, &cfg).unwrap();
        let record = outcome
            .trace
            .iter()
            .find(|d| d.form.layer_index == 1)
            .expect("depth over layer 1 exists");
        assert!(
            (record.error_sum - 0.4).abs() < 1e-8,
            "error sum {}",
            record.error_sum
        );
    }

    #[test]
    fn single_affine_layer_is_exact_in_every_mode() {
        let net = load_network(
            r#"{"input_dim": 2, "layers": [{"weights": [[2.0, -1.0]], "bias": [0.5], "activation": "none"}]}"#,
        )
        .unwrap();
        let dom = unit_box(2);
        for mode in [Mode::Symbolic, Mode::MiniMip, Mode::DeepMip] {
            let cfg = EngineConfig::with_mode(mode);
            let (bounds, _) = compute_all_bounds(&net, &dom, &cfg).unwrap();
            assert!((bounds.pre_upper[1][0] - 3.5).abs() < 1e-12);
            assert!((bounds.pre_lower[1][0] + 2.5).abs() < 1e-12);
        }
    }
}
