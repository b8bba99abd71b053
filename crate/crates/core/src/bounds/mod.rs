//! Concrete per-neuron bounds: interval propagation and the layer-by-layer
//! driver that back-substitutes every neuron in the selected mode.

pub mod form;
pub mod relax;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::errormin::{back_substitute, BackSubOutcome, NeuronBudget};
use crate::network::{Activation, BoxDomain, Network, NetworkError};

pub use form::{concretize_box, substitute_previous_layer, SymbolicLinearForm, VarKind};
pub use relax::{choose_alpha, relaxation_entry, AlphaError, AlphaPolicy, ReluRelaxation, Side};

/// Bound computation mode, from cheapest to tightest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interval,
    Symbolic,
    MiniMip,
    DeepMip,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Interval, Mode::Symbolic, Mode::MiniMip, Mode::DeepMip];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Interval => "interval",
            Mode::Symbolic => "symbolic",
            Mode::MiniMip => "minimip",
            Mode::DeepMip => "deepmip",
        }
    }
}

/// How DeepMip concretizes intermediate symbolic forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concretization {
    /// Closed-form optimum over the previous layer's box.
    Box,
    /// One-ReLU-deep exact solve at every depth (plus the box value).
    ShallowMip,
}

/// Engine configuration shared by all operations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: Mode,
    pub alpha: AlphaPolicy,
    /// Time budget for all MIP work on one neuron and side, in milliseconds.
    pub mip_budget_ms: u64,
    /// Concretization strategy for DeepMip; other modes ignore it.
    pub concretization: Concretization,
    /// Relative convergence tolerance handed to the shallow solver.
    pub tolerance: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Symbolic,
            alpha: AlphaPolicy::CrownHeuristic,
            mip_budget_ms: 500,
            concretization: Concretization::ShallowMip,
            tolerance: 1e-8,
        }
    }
}

impl EngineConfig {
    pub fn with_mode(mode: Mode) -> Self {
        EngineConfig {
            mode,
            ..EngineConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error("no bounds available for layer {layer}")]
    MissingBounds { layer: usize },
    #[error("layer index {layer} out of range")]
    BadLayer { layer: usize },
    #[error("objective arity {got} does not match output width {expected}")]
    ObjectiveArity { expected: usize, got: usize },
}

/// Concrete pre- and post-activation intervals for every layer.
///
/// Index 0 is the input layer (pre = post = the input box); index `i` holds
/// layer `i` of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBounds {
    pub pre_lower: Vec<Vec<f64>>,
    pub pre_upper: Vec<Vec<f64>>,
    pub post_lower: Vec<Vec<f64>>,
    pub post_upper: Vec<Vec<f64>>,
}

impl LayerBounds {
    fn from_input(dom: &BoxDomain) -> LayerBounds {
        LayerBounds {
            pre_lower: vec![dom.lower.clone()],
            pre_upper: vec![dom.upper.clone()],
            post_lower: vec![dom.lower.clone()],
            post_upper: vec![dom.upper.clone()],
        }
    }

    /// Number of layers covered so far, counting the input layer.
    pub fn layers(&self) -> usize {
        self.pre_lower.len()
    }

    pub fn pre_interval(&self, layer: usize, neuron: usize) -> (f64, f64) {
        (self.pre_lower[layer][neuron], self.pre_upper[layer][neuron])
    }

    /// Post-activation box of a layer (the input box for layer 0).
    pub fn post_box(&self, layer: usize) -> (&[f64], &[f64]) {
        (&self.post_lower[layer], &self.post_upper[layer])
    }

    fn push_layer(&mut self, activation: Activation, pre_lower: Vec<f64>, pre_upper: Vec<f64>) {
        let (post_lower, post_upper) = match activation {
            Activation::Relu => (
                pre_lower.iter().map(|v| v.max(0.0)).collect(),
                pre_upper.iter().map(|v| v.max(0.0)).collect(),
            ),
            Activation::Identity => (pre_lower.clone(), pre_upper.clone()),
        };
        self.pre_lower.push(pre_lower);
        self.pre_upper.push(pre_upper);
        self.post_lower.push(post_lower);
        self.post_upper.push(post_upper);
    }

    /// True when every value of `trace` lies within these bounds (used by
    /// soundness tests).
    pub fn contains_trace(&self, trace: &crate::network::ForwardTrace, slack: f64) -> bool {
        for (i, x) in trace.pre.iter().enumerate() {
            let layer = i + 1;
            for (j, v) in x.iter().enumerate() {
                if *v < self.pre_lower[layer][j] - slack || *v > self.pre_upper[layer][j] + slack {
                    return false;
                }
            }
        }
        true
    }
}

/// Aggregated MIP statistics for one engine run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    pub mip_solves: u64,
    pub bnb_nodes: u64,
    pub budget_exhausted: u64,
    /// Neurons (and objective sides) where at least one MIP ran out of budget
    /// and the symbolic candidate was kept instead.
    pub fallback_neurons: u64,
}

impl EngineStats {
    pub fn absorb(&mut self, other: EngineStats) {
        self.mip_solves += other.mip_solves;
        self.bnb_nodes += other.bnb_nodes;
        self.budget_exhausted += other.budget_exhausted;
        self.fallback_neurons += other.fallback_neurons;
    }
}

/// Interval arithmetic over the affine maps, clamping at zero across ReLUs.
pub fn interval_propagate(net: &Network, dom: &BoxDomain) -> Result<LayerBounds, EngineError> {
    dom.validate()?;
    if dom.len() != net.input_dim {
        return Err(NetworkError::Dimension {
            expected: net.input_dim,
            got: dom.len(),
        }
        .into());
    }
    let mut bounds = LayerBounds::from_input(dom);
    for (t, layer) in net.layers.iter().enumerate() {
        let (in_lo, in_hi) = {
            let (lo, hi) = bounds.post_box(t);
            (lo.to_vec(), hi.to_vec())
        };
        let mut pre_lower = Vec::with_capacity(layer.out_dim());
        let mut pre_upper = Vec::with_capacity(layer.out_dim());
        for (row, b) in layer.weights.iter().zip(&layer.bias) {
            let mut lo = *b;
            let mut hi = *b;
            for (k, w) in row.iter().enumerate() {
                if *w >= 0.0 {
                    lo += w * in_lo[k];
                    hi += w * in_hi[k];
                } else {
                    lo += w * in_hi[k];
                    hi += w * in_lo[k];
                }
            }
            pre_lower.push(lo);
            pre_upper.push(hi);
        }
        bounds.push_layer(layer.activation, pre_lower, pre_upper);
    }
    Ok(bounds)
}

/// Compute concrete bounds for every neuron, layer by layer, in the
/// configured mode. Within one layer the per-neuron back-substitutions are
/// independent and run in parallel.
pub fn compute_all_bounds(
    net: &Network,
    dom: &BoxDomain,
    cfg: &EngineConfig,
) -> Result<(LayerBounds, EngineStats), EngineError> {
    cfg.alpha.validate()?;
    if cfg.mode == Mode::Interval {
        return Ok((interval_propagate(net, dom)?, EngineStats::default()));
    }
    dom.validate()?;
    if dom.len() != net.input_dim {
        return Err(NetworkError::Dimension {
            expected: net.input_dim,
            got: dom.len(),
        }
        .into());
    }

    let mut bounds = LayerBounds::from_input(dom);
    let mut stats = EngineStats::default();
    for i in 1..=net.depth() {
        let width = net.layer_width(i);
        let results: Vec<Result<(f64, f64, EngineStats), EngineError>> = (0..width)
            .into_par_iter()
            .map(|j| {
                let mut local = EngineStats::default();
                let lo = bound_neuron(net, &bounds, i, j, Side::Lower, cfg, &mut local)?;
                let hi = bound_neuron(net, &bounds, i, j, Side::Upper, cfg, &mut local)?;
                // Equal bounds can cross by float noise; keep the order.
                Ok((lo.min(hi), hi.max(lo), local))
            })
            .collect();
        let mut pre_lower = Vec::with_capacity(width);
        let mut pre_upper = Vec::with_capacity(width);
        for r in results {
            let (lo, hi, local) = r?;
            pre_lower.push(lo);
            pre_upper.push(hi);
            stats.absorb(local);
        }
        bounds.push_layer(net.activation(i), pre_lower, pre_upper);
    }
    Ok((bounds, stats))
}

fn bound_neuron(
    net: &Network,
    bounds: &LayerBounds,
    layer: usize,
    neuron: usize,
    side: Side,
    cfg: &EngineConfig,
    stats: &mut EngineStats,
) -> Result<f64, EngineError> {
    let outcome = back_substitute_neuron(net, bounds, layer, neuron, side, cfg)?;
    stats.absorb(outcome.stats);
    Ok(outcome.bound)
}

/// Concrete side-bound for one neuron via the mode's back-substitution.
/// Bounds for all layers below `layer` must already be present.
pub fn back_substitute_neuron(
    net: &Network,
    bounds: &LayerBounds,
    layer: usize,
    neuron: usize,
    side: Side,
    cfg: &EngineConfig,
) -> Result<BackSubOutcome, EngineError> {
    if layer == 0 || layer > net.depth() {
        return Err(EngineError::BadLayer { layer });
    }
    if bounds.layers() < layer {
        return Err(EngineError::MissingBounds { layer: layer - 1 });
    }
    let row = &net.layers[layer - 1];
    let form =
        SymbolicLinearForm::over_post(layer - 1, row.weights[neuron].clone(), row.bias[neuron]);
    let budget = NeuronBudget::start(cfg.mip_budget_ms);
    back_substitute(net, bounds, form, side, cfg, &budget)
}

/// A linear functional over the network outputs: `coeffs . y^k + constant`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearObjective {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl LinearObjective {
    /// The objective selecting a single output neuron.
    pub fn output(net: &Network, index: usize) -> LinearObjective {
        let mut coeffs = vec![0.0; net.output_dim()];
        coeffs[index] = 1.0;
        LinearObjective {
            coeffs,
            constant: 0.0,
        }
    }

    /// logit difference `true_label - other`.
    pub fn margin(net: &Network, true_label: usize, other: usize) -> LinearObjective {
        let mut coeffs = vec![0.0; net.output_dim()];
        coeffs[true_label] = 1.0;
        coeffs[other] = -1.0;
        LinearObjective {
            coeffs,
            constant: 0.0,
        }
    }

    pub fn evaluate(&self, outputs: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(outputs)
            .map(|(c, y)| c * y)
            .sum::<f64>()
            + self.constant
    }
}

/// Side-bound for an output functional, using already-computed layer bounds.
pub fn bound_objective(
    net: &Network,
    bounds: &LayerBounds,
    objective: &LinearObjective,
    side: Side,
    cfg: &EngineConfig,
) -> Result<BackSubOutcome, EngineError> {
    if objective.coeffs.len() != net.output_dim() {
        return Err(EngineError::ObjectiveArity {
            expected: net.output_dim(),
            got: objective.coeffs.len(),
        });
    }
    if bounds.layers() < net.depth() + 1 {
        return Err(EngineError::MissingBounds { layer: net.depth() });
    }
    if cfg.mode == Mode::Interval {
        let (lo, hi) = bounds.post_box(net.depth());
        let form = SymbolicLinearForm::over_post(
            net.depth(),
            objective.coeffs.clone(),
            objective.constant,
        );
        let bound = concretize_box(&form, lo, hi, side);
        return Ok(BackSubOutcome {
            bound,
            stats: EngineStats::default(),
            trace: Vec::new(),
            error_terms: Vec::new(),
        });
    }
    let form =
        SymbolicLinearForm::over_post(net.depth(), objective.coeffs.clone(), objective.constant);
    let budget = NeuronBudget::start(cfg.mip_budget_ms);
    back_substitute(net, bounds, form, side, cfg, &budget)
}

/// Full analysis of one query: all layer bounds plus the objective range.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub bounds: LayerBounds,
    pub objective_lower: f64,
    pub objective_upper: f64,
    pub stats: EngineStats,
}

pub fn analyze(
    net: &Network,
    dom: &BoxDomain,
    objective: &LinearObjective,
    cfg: &EngineConfig,
) -> Result<Analysis, EngineError> {
    let (bounds, mut stats) = compute_all_bounds(net, dom, cfg)?;
    let lower = bound_objective(net, &bounds, objective, Side::Lower, cfg)?;
    let upper = bound_objective(net, &bounds, objective, Side::Upper, cfg)?;
    stats.absorb(lower.stats);
    stats.absorb(upper.stats);
    Ok(Analysis {
        bounds,
        objective_lower: lower.bound,
        objective_upper: upper.bound,
        stats,
    })
}
