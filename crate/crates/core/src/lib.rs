//! Bound tightening and robustness certification for fully-connected ReLU
//! networks.
//!
//! The engine propagates concrete per-neuron bounds through a network in four
//! modes of increasing tightness:
//!
//! - **interval**: plain interval arithmetic;
//! - **symbolic**: back-substitution with the ReLU triangle relaxation,
//!   concretizing over every intermediate layer's box;
//! - **minimip**: symbolic, plus one exact solve of the final query expressed
//!   as ReLUs of input neurons;
//! - **deepmip**: symbolic back-substitution that also minimizes the
//!   relaxation error of every layer it crosses and subtracts the certified
//!   minima from all later candidates, with one-ReLU-deep exact solves at
//!   each depth.
//!
//! The exact solves target *shallow ReLU problems* (a linear term plus
//! weighted ReLUs of affine forms over a box) and run on a built-in
//! branch-and-bound optimizer over activation phases, bounded by an internal
//! bounded-variable simplex. An enumeration oracle provides independent
//! ground truth for tests.
//!
//! Bounds are computed in plain f64 without outward rounding, so they are
//! valid up to floating-point error; the test tolerances account for this.

// Index-based loops are clearer than iterator chains for the tableau and
// matrix-vector arithmetic in this crate.
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod errormin;
pub mod mip;
pub mod network;
pub mod oracle;
pub mod rng;
pub mod testutil;

pub use bounds::{
    analyze, back_substitute_neuron, bound_objective, compute_all_bounds, interval_propagate,
    AlphaPolicy, Analysis, Concretization, EngineConfig, EngineError, EngineStats, LayerBounds,
    LinearObjective, Mode, Side,
};
pub use errormin::{
    assemble_error_term, back_substitute, concretize_partial_mip, direct_first_layer_bound,
    minimize_error, BackSubOutcome, ErrorTerm, NeuronBudget,
};
pub use mip::{
    export_lp_text, parse_lp_text, solve_lp, solve_shallow, OptResult, OptStatus, ReluTerm, Sense,
    ShallowReluProblem,
};
pub use network::{load_network, save_network, BoxDomain, Network, NetworkError};
