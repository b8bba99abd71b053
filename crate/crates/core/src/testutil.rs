//! Shared fixtures for unit tests, integration tests and benches.

use crate::mip::{ReluTerm, Sense, ShallowReluProblem};
use crate::network::{Activation, AffineLayer, BoxDomain, Network};
use crate::rng::SplitMix64;

/// The 3-3-3-1 running-example network used throughout the test suite.
///
/// Layer 1: x1 = (x0_0 + x0_1, x0_0 - x0_1, x0_2), ReLU.
/// Layer 2: x2 = (y1_0 + y1_1, -y1_0 + y1_1 + y1_2, -y1_0 + y1_1 - y1_2), ReLU.
/// Layer 3: x3 = y2_0 + y2_1 + y2_2, affine output.
///
/// Over the unit box the exact output range is [0, 6].
pub fn fc_3331() -> Network {
    Network {
        input_dim: 3,
        layers: vec![
            AffineLayer {
                weights: vec![
                    vec![1.0, 1.0, 0.0],
                    vec![1.0, -1.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                ],
                bias: vec![0.0, 0.0, 0.0],
                activation: Activation::Relu,
            },
            AffineLayer {
                weights: vec![
                    vec![1.0, 1.0, 0.0],
                    vec![-1.0, 1.0, 1.0],
                    vec![-1.0, 1.0, -1.0],
                ],
                bias: vec![0.0, 0.0, 0.0],
                activation: Activation::Relu,
            },
            AffineLayer {
                weights: vec![vec![1.0, 1.0, 1.0]],
                bias: vec![0.0],
                activation: Activation::Identity,
            },
        ],
    }
}

/// The unit input box for [`fc_3331`].
pub fn unit_box(dim: usize) -> BoxDomain {
    BoxDomain::new(vec![-1.0; dim], vec![1.0; dim]).expect("valid box")
}

/// A random fully-connected ReLU network with the given layer widths.
pub fn random_network(rng: &mut SplitMix64, widths: &[usize], weight_range: f64) -> Network {
    assert!(widths.len() >= 2);
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for t in 0..widths.len() - 1 {
        let (rows, cols) = (widths[t + 1], widths[t]);
        let weights = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| rng.uniform(-weight_range, weight_range))
                    .collect()
            })
            .collect();
        let bias = (0..rows)
            .map(|_| rng.uniform(-weight_range, weight_range))
            .collect();
        let activation = if t + 2 == widths.len() {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(AffineLayer {
            weights,
            bias,
            activation,
        });
    }
    Network {
        input_dim: widths[0],
        layers,
    }
}

/// A random box with side lengths up to `max_radius` around a random center.
pub fn random_box(rng: &mut SplitMix64, dim: usize, max_radius: f64) -> BoxDomain {
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for _ in 0..dim {
        let c = rng.uniform(-1.0, 1.0);
        let r = rng.uniform(0.05, max_radius);
        lower.push(c - r);
        upper.push(c + r);
    }
    BoxDomain::new(lower, upper).expect("valid box")
}

/// min over [-1,1]^2 of v0 + 2 - relu(v0+v1) - relu(v0-v1).
///
/// Both ReLU relaxations touch their function individually, yet the summed
/// bound stays detached: the minimum is 1, attained along the v0 = -1 edge.
pub fn detached_sum_problem() -> ShallowReluProblem {
    ShallowReluProblem::new(
        vec![-1.0, -1.0],
        vec![1.0, 1.0],
        vec![1.0, 0.0],
        2.0,
        vec![
            ReluTerm {
                weight: -1.0,
                coeffs: vec![1.0, 1.0],
                constant: 0.0,
            },
            ReluTerm {
                weight: -1.0,
                coeffs: vec![1.0, -1.0],
                constant: 0.0,
            },
        ],
        Sense::Minimize,
    )
    .expect("well-formed problem")
}

/// The layer-2 relaxation-error problem of [`fc_3331`]'s output neuron:
/// min over the box `[0,2] x [0,2] x [0,1]` of
/// `2 v1 + v2/5 + 12/5 - relu(v0+v1) - relu(-v0+v1+v2) - relu(-v0+v1-v2)`.
///
/// The minimum is 2/5.
pub fn layer2_error_problem() -> ShallowReluProblem {
    ShallowReluProblem::new(
        vec![0.0, 0.0, 0.0],
        vec![2.0, 2.0, 1.0],
        vec![0.0, 2.0, 0.2],
        2.4,
        vec![
            ReluTerm {
                weight: -1.0,
                coeffs: vec![1.0, 1.0, 0.0],
                constant: 0.0,
            },
            ReluTerm {
                weight: -1.0,
                coeffs: vec![-1.0, 1.0, 1.0],
                constant: 0.0,
            },
            ReluTerm {
                weight: -1.0,
                coeffs: vec![-1.0, 1.0, -1.0],
                constant: 0.0,
            },
        ],
        Sense::Minimize,
    )
    .expect("well-formed problem")
}

/// A random shallow ReLU problem for solver/oracle agreement tests.
pub fn random_shallow_problem(
    rng: &mut SplitMix64,
    max_vars: usize,
    max_terms: usize,
) -> ShallowReluProblem {
    let n = 1 + rng.below(max_vars);
    let m = rng.below(max_terms + 1);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.uniform(-3.0, 3.0);
        let b = rng.uniform(-3.0, 3.0);
        lower.push(a.min(b));
        upper.push(a.max(b));
    }
    let linear = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
    let constant = rng.uniform(-2.0, 2.0);
    let terms = (0..m)
        .map(|_| ReluTerm {
            weight: rng.uniform(-2.0, 2.0),
            coeffs: (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect(),
            constant: rng.uniform(-2.0, 2.0),
        })
        .collect();
    let sense = if rng.below(2) == 0 {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    ShallowReluProblem::new(lower, upper, linear, constant, terms, sense)
        .expect("well-formed problem")
}
