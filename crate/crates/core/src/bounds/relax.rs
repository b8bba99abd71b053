//! ReLU triangle relaxation: per-neuron slopes, intercepts and alpha choice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which side of the neuron's value a bound tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    /// The tighter of two candidate bounds on this side.
    pub fn tighter(self, a: f64, b: f64) -> f64 {
        match self {
            Side::Upper => a.min(b),
            Side::Lower => a.max(b),
        }
    }

    pub fn loosest(self) -> f64 {
        match self {
            Side::Upper => f64::INFINITY,
            Side::Lower => f64::NEG_INFINITY,
        }
    }
}

/// Heuristic for the lower triangle edge `alpha * x` of unstable ReLUs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AlphaPolicy {
    /// Area-minimizing edge: 1 when u > -l, else 0.
    CrownHeuristic,
    FixedZero,
    FixedOne,
    /// Per-neuron values, keyed by layer index; each vector holds one alpha
    /// per neuron of that layer.
    Explicit(BTreeMap<usize, Vec<f64>>),
}

#[derive(Debug, Error)]
pub enum AlphaError {
    #[error("explicit alpha missing for layer {layer} neuron {neuron}")]
    Missing { layer: usize, neuron: usize },
    #[error("alpha {value} out of [0, 1] for layer {layer} neuron {neuron}")]
    OutOfRange {
        layer: usize,
        neuron: usize,
        value: f64,
    },
}

impl AlphaPolicy {
    /// Explicit policy with alpha = 0 everywhere it could be consulted.
    pub fn explicit_zero(widths: &[usize]) -> AlphaPolicy {
        let map = widths
            .iter()
            .enumerate()
            .map(|(t, w)| (t + 1, vec![0.0; *w]))
            .collect();
        AlphaPolicy::Explicit(map)
    }

    pub fn validate(&self) -> Result<(), AlphaError> {
        if let AlphaPolicy::Explicit(map) = self {
            for (layer, alphas) in map {
                for (neuron, a) in alphas.iter().enumerate() {
                    if !(0.0..=1.0).contains(a) {
                        return Err(AlphaError::OutOfRange {
                            layer: *layer,
                            neuron,
                            value: *a,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Alpha for an unstable neuron (l < 0 < u). Only unstable neurons consult
/// the policy.
pub fn choose_alpha(
    l: f64,
    u: f64,
    policy: &AlphaPolicy,
    layer: usize,
    neuron: usize,
) -> Result<f64, AlphaError> {
    debug_assert!(l < 0.0 && u > 0.0);
    match policy {
        AlphaPolicy::CrownHeuristic => Ok(if u > -l { 1.0 } else { 0.0 }),
        AlphaPolicy::FixedZero => Ok(0.0),
        AlphaPolicy::FixedOne => Ok(1.0),
        AlphaPolicy::Explicit(map) => {
            let a = map
                .get(&layer)
                .and_then(|v| v.get(neuron))
                .copied()
                .ok_or(AlphaError::Missing { layer, neuron })?;
            if !(0.0..=1.0).contains(&a) {
                return Err(AlphaError::OutOfRange {
                    layer,
                    neuron,
                    value: a,
                });
            }
            Ok(a)
        }
    }
}

/// The linear edge `slope * x + intercept` replacing one ReLU during
/// back-substitution.
///
/// Stable neurons get the exact edge (1/0 for active, 0/0 for inactive).
/// Unstable neurons get the chord when the substitution needs the function's
/// upper envelope under the given coefficient sign, and the `alpha * x` edge
/// otherwise. The degenerate l = u case is treated as stable so the chord
/// denominator never vanishes; l = 0 or u = 0 also classify as stable.
pub fn relaxation_entry(l: f64, u: f64, alpha: f64, coeff_nonneg: bool, side: Side) -> (f64, f64) {
    debug_assert!(l <= u);
    if l >= 0.0 {
        (1.0, 0.0)
    } else if u <= 0.0 {
        (0.0, 0.0)
    } else {
        let chord = matches!(side, Side::Upper) == coeff_nonneg;
        if chord {
            (u / (u - l), -u * l / (u - l))
        } else {
            (alpha, 0.0)
        }
    }
}

/// Per-neuron relaxation applied to one activation layer during a single
/// back-substitution step.
#[derive(Debug, Clone)]
pub struct ReluRelaxation {
    pub slope: Vec<f64>,
    pub intercept: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chord_for_symmetric_unstable_neuron() {
        let (s, b) = relaxation_entry(-1.0, 1.0, 0.0, true, Side::Upper);
        assert_eq!((s, b), (0.5, 0.5));
    }

    #[test]
    fn stable_active_and_inactive() {
        assert_eq!(
            relaxation_entry(0.5, 2.0, 0.7, true, Side::Upper),
            (1.0, 0.0)
        );
        assert_eq!(
            relaxation_entry(0.5, 2.0, 0.7, false, Side::Lower),
            (1.0, 0.0)
        );
        assert_eq!(
            relaxation_entry(-2.0, -1.0, 0.7, true, Side::Upper),
            (0.0, 0.0)
        );
        assert_eq!(
            relaxation_entry(-2.0, -1.0, 0.3, false, Side::Lower),
            (0.0, 0.0)
        );
    }

    #[test]
    fn alpha_edge_for_lower_side_positive_coeff() {
        assert_eq!(
            relaxation_entry(-2.0, 2.0, 0.0, true, Side::Lower),
            (0.0, 0.0)
        );
        assert_eq!(
            relaxation_entry(-2.0, 2.0, 1.0, true, Side::Lower),
            (1.0, 0.0)
        );
    }

    #[test]
    fn chord_for_lower_side_negative_coeff() {
        let (s, b) = relaxation_entry(-2.0, 2.0, 0.0, false, Side::Lower);
        assert_eq!((s, b), (0.5, 1.0));
    }

    #[test]
    fn degenerate_interval_is_stable() {
        assert_eq!(
            relaxation_entry(0.0, 0.0, 0.5, true, Side::Upper),
            (1.0, 0.0)
        );
        assert_eq!(
            relaxation_entry(-3.0, -3.0, 0.5, true, Side::Upper),
            (0.0, 0.0)
        );
    }

    #[test]
    fn boundary_zero_counts_as_stable() {
        assert_eq!(
            relaxation_entry(0.0, 2.0, 0.5, false, Side::Upper),
            (1.0, 0.0)
        );
        assert_eq!(
            relaxation_entry(-2.0, 0.0, 0.5, true, Side::Upper),
            (0.0, 0.0)
        );
    }

    #[test]
    fn crown_heuristic_minimizes_lower_edge_area() {
        // Area between relu and alpha*x over [l, u], by direct integration:
        // integral = u^2/2 - alpha (u^2 - l^2)/2; compare alpha in {0, 1}.
        let area = |l: f64, u: f64, alpha: f64| {
            let n = 100_000;
            let mut acc = 0.0;
            for i in 0..n {
                let t = l + (u - l) * (i as f64 + 0.5) / n as f64;
                acc += t.max(0.0) - alpha * t;
            }
            acc * (u - l) / n as f64
        };
        for (l, u) in [(-1.0, 3.0), (-3.0, 1.0), (-0.5, 0.6), (-2.5, 2.0)] {
            let chosen = choose_alpha(l, u, &AlphaPolicy::CrownHeuristic, 1, 0).unwrap();
            let better = if area(l, u, 1.0) < area(l, u, 0.0) {
                1.0
            } else {
                0.0
            };
            assert_eq!(chosen, better, "l={l} u={u}");
        }
        assert_eq!(
            choose_alpha(-1.0, 3.0, &AlphaPolicy::CrownHeuristic, 1, 0).unwrap(),
            1.0
        );
        assert_eq!(
            choose_alpha(-3.0, 1.0, &AlphaPolicy::CrownHeuristic, 1, 0).unwrap(),
            0.0
        );
        // Ties break toward zero.
        assert_eq!(
            choose_alpha(-2.0, 2.0, &AlphaPolicy::CrownHeuristic, 1, 0).unwrap(),
            0.0
        );
    }

    #[test]
    fn explicit_policy_missing_neuron_errors() {
        let policy = AlphaPolicy::Explicit([(1usize, vec![0.5])].into_iter().collect());
        assert!(choose_alpha(-1.0, 1.0, &policy, 1, 0).is_ok());
        assert!(matches!(
            choose_alpha(-1.0, 1.0, &policy, 1, 1),
            Err(AlphaError::Missing {
                layer: 1,
                neuron: 1
            })
        ));
    }

    #[test]
    fn triangle_validity_and_touch_points() {
        let mut rng = crate::rng::SplitMix64::new(3);
        for _ in 0..2000 {
            let l = rng.uniform(-4.0, -0.01);
            let u = rng.uniform(0.01, 4.0);
            let alpha = rng.next_f64();
            let (us, ub) = relaxation_entry(l, u, alpha, true, Side::Upper);
            let (ls, lb) = relaxation_entry(l, u, alpha, true, Side::Lower);
            for _ in 0..30 {
                let t = rng.uniform(l, u);
                let relu = t.max(0.0);
                assert!(us * t + ub >= relu - 1e-9);
                assert!(ls * t + lb <= relu + 1e-9);
            }
            // The chord touches at both interval ends, the alpha edge at 0.
            assert!((us * l + ub).abs() < 1e-9);
            assert!((us * u + ub - u).abs() < 1e-9);
            assert!((ls * 0.0 + lb).abs() < 1e-12);
            if alpha == 1.0 {
                assert!((ls * u + lb - u).abs() < 1e-12);
            }
        }
    }
}
