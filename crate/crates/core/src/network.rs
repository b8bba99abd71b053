//! Network representation, file loading/validation and exact forward evaluation.
//!
//! A network is an ordered list of affine layers. Every hidden layer is
//! followed by a ReLU; the output layer is purely affine. Weights are stored
//! row-major: `weights[r][c]` is the coefficient of input neuron `c` for
//! output neuron `r`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// max(0, x), used on every hidden layer.
    #[serde(rename = "relu")]
    Relu,
    /// Identity, used on the output layer.
    #[serde(rename = "none")]
    Identity,
}

/// One affine layer: `x -> W x + b`, optionally followed by a ReLU.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineLayer {
    /// Row-major weight matrix; rows = output neurons, columns = input neurons.
    pub weights: Vec<Vec<f64>>,
    /// Bias vector, one entry per output neuron.
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl AffineLayer {
    /// Number of output neurons.
    pub fn out_dim(&self) -> usize {
        self.weights.len()
    }

    /// Number of input neurons (0 for an empty weight matrix).
    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Apply the affine map to `input` (no activation).
    pub fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// A fully-connected feed-forward ReLU network.
///
/// Immutable after load; safe to share across worker threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub layers: Vec<AffineLayer>,
}

/// Errors produced while loading or evaluating a network.
#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error at layer {layer}: {message}")]
    Shape { layer: usize, message: String },
    #[error("value error at layer {layer}: {message}")]
    Value { layer: usize, message: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

impl Network {
    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Width of layer `i`, where layer 0 is the input layer.
    pub fn layer_width(&self, i: usize) -> usize {
        if i == 0 {
            self.input_dim
        } else {
            self.layers[i - 1].out_dim()
        }
    }

    /// Output dimension.
    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_dim, AffineLayer::out_dim)
    }

    /// Activation of layer `i` (1-based, matching `layer_width`).
    pub fn activation(&self, i: usize) -> Activation {
        self.layers[i - 1].activation
    }

    /// Check all structural invariants, reporting the offending layer (1-based).
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.input_dim == 0 {
            return Err(NetworkError::Parse("input_dim must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(NetworkError::Parse("network has no layers".into()));
        }
        let mut prev_width = self.input_dim;
        let last = self.layers.len();
        for (t, layer) in self.layers.iter().enumerate() {
            let idx = t + 1;
            if layer.out_dim() == 0 {
                return Err(NetworkError::Shape {
                    layer: idx,
                    message: "layer has no neurons".into(),
                });
            }
            for row in &layer.weights {
                if row.len() != prev_width {
                    return Err(NetworkError::Shape {
                        layer: idx,
                        message: format!(
                            "weight columns {} != previous width {}",
                            row.len(),
                            prev_width
                        ),
                    });
                }
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(NetworkError::Shape {
                    layer: idx,
                    message: format!(
                        "bias length {} != rows {}",
                        layer.bias.len(),
                        layer.out_dim()
                    ),
                });
            }
            let finite = layer
                .weights
                .iter()
                .flatten()
                .chain(&layer.bias)
                .all(|v| v.is_finite());
            if !finite {
                return Err(NetworkError::Value {
                    layer: idx,
                    message: "non-finite weight or bias".into(),
                });
            }
            let expected = if idx == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            if layer.activation != expected {
                return Err(NetworkError::Shape {
                    layer: idx,
                    message: format!(
                        "activation must be {} here",
                        if expected == Activation::Relu {
                            "relu"
                        } else {
                            "none"
                        }
                    ),
                });
            }
            prev_width = layer.out_dim();
        }
        Ok(())
    }

    /// Exact forward evaluation at a single point.
    pub fn forward(&self, point: &[f64]) -> Result<Vec<f64>, NetworkError> {
        Ok(self.forward_trace(point)?.output().to_vec())
    }

    /// Forward evaluation that keeps every pre- and post-activation vector.
    pub fn forward_trace(&self, point: &[f64]) -> Result<ForwardTrace, NetworkError> {
        if point.len() != self.input_dim {
            return Err(NetworkError::Dimension {
                expected: self.input_dim,
                got: point.len(),
            });
        }
        let mut pre = Vec::with_capacity(self.depth());
        let mut post = Vec::with_capacity(self.depth());
        let mut current = point.to_vec();
        for layer in &self.layers {
            let x = layer.affine(&current);
            let y: Vec<f64> = match layer.activation {
                Activation::Relu => x.iter().map(|v| v.max(0.0)).collect(),
                Activation::Identity => x.clone(),
            };
            pre.push(x);
            current = y.clone();
            post.push(y);
        }
        Ok(ForwardTrace {
            input: point.to_vec(),
            pre,
            post,
        })
    }
}

/// Intermediate values of one forward pass, indexed like the bound tables:
/// `pre[i - 1]` / `post[i - 1]` hold layer `i` (layer 0 is the input).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().unwrap_or(&self.input)
    }

    /// Post-activation values of layer `i` (0 = input).
    pub fn post_layer(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.input
        } else {
            &self.post[i - 1]
        }
    }
}

/// An axis-aligned box of allowed inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, NetworkError> {
        let dom = BoxDomain { lower, upper };
        dom.validate()?;
        Ok(dom)
    }

    /// The box `[center - eps, center + eps]`, clamped to `range` when given.
    pub fn ball(center: &[f64], eps: f64, range: Option<&BoxDomain>) -> Result<Self, NetworkError> {
        if eps < 0.0 || !eps.is_finite() {
            return Err(NetworkError::Parse(format!(
                "epsilon must be finite and >= 0, got {eps}"
            )));
        }
        let mut lower: Vec<f64> = center.iter().map(|c| c - eps).collect();
        let mut upper: Vec<f64> = center.iter().map(|c| c + eps).collect();
        if let Some(r) = range {
            if r.len() != center.len() {
                return Err(NetworkError::Dimension {
                    expected: center.len(),
                    got: r.len(),
                });
            }
            for j in 0..center.len() {
                lower[j] = lower[j].max(r.lower[j]);
                upper[j] = upper[j].min(r.upper[j]);
            }
        }
        BoxDomain::new(lower, upper)
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.lower.len() != self.upper.len() {
            return Err(NetworkError::Dimension {
                expected: self.lower.len(),
                got: self.upper.len(),
            });
        }
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(NetworkError::Parse(format!(
                    "non-finite bound at coordinate {j}"
                )));
            }
            if l > u {
                return Err(NetworkError::Parse(format!(
                    "lower {l} > upper {u} at coordinate {j}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.len()
            && point
                .iter()
                .enumerate()
                .all(|(j, x)| *x >= self.lower[j] - 1e-12 && *x <= self.upper[j] + 1e-12)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }
}

/// Parse and validate a network from its JSON text form.
pub fn load_network(text: &str) -> Result<Network, NetworkError> {
    let net: Network =
        serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
    net.validate()?;
    Ok(net)
}

/// Serialize a network back to the same JSON form accepted by [`load_network`].
pub fn save_network(net: &Network) -> String {
    serde_json::to_string_pretty(net).expect("network serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::fc_3331;

    #[test]
    fn fixture_net_loads_and_validates() {
        let net = fc_3331();
        assert_eq!(net.input_dim, 3);
        assert_eq!(net.depth(), 3);
        assert_eq!(net.layer_width(1), 3);
        assert_eq!(net.layer_width(3), 1);
        net.validate().unwrap();
    }

    #[test]
    fn forward_matches_hand_evaluation() {
        let net = fc_3331();
        let trace = net.forward_trace(&[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(trace.pre[0], vec![0.0, 2.0, 1.0]);
        assert_eq!(trace.post[0], vec![0.0, 2.0, 1.0]);
        assert_eq!(trace.pre[1], vec![2.0, 3.0, 1.0]);
        assert_eq!(trace.post[1], vec![2.0, 3.0, 1.0]);
        assert_eq!(trace.output(), &[6.0]);
    }

    #[test]
    fn forward_zero_point_gives_zero_output() {
        let net = fc_3331();
        assert_eq!(net.forward(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_single_layer_net() {
        let text = r#"{"input_dim": 1, "layers": [{"weights": [[1.0]], "bias": [0.0], "activation": "none"}]}"#;
        let net = load_network(text).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn shape_error_names_offending_layer() {
        // Second layer expects width 3 but declares 4 columns.
        let text = r#"{
            "input_dim": 3,
            "layers": [
                {"weights": [[1,1,0],[1,-1,0],[0,0,1]], "bias": [0,0,0], "activation": "relu"},
                {"weights": [[1,1,0,9],[-1,1,1,9],[-1,1,-1,9]], "bias": [0,0,0], "activation": "relu"},
                {"weights": [[1,1,1]], "bias": [0], "activation": "none"}
            ]
        }"#;
        let err = load_network(text).unwrap_err();
        match err {
            NetworkError::Shape { layer, .. } => assert_eq!(layer, 2),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_weight_rejected() {
        let mut net = fc_3331();
        net.layers[1].weights[0][0] = f64::NAN;
        assert!(matches!(
            net.validate(),
            Err(NetworkError::Value { layer: 2, .. })
        ));
    }

    #[test]
    fn hidden_layer_must_be_relu() {
        let mut net = fc_3331();
        net.layers[0].activation = Activation::Identity;
        assert!(matches!(
            net.validate(),
            Err(NetworkError::Shape { layer: 1, .. })
        ));
    }

    #[test]
    fn load_save_load_is_idempotent() {
        let net = fc_3331();
        let text = save_network(&net);
        let reloaded = load_network(&text).unwrap();
        let text2 = save_network(&reloaded);
        assert_eq!(text, text2);
        assert_eq!(
            net.forward(&[0.3, -0.7, 0.2]).unwrap(),
            reloaded.forward(&[0.3, -0.7, 0.2]).unwrap()
        );
    }

    #[test]
    fn dimension_mismatch_on_forward() {
        let net = fc_3331();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(NetworkError::Dimension {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn ball_clamps_to_valid_range() {
        let range = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let dom = BoxDomain::ball(&[0.9, 0.1], 0.3, Some(&range)).unwrap();
        for (got, want) in dom.lower.iter().chain(&dom.upper).zip([0.6, 0.0, 1.0, 0.4]) {
            assert!((got - want).abs() < 1e-12, "got {got} want {want}");
        }
    }
}
