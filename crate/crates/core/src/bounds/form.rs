//! Symbolic linear forms over one layer's variables, and the single-step
//! back-substitution that rewrites them over the previous layer.

use crate::network::{Activation, Network};

use super::relax::{choose_alpha, relaxation_entry, AlphaPolicy, ReluRelaxation, Side};
use super::{EngineError, LayerBounds};

/// Whether a form's coefficients apply to pre- or post-activation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    PreActivation,
    PostActivation,
}

/// `coeffs . vars + constant` over the variables of one layer.
#[derive(Debug, Clone)]
pub struct SymbolicLinearForm {
    pub layer_index: usize,
    pub var_kind: VarKind,
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl SymbolicLinearForm {
    pub fn over_post(layer_index: usize, coeffs: Vec<f64>, constant: f64) -> Self {
        SymbolicLinearForm {
            layer_index,
            var_kind: VarKind::PostActivation,
            coeffs,
            constant,
        }
    }

    pub fn evaluate(&self, vars: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(vars)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.constant
    }
}

/// Exact optimum of a linear form over a box: substitute each variable's
/// extreme according to its coefficient sign.
pub fn concretize_box(form: &SymbolicLinearForm, lower: &[f64], upper: &[f64], side: Side) -> f64 {
    debug_assert_eq!(form.coeffs.len(), lower.len());
    debug_assert_eq!(form.coeffs.len(), upper.len());
    let mut acc = form.constant;
    for (j, c) in form.coeffs.iter().enumerate() {
        let hi = matches!(side, Side::Upper) == (*c >= 0.0);
        acc += c * if hi { upper[j] } else { lower[j] };
    }
    acc
}

/// Replace each activation of layer `p` by its side-appropriate triangle edge
/// and push the form through the affine map `W^{p-1}, b^{p-1}`, yielding a
/// valid side-bound over the post-activations of layer `p - 1`.
///
/// Returns the new form together with the relaxation that was applied, which
/// the error-term machinery needs verbatim.
pub fn substitute_previous_layer(
    form: &SymbolicLinearForm,
    net: &Network,
    bounds: &LayerBounds,
    policy: &AlphaPolicy,
    side: Side,
) -> Result<(SymbolicLinearForm, ReluRelaxation), EngineError> {
    let p = form.layer_index;
    debug_assert_eq!(form.var_kind, VarKind::PostActivation);
    if p == 0 || p > net.depth() {
        return Err(EngineError::BadLayer { layer: p });
    }
    // Layer p's pre-activation bounds drive the relaxation.
    if bounds.pre_lower.len() <= p {
        return Err(EngineError::MissingBounds { layer: p });
    }
    let width = net.layer_width(p);
    debug_assert_eq!(form.coeffs.len(), width);

    let mut slope = Vec::with_capacity(width);
    let mut intercept = Vec::with_capacity(width);
    let mut alpha = Vec::with_capacity(width);
    match net.activation(p) {
        Activation::Identity => {
            slope.resize(width, 1.0);
            intercept.resize(width, 0.0);
            alpha.resize(width, 0.0);
        }
        Activation::Relu => {
            for j in 0..width {
                let (l, u) = bounds.pre_interval(p, j);
                let a = if l < 0.0 && u > 0.0 {
                    choose_alpha(l, u, policy, p, j)?
                } else {
                    0.0
                };
                let (s, b) = relaxation_entry(l, u, a, form.coeffs[j] >= 0.0, side);
                slope.push(s);
                intercept.push(b);
                alpha.push(a);
            }
        }
    }

    // Form over the pre-activations of layer p.
    let mut constant = form.constant;
    for j in 0..width {
        constant += form.coeffs[j] * intercept[j];
    }
    let scaled: Vec<f64> = (0..width).map(|j| form.coeffs[j] * slope[j]).collect();

    // Push through x^p = W^{p-1} y^{p-1} + b^{p-1}.
    let layer = &net.layers[p - 1];
    let prev_width = net.layer_width(p - 1);
    let mut coeffs = vec![0.0; prev_width];
    for (j, s) in scaled.iter().enumerate() {
        if *s != 0.0 {
            for (k, w) in layer.weights[j].iter().enumerate() {
                coeffs[k] += s * w;
            }
            constant += s * layer.bias[j];
        }
    }

    Ok((
        SymbolicLinearForm::over_post(p - 1, coeffs, constant),
        ReluRelaxation {
            slope,
            intercept,
            alpha,
        },
    ))
}
