//! Built-in toy classifiers with exact analytic structure.
//!
//! `LinearModel` and `RadialModel` exist so attack and estimator behavior can
//! be checked against closed-form geometry; `MlpModel` is the small trainable
//! network used by the pinned desk-scale task. All models are immutable after
//! construction and safe to share across concurrent attack runs.

pub mod io;
pub mod train;

use thiserror::Error;

use crate::loss::{argmax_label, LossForm};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("input dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gradient is undefined at this point")]
    NonDifferentiable,
    #[error("invalid model structure: {0}")]
    InvalidStructure(String),
}

/// A classifier answering probability and gradient queries.
pub trait Model: Send + Sync {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;

    /// Class-probability vector; entries are in [0,1] and sum to one.
    fn forward_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// Exact gradient of the adversary's margin loss at `x`.
    fn analytic_gradient(&self, x: &[f64], form: &LossForm) -> Result<Vec<f64>, ModelError>;
}

/// Top-1 class index; ties break toward the smallest index.
pub fn predict_label(model: &dyn Model, x: &[f64]) -> Result<usize, ModelError> {
    Ok(argmax_label(&model.forward_probs(x)?))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_dim(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// For the margin loss the gradient through the softmax reduces to the
/// difference of two class-probability gradients: the attacked class and the
/// current runner-up. Returns (c_plus, c_minus) so that
/// `grad = grad p[c_plus] - grad p[c_minus]`.
fn margin_classes(probs: &[f64], form: &LossForm) -> (usize, usize) {
    match *form {
        LossForm::Untargeted { original } => {
            let rival = runner_up(probs, original);
            (original, rival)
        }
        LossForm::Targeted { target } => {
            let rival = runner_up(probs, target);
            (rival, target)
        }
    }
}

fn runner_up(probs: &[f64], skip: usize) -> usize {
    let mut best = usize::MAX;
    for (i, &p) in probs.iter().enumerate() {
        if i == skip {
            continue;
        }
        if best == usize::MAX || p > probs[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Linear softmax classifier
// ---------------------------------------------------------------------------

/// Affine logits followed by softmax: `probs = softmax(W x + b)`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    weights: Vec<Vec<f64>>, // one row per class
    bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() || weights.len() != bias.len() {
            return Err(ModelError::InvalidStructure(
                "weight rows must match bias length".into(),
            ));
        }
        let d = weights[0].len();
        if d == 0 || weights.iter().any(|row| row.len() != d) {
            return Err(ModelError::InvalidStructure(
                "weight rows must share a nonzero length".into(),
            ));
        }
        Ok(LinearModel { weights, bias })
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| crate::tensor::dot(row, x) + b)
            .collect())
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Signed distance from `x` to the two-class decision boundary
    /// `(w_i - w_j)^T x + (b_i - b_j) = 0`.
    pub fn boundary_distance(&self, x: &[f64], class_i: usize, class_j: usize) -> f64 {
        let diff: Vec<f64> = self.weights[class_i]
            .iter()
            .zip(&self.weights[class_j])
            .map(|(a, b)| a - b)
            .collect();
        let margin = crate::tensor::dot(&diff, x) + self.bias[class_i] - self.bias[class_j];
        margin.abs() / crate::tensor::l2_norm(&diff)
    }

    /// Unit normal of the two-class boundary, oriented from class_i toward class_j.
    pub fn boundary_normal(&self, class_i: usize, class_j: usize) -> Vec<f64> {
        let diff: Vec<f64> = self.weights[class_j]
            .iter()
            .zip(&self.weights[class_i])
            .map(|(a, b)| a - b)
            .collect();
        crate::tensor::normalized(&diff).expect("identical class weights")
    }
}

impl Model for LinearModel {
    fn input_dim(&self) -> usize {
        self.weights[0].len()
    }

    fn num_classes(&self) -> usize {
        self.weights.len()
    }

    fn forward_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.logits(x)?))
    }

    fn analytic_gradient(&self, x: &[f64], form: &LossForm) -> Result<Vec<f64>, ModelError> {
        let probs = self.forward_probs(x)?;
        let (cp, cm) = margin_classes(&probs, form);
        // grad p_c = p_c (w_c - sum_j p_j w_j)
        let d = self.input_dim();
        let mut weighted = vec![0.0; d];
        for (row, &p) in self.weights.iter().zip(&probs) {
            for (w, &r) in weighted.iter_mut().zip(row) {
                *w += p * r;
            }
        }
        let mut grad = vec![0.0; d];
        for k in 0..d {
            let gp = probs[cp] * (self.weights[cp][k] - weighted[k]);
            let gm = probs[cm] * (self.weights[cm][k] - weighted[k]);
            grad[k] = gp - gm;
        }
        Ok(grad)
    }
}

// ---------------------------------------------------------------------------
// Radial two-class classifier
// ---------------------------------------------------------------------------

/// Spherical decision boundary: class 0 inside, class 1 outside.
///
/// The class-0 score is `sigmoid(radius - ||x - center||)`, so the boundary
/// is exactly the sphere of the given radius.
#[derive(Debug, Clone)]
pub struct RadialModel {
    center: Vec<f64>,
    radius: f64,
}

impl RadialModel {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, ModelError> {
        if radius <= 0.0 {
            return Err(ModelError::InvalidStructure("radius must be positive".into()));
        }
        if center.is_empty() {
            return Err(ModelError::InvalidStructure("center must be nonempty".into()));
        }
        Ok(RadialModel { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn distance(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        crate::tensor::l2_norm(&diff)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Model for RadialModel {
    fn input_dim(&self) -> usize {
        self.center.len()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn forward_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.input_dim(), x.len())?;
        let inside = sigmoid(self.radius - self.distance(x));
        Ok(vec![inside, 1.0 - inside])
    }

    fn analytic_gradient(&self, x: &[f64], form: &LossForm) -> Result<Vec<f64>, ModelError> {
        check_dim(self.input_dim(), x.len())?;
        let dist = self.distance(x);
        if dist < 1e-12 {
            return Err(ModelError::NonDifferentiable);
        }
        let s = sigmoid(self.radius - dist);
        // d p0 / dx = -s(1-s) * (x - center)/dist
        let scale = -s * (1.0 - s) / dist;
        let grad_p0: Vec<f64> = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| scale * (a - b))
            .collect();
        let probs = vec![s, 1.0 - s];
        let (cp, cm) = margin_classes(&probs, form);
        // p1 = 1 - p0, so grad p1 = -grad p0
        let sign = |c: usize| if c == 0 { 1.0 } else { -1.0 };
        Ok(grad_p0
            .iter()
            .map(|g| g * (sign(cp) - sign(cm)))
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Multilayer perceptron
// ---------------------------------------------------------------------------

/// One affine layer: `out = W x + b`, with `W` stored as rows.
#[derive(Debug, Clone)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn out_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].len()
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| crate::tensor::dot(row, x) + b)
            .collect()
    }
}

/// ReLU-activated MLP with a softmax output layer.
#[derive(Debug, Clone)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::InvalidStructure("no layers".into()));
        }
        for layer in &layers {
            if layer.weights.is_empty() || layer.weights.len() != layer.bias.len() {
                return Err(ModelError::InvalidStructure(
                    "layer rows must match bias length".into(),
                ));
            }
            let d = layer.weights[0].len();
            if d == 0 || layer.weights.iter().any(|r| r.len() != d) {
                return Err(ModelError::InvalidStructure(
                    "ragged weight matrix".into(),
                ));
            }
        }
        for pair in layers.windows(2) {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(ModelError::InvalidStructure(format!(
                    "layer input {} does not match previous output {}",
                    pair[1].in_dim(),
                    pair[0].out_dim()
                )));
            }
        }
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Forward pass keeping every post-activation, for backpropagation.
    fn forward_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut activations: Vec<Vec<f64>> = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(activations.last().unwrap());
            if i < last {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            activations.push(z);
        }
        let logits = activations.pop().unwrap();
        (activations, logits)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.forward_trace(x).1)
    }
}

impl Model for MlpModel {
    fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    fn num_classes(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    fn forward_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.logits(x)?))
    }

    fn analytic_gradient(&self, x: &[f64], form: &LossForm) -> Result<Vec<f64>, ModelError> {
        check_dim(self.input_dim(), x.len())?;
        let (activations, logits) = self.forward_trace(x);
        let probs = softmax(&logits);
        let (cp, cm) = margin_classes(&probs, form);
        // d(p_cp - p_cm)/d logit_k through the softmax Jacobian
        let n = probs.len();
        let mut grad: Vec<f64> = (0..n)
            .map(|k| {
                let dp = probs[cp] * (if k == cp { 1.0 } else { 0.0 } - probs[k]);
                let dm = probs[cm] * (if k == cm { 1.0 } else { 0.0 } - probs[k]);
                dp - dm
            })
            .collect();
        // backpropagate through the affine/ReLU stack
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i < self.layers.len() - 1 {
                // gate by the stored post-activation of this layer
                let post = &activations[i + 1];
                for (g, &a) in grad.iter_mut().zip(post) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let mut prev = vec![0.0; layer.in_dim()];
            for (row, &g) in layer.weights.iter().zip(&grad) {
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += g * w;
                }
            }
            grad = prev;
        }
        Ok(grad)
    }
}
