//! The adversary's objective over class-probability vectors.

use serde::{Deserialize, Serialize};

/// Untargeted attacks drive the original class below the runner-up; targeted
/// attacks drive a chosen class above everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossForm {
    Untargeted { original: usize },
    Targeted { target: usize },
}

impl LossForm {
    pub fn untargeted(original: usize) -> Self {
        LossForm::Untargeted { original }
    }
}

/// Margin loss over a probability vector.
///
/// Untargeted: `probs[c0] - max_{c != c0} probs[c]`, negative exactly when the
/// point is misclassified. Targeted: `max_{c != t} probs[c] - probs[t]`,
/// negative exactly when the point is classified as the target.
pub fn adversary_loss(probs: &[f64], form: &LossForm) -> f64 {
    match *form {
        LossForm::Untargeted { original } => probs[original] - max_excluding(probs, original),
        LossForm::Targeted { target } => max_excluding(probs, target) - probs[target],
    }
}

fn max_excluding(probs: &[f64], skip: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &p)| p)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Index of the maximal probability; ties break toward the smallest index.
pub fn argmax_label(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
