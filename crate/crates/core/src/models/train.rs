//! Minibatch SGD trainer for the MLP.
//!
//! Training is fully determined by (dataset, architecture, parameters, seed):
//! He-style initialization and epoch shuffles both draw from a generator
//! seeded by the caller, so repeated runs produce bit-identical models.

use thiserror::Error;

use super::{softmax, Layer, MlpModel, Model};
use crate::dataset::SyntheticDataset;
use crate::rng::SeededRng;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset dimension {got} does not match architecture input {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} outside class range {classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Layer widths: input -> hidden... -> classes.
#[derive(Debug, Clone)]
pub struct MlpArchitecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl MlpArchitecture {
    /// The pinned desk-task network: 64 -> 32 -> 32 -> 4.
    pub fn desk_default() -> Self {
        MlpArchitecture {
            input: 64,
            hidden: vec![32, 32],
            classes: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SgdParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 32,
        }
    }
}

/// Trains an MLP with cross-entropy SGD. Deterministic given the seed.
pub fn train_mlp(
    dataset: &SyntheticDataset,
    arch: &MlpArchitecture,
    params: &SgdParams,
    seed: u64,
) -> Result<MlpModel, TrainError> {
    let samples = dataset.samples();
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let d = samples[0].0.dim();
    if d != arch.input {
        return Err(TrainError::DimensionMismatch {
            expected: arch.input,
            got: d,
        });
    }
    for (_, label) in samples {
        if *label >= arch.classes {
            return Err(TrainError::LabelOutOfRange {
                label: *label,
                classes: arch.classes,
            });
        }
    }

    let mut rng = SeededRng::new(seed);
    let mut layers = init_layers(arch, &mut rng);
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in 0..params.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch_size.max(1)) {
            epoch_loss += sgd_batch(&mut layers, samples, batch, params.learning_rate);
        }
        if !epoch_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
    }

    Ok(MlpModel::new(layers).expect("trainer builds consistent layers"))
}

/// Fraction of samples the model labels correctly.
pub fn accuracy(model: &dyn Model, dataset: &SyntheticDataset) -> f64 {
    let samples = dataset.samples();
    let hits = samples
        .iter()
        .filter(|(x, label)| {
            super::predict_label(model, x.data()).map(|l| l == *label) == Ok(true)
        })
        .count();
    hits as f64 / samples.len() as f64
}

fn init_layers(arch: &MlpArchitecture, rng: &mut SeededRng) -> Vec<Layer> {
    let mut dims = vec![arch.input];
    dims.extend(&arch.hidden);
    dims.push(arch.classes);
    dims.windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            Layer {
                weights: (0..fan_out)
                    .map(|_| (0..fan_in).map(|_| scale * rng.next_gaussian()).collect())
                    .collect(),
                bias: vec![0.0; fan_out],
            }
        })
        .collect()
}

/// One minibatch update; returns the summed cross-entropy loss.
fn sgd_batch(
    layers: &mut [Layer],
    samples: &[(crate::tensor::ImageTensor, usize)],
    batch: &[usize],
    lr: f64,
) -> f64 {
    let last = layers.len() - 1;
    let mut grad_w: Vec<Vec<Vec<f64>>> = layers
        .iter()
        .map(|l| vec![vec![0.0; l.in_dim()]; l.out_dim()])
        .collect();
    let mut grad_b: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.out_dim()]).collect();
    let mut loss_sum = 0.0;

    for &idx in batch {
        let (x, label) = &samples[idx];
        // forward with stored activations
        let mut acts: Vec<Vec<f64>> = vec![x.data().to_vec()];
        for (i, layer) in layers.iter().enumerate() {
            let mut z: Vec<f64> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| crate::tensor::dot(row, acts.last().unwrap()) + b)
                .collect();
            if i < last {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            acts.push(z);
        }
        let probs = softmax(acts.last().unwrap());
        loss_sum += -(probs[*label].max(1e-300)).ln();

        // delta at the logits for cross-entropy: probs - onehot
        let mut delta: Vec<f64> = probs;
        delta[*label] -= 1.0;

        for i in (0..layers.len()).rev() {
            let input = &acts[i];
            for (r, &dv) in delta.iter().enumerate() {
                grad_b[i][r] += dv;
                for (c, &iv) in input.iter().enumerate() {
                    grad_w[i][r][c] += dv * iv;
                }
            }
            if i > 0 {
                let mut prev = vec![0.0; layers[i].in_dim()];
                for (row, &dv) in layers[i].weights.iter().zip(&delta) {
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += dv * w;
                    }
                }
                // ReLU gate from the stored post-activation
                for (p, &a) in prev.iter_mut().zip(&acts[i]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    let scale = lr / batch.len() as f64;
    for (i, layer) in layers.iter_mut().enumerate() {
        for (row, grow) in layer.weights.iter_mut().zip(&grad_w[i]) {
            for (w, &g) in row.iter_mut().zip(grow) {
                *w -= scale * g;
            }
        }
        for (b, &g) in layer.bias.iter_mut().zip(&grad_b[i]) {
            *b -= scale * g;
        }
    }
    loss_sum
}
