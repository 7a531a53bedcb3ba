//! Image tensors and the small set of vector primitives everything else
//! builds on.
//!
//! Pixel data is stored flat in channel-last row-major order: the value at
//! (row, col, channel) lives at index `(row * width + col) * channels + ch`.
//! All arithmetic is `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("data length {got} does not match shape dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape dimensions must be nonzero")]
    EmptyShape,
    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
}

/// Width, height and channel count of an image tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Shape {
            width,
            height,
            channels,
        }
    }

    /// Total flat dimension d = width * height * channels.
    pub fn dim(&self) -> usize {
        self.width * self.height * self.channels
    }

    /// Flat index of (row, col, channel) under channel-last row-major order.
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }
}

/// A flat vector of pixel values plus shape metadata.
///
/// Values are immutable after construction; mutation goes through
/// consuming/cloning helpers so shared tensors stay safe across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.dim() == 0 {
            return Err(TensorError::EmptyShape);
        }
        if data.len() != shape.dim() {
            return Err(TensorError::LengthMismatch {
                expected: shape.dim(),
                got: data.len(),
            });
        }
        Ok(ImageTensor { shape, data })
    }

    /// Tensor filled with a constant value.
    pub fn constant(shape: Shape, value: f64) -> Self {
        ImageTensor {
            data: vec![value; shape.dim()],
            shape,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[self.shape.index(row, col, channel)]
    }

    /// Componentwise clamp of every value into [0, 1]; shape preserved.
    pub fn clip01(&self) -> ImageTensor {
        ImageTensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// Difference vector `self - other` (shapes must match).
    pub fn sub(&self, other: &ImageTensor) -> Vec<f64> {
        assert_eq!(self.shape, other.shape, "tensor shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// New tensor `self + scale * delta`.
    pub fn add_scaled(&self, delta: &[f64], scale: f64) -> ImageTensor {
        assert_eq!(self.data.len(), delta.len(), "delta length differs");
        ImageTensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(delta)
                .map(|(a, b)| a + scale * b)
                .collect(),
        }
    }

    pub fn l2_distance(&self, other: &ImageTensor) -> f64 {
        l2_norm(&self.sub(other))
    }
}

/// Euclidean norm of a flat vector.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity; zero when either vector is (numerically) zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na < 1e-12 || nb < 1e-12 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Rescales `v` to unit norm, or returns `None` for a (numerically) zero vector.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = l2_norm(v);
    if n < 1e-12 {
        return None;
    }
    Some(v.iter().map(|x| x / n).collect())
}

/// `d` independent draws from N(0, sigma^2); `sigma == 0` yields the zero
/// vector without consuming any draws.
pub fn sample_gaussian(
    rng: &mut SeededRng,
    d: usize,
    sigma: f64,
) -> Result<Vec<f64>, TensorError> {
    if sigma < 0.0 {
        return Err(TensorError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; d]);
    }
    Ok((0..d).map(|_| sigma * rng.next_gaussian()).collect())
}
