//! Orthonormal 2-D type-II discrete cosine transform, applied per channel.
//!
//! With the orthonormal scaling the transform preserves the Euclidean norm
//! and the type-III transform with the same coefficients is its exact
//! inverse. Direct O(n^2) evaluation per axis; at the image sizes used here
//! that is faster than staging an FFT.

use crate::tensor::{ImageTensor, Shape};

/// 1-D orthonormal DCT-II.
fn dct1d(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    let nf = n as f64;
    let a0 = (1.0 / nf).sqrt();
    let ak = (2.0 / nf).sqrt();
    (0..n)
        .map(|k| {
            let alpha = if k == 0 { a0 } else { ak };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    v * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * nf))
                        .cos()
                })
                .sum();
            alpha * sum
        })
        .collect()
}

/// 1-D orthonormal DCT-III (the inverse of [`dct1d`]).
fn idct1d(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    let nf = n as f64;
    let a0 = (1.0 / nf).sqrt();
    let ak = (2.0 / nf).sqrt();
    (0..n)
        .map(|i| {
            input
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let alpha = if k == 0 { a0 } else { ak };
                    alpha
                        * v
                        * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * nf))
                            .cos()
                })
                .sum()
        })
        .collect()
}

fn transform_channelwise(x: &ImageTensor, f: fn(&[f64]) -> Vec<f64>) -> ImageTensor {
    let shape = x.shape();
    let mut data = x.data().to_vec();
    for ch in 0..shape.channels {
        // rows
        for r in 0..shape.height {
            let row: Vec<f64> = (0..shape.width)
                .map(|c| data[shape.index(r, c, ch)])
                .collect();
            for (c, v) in f(&row).into_iter().enumerate() {
                data[shape.index(r, c, ch)] = v;
            }
        }
        // columns
        for c in 0..shape.width {
            let col: Vec<f64> = (0..shape.height)
                .map(|r| data[shape.index(r, c, ch)])
                .collect();
            for (r, v) in f(&col).into_iter().enumerate() {
                data[shape.index(r, c, ch)] = v;
            }
        }
    }
    ImageTensor::new(shape, data).unwrap()
}

/// Forward 2-D DCT per channel; output has the same shape as the input.
pub fn dct2(x: &ImageTensor) -> ImageTensor {
    transform_channelwise(x, dct1d)
}

/// Inverse 2-D DCT per channel.
pub fn idct2(x: &ImageTensor) -> ImageTensor {
    transform_channelwise(x, idct1d)
}

/// Spatial image of a single unit DCT coefficient; always unit norm.
pub fn basis_image(shape: Shape, freq_row: usize, freq_col: usize, channel: usize) -> ImageTensor {
    let mut coeffs = vec![0.0; shape.dim()];
    coeffs[shape.index(freq_row, freq_col, channel)] = 1.0;
    idct2(&ImageTensor::new(shape, coeffs).unwrap())
}
