//! Portable textual weight files for the MLP.
//!
//! Format (one token group per line, whitespace separated):
//!
//! ```text
//! SND-MLP v1
//! <layer count L>
//! <rows> <cols>          -- layer 1 header
//! <cols floats>          -- weight row 1
//! ...                    -- remaining weight rows
//! <rows floats>          -- bias vector
//! ...                    -- layers 2..L in the same form
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so
//! `load(save(m))` reproduces bit-identical forward outputs.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{Layer, MlpModel};

pub const MODEL_MAGIC: &str = "SND-MLP v1";

#[derive(Debug, Error)]
pub enum WeightFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic line: expected `{MODEL_MAGIC}`")]
    MagicMismatch,
    #[error("truncated file: expected {expected} at line {line}")]
    Truncated { line: usize, expected: &'static str },
    #[error("parse error at line {0}")]
    Parse(usize),
    #[error("dimension inconsistency: {0}")]
    DimensionInconsistency(String),
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<(), WeightFileError> {
    let mut out = String::new();
    writeln!(out, "{MODEL_MAGIC}").unwrap();
    writeln!(out, "{}", model.layers().len()).unwrap();
    for layer in model.layers() {
        writeln!(out, "{} {}", layer.out_dim(), layer.in_dim()).unwrap();
        for row in &layer.weights {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        let bias: Vec<String> = layer.bias.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", bias.join(" ")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel, WeightFileError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();

    let (_, magic) = lines.next().ok_or(WeightFileError::Truncated {
        line: 1,
        expected: "magic",
    })?;
    if magic.trim() != MODEL_MAGIC {
        return Err(WeightFileError::MagicMismatch);
    }

    let (ln, count_line) = lines.next().ok_or(WeightFileError::Truncated {
        line: 2,
        expected: "layer count",
    })?;
    let layer_count: usize = count_line
        .trim()
        .parse()
        .map_err(|_| WeightFileError::Parse(ln + 1))?;
    if layer_count == 0 {
        return Err(WeightFileError::DimensionInconsistency(
            "layer count must be >= 1".into(),
        ));
    }

    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let (ln, header) = lines.next().ok_or(WeightFileError::Truncated {
            line: 0,
            expected: "layer header",
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| WeightFileError::Parse(ln + 1)))
            .collect::<Result<_, _>>()?;
        if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
            return Err(WeightFileError::Parse(ln + 1));
        }
        let (rows, cols) = (dims[0], dims[1]);

        let mut weights = Vec::with_capacity(rows);
        for _ in 0..rows {
            let (ln, line) = lines.next().ok_or(WeightFileError::Truncated {
                line: 0,
                expected: "weight row",
            })?;
            let row = parse_floats(line, ln + 1)?;
            if row.len() != cols {
                return Err(WeightFileError::DimensionInconsistency(format!(
                    "weight row at line {} has {} values, expected {}",
                    ln + 1,
                    row.len(),
                    cols
                )));
            }
            weights.push(row);
        }
        let (ln, line) = lines.next().ok_or(WeightFileError::Truncated {
            line: 0,
            expected: "bias row",
        })?;
        let bias = parse_floats(line, ln + 1)?;
        if bias.len() != rows {
            return Err(WeightFileError::DimensionInconsistency(format!(
                "bias at line {} has {} values, expected {}",
                ln + 1,
                bias.len(),
                rows
            )));
        }
        layers.push(Layer { weights, bias });
    }

    MlpModel::new(layers).map_err(|e| WeightFileError::DimensionInconsistency(e.to_string()))
}

fn parse_floats(line: &str, line_no: usize) -> Result<Vec<f64>, WeightFileError> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| WeightFileError::Parse(line_no)))
        .collect()
}
