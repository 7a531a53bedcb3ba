//! Diagnostic mathematics: closed-form expectations under input noise,
//! mismatch probability and loss-noise estimators, and evaluation metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::AttackTrace;
use crate::loss::{adversary_loss, argmax_label, LossForm};
use crate::models::Model;
use crate::oracle::{QueryKind, QueryLog, QueryOracle};
use crate::tensor::ImageTensor;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("query budget exhausted during measurement")]
    BudgetExceeded,
}

// ---------------------------------------------------------------------------
// Standard normal helpers
// ---------------------------------------------------------------------------

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via the Abramowitz–Stegun 7.1.26 rational
/// approximation of erf, whose absolute error is below 1.5e-7; the CDF error
/// is half that, comfortably below 1e-7 on [-8, 8].
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

// ---------------------------------------------------------------------------
// Closed-form expectations
// ---------------------------------------------------------------------------

/// E[||eta||^2] for eta ~ N(0, sigma^2 I_d): the expectation of the squared
/// norm a quadratic score sees at the origin under input noise.
pub fn quadratic_expectation(d: usize, sigma: f64) -> f64 {
    d as f64 * sigma * sigma
}

/// Scalar ReLU unit F(x) = max(0, w x + b) under input noise of deviation
/// `sigma`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReluUnitParams {
    pub w: f64,
    pub b: f64,
    pub x: f64,
    pub sigma: f64,
}

/// E[max(0, w(x + eta) + b)] for eta ~ N(0, sigma^2):
///
/// `mu (1 - Phi(-mu/s)) + s phi(-mu/s)` with `mu = w x + b`, `s = |w| sigma`.
///
/// Degenerate scales (`w == 0` or `sigma == 0`) return the noiseless value
/// `max(0, mu)` directly.
pub fn relu_expectation(p: &ReluUnitParams) -> f64 {
    let mu = p.w * p.x + p.b;
    let s = p.w.abs() * p.sigma;
    if s == 0.0 {
        return mu.max(0.0);
    }
    let z = -mu / s;
    mu * (1.0 - std_normal_cdf(z)) + s * std_normal_pdf(z)
}

// ---------------------------------------------------------------------------
// Mismatch probability and loss-noise estimators
// ---------------------------------------------------------------------------

/// Fraction of (point, trial) pairs where the defended label differs from the
/// undefended label of the same point.
pub fn estimate_pmis_clean<O: QueryOracle>(
    defended: &mut O,
    base: &dyn Model,
    points: &[ImageTensor],
    trials: usize,
) -> Result<f64, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::EmptyInput("points"));
    }
    if trials < 1 {
        return Err(AnalysisError::InvalidParameter("trials must be >= 1".into()));
    }
    let mut mismatches = 0u64;
    let mut total = 0u64;
    for point in points {
        let base_label = argmax_label(
            &base
                .forward_probs(point.data())
                .map_err(|e| AnalysisError::InvalidParameter(e.to_string()))?,
        );
        for _ in 0..trials {
            let observed = defended
                .decision_query(point)
                .map_err(|_| AnalysisError::BudgetExceeded)?;
            if observed != base_label {
                mismatches += 1;
            }
            total += 1;
        }
    }
    Ok(mismatches as f64 / total as f64)
}

/// Mismatch probability replayed from recorded attack-time queries: the
/// defended label each query returned versus the undefended label of the
/// recorded input. Requires input logging; queries without stored inputs are
/// skipped.
pub fn estimate_pmis_from_log(log: &QueryLog, base: &dyn Model) -> Result<f64, AnalysisError> {
    let mut mismatches = 0u64;
    let mut total = 0u64;
    for record in &log.records {
        if record.kind != QueryKind::Decision {
            continue;
        }
        let Some(input) = &record.input else { continue };
        let base_label = argmax_label(
            &base
                .forward_probs(input)
                .map_err(|e| AnalysisError::InvalidParameter(e.to_string()))?,
        );
        if record.label != base_label {
            mismatches += 1;
        }
        total += 1;
    }
    if total == 0 {
        return Err(AnalysisError::EmptyInput("decision queries with inputs"));
    }
    Ok(mismatches as f64 / total as f64)
}

/// Same replay applied to pre-paired (defended label, base label) streams.
pub fn pmis_from_label_pairs(pairs: &[(usize, usize)]) -> Result<f64, AnalysisError> {
    if pairs.is_empty() {
        return Err(AnalysisError::EmptyInput("label pairs"));
    }
    let mismatches = pairs.iter().filter(|(a, b)| a != b).count();
    Ok(mismatches as f64 / pairs.len() as f64)
}

/// Mean over points of the per-point sample standard deviation of the
/// adversary loss under the defended oracle. Each point is queried `trials`
/// times with its own label as the attacked class.
pub fn estimate_sigma_hat<O: QueryOracle>(
    defended: &mut O,
    points: &[(ImageTensor, usize)],
    trials: usize,
) -> Result<f64, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::EmptyInput("points"));
    }
    if trials < 2 {
        return Err(AnalysisError::InvalidParameter(
            "sample deviation needs trials >= 2".into(),
        ));
    }
    let mut acc = 0.0;
    for (point, label) in points {
        let form = LossForm::untargeted(*label);
        let mut losses = Vec::with_capacity(trials);
        for _ in 0..trials {
            let probs = defended
                .score_query(point)
                .map_err(|_| AnalysisError::BudgetExceeded)?;
            losses.push(adversary_loss(&probs, &form));
        }
        acc += sample_std(&losses);
    }
    Ok(acc / points.len() as f64)
}

/// Unbiased (n-1 denominator) sample standard deviation.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

// ---------------------------------------------------------------------------
// Evaluation metrics
// ---------------------------------------------------------------------------

/// Percentage of traces that achieve base-model misclassification with norm
/// at most `epsilon` (inclusive) using at most `query_budget` queries.
pub fn attack_success_rate(
    traces: &[AttackTrace],
    epsilon: f64,
    query_budget: u64,
) -> Result<f64, AnalysisError> {
    if traces.is_empty() {
        return Err(AnalysisError::EmptyInput("traces"));
    }
    let hits = traces
        .iter()
        .filter(|t| t.success_within(epsilon, query_budget))
        .count();
    Ok(100.0 * hits as f64 / traces.len() as f64)
}

/// Distance from the clean point of the query at index `query_budget`
/// (1-based), or of the last query when the run stopped earlier.
pub fn query_perturbation_norm_at(log: &QueryLog, query_budget: u64) -> Result<f64, AnalysisError> {
    if log.records.is_empty() {
        return Err(AnalysisError::EmptyInput("query log"));
    }
    let record = log
        .records
        .iter()
        .take_while(|r| r.index <= query_budget)
        .last()
        .unwrap_or(&log.records[0]);
    Ok(record.l2_from_x0)
}

/// Mean of [`query_perturbation_norm_at`] across runs.
pub fn mean_query_perturbation_norm(
    logs: &[QueryLog],
    query_budget: u64,
) -> Result<f64, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::EmptyInput("query logs"));
    }
    let mut acc = 0.0;
    for log in logs {
        acc += query_perturbation_norm_at(log, query_budget)?;
    }
    Ok(acc / logs.len() as f64)
}

/// Aggregate measurement of one (attack, defense) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub attack: String,
    pub defense: String,
    pub sigma: f64,
    pub repeats: u64,
    pub seed: u64,
    pub n_images: usize,
    pub success_rate: f64,
    pub mean_final_l2: f64,
    pub mean_query_l2: f64,
    pub pmis: f64,
    pub sigma_hat: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str =
        "attack,defense,sigma,T,seed,n_images,success_rate,mean_final_l2,mean_query_l2,pmis,sigma_hat";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.attack,
            self.defense,
            self.sigma,
            self.repeats,
            self.seed,
            self.n_images,
            self.success_rate,
            self.mean_final_l2,
            self.mean_query_l2,
            self.pmis,
            self.sigma_hat
        )
    }
}
