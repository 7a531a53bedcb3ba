//! Expectation-based adaptive attacker: every logical query issues T
//! physical queries and aggregates them — the mean for score queries, the
//! majority vote for decision queries.
//!
//! The ledger distinguishes physical from logical counts, and a logical
//! query is refused outright when fewer than T physical queries remain, so
//! a wrapped run always uses exactly T times the logical query count.

use serde::{Deserialize, Serialize};

use crate::oracle::{OracleError, QueryOracle};
use crate::rng::SeededRng;
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdaptiveWrapConfig {
    /// Physical queries per logical query; 1 disables aggregation.
    pub repeats: u64,
}

impl AdaptiveWrapConfig {
    pub fn new(repeats: u64) -> Result<Self, OracleError> {
        if repeats < 1 {
            return Err(OracleError::InvalidParameter(
                "adaptive repeat count must be >= 1".into(),
            ));
        }
        Ok(AdaptiveWrapConfig { repeats })
    }
}

/// Wraps any oracle so each logical query aggregates T physical queries.
pub struct AdaptiveOracle<O: QueryOracle> {
    inner: O,
    repeats: u64,
    logical: u64,
}

impl<O: QueryOracle> AdaptiveOracle<O> {
    pub fn new(inner: O, config: AdaptiveWrapConfig) -> Self {
        AdaptiveOracle {
            inner,
            repeats: config.repeats,
            logical: 0,
        }
    }

    pub fn repeats(&self) -> u64 {
        self.repeats
    }

    /// Logical queries answered so far.
    pub fn logical_queries(&self) -> u64 {
        self.logical
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn into_inner(self) -> O {
        self.inner
    }

    fn reserve(&self) -> Result<(), OracleError> {
        // refuse rather than start a batch that cannot finish: partial
        // aggregates would bias the answer
        if self.inner.queries_remaining() < self.repeats {
            return Err(OracleError::BudgetExceeded);
        }
        Ok(())
    }

    /// Arithmetic mean of T defended score queries.
    pub fn expected_score_query(&mut self, x: &ImageTensor) -> Result<Vec<f64>, OracleError> {
        self.reserve()?;
        let mut acc = self.inner.score_query(x)?;
        for _ in 1..self.repeats {
            let probs = self.inner.score_query(x)?;
            for (a, p) in acc.iter_mut().zip(probs) {
                *a += p;
            }
        }
        let t = self.repeats as f64;
        for a in acc.iter_mut() {
            *a /= t;
        }
        self.logical += 1;
        Ok(acc)
    }

    /// Most frequent label over T defended decision queries; ties break
    /// toward the smallest class index.
    pub fn majority_decision_query(&mut self, x: &ImageTensor) -> Result<usize, OracleError> {
        self.reserve()?;
        let mut counts: Vec<u64> = Vec::new();
        for _ in 0..self.repeats {
            let label = self.inner.decision_query(x)?;
            if label >= counts.len() {
                counts.resize(label + 1, 0);
            }
            counts[label] += 1;
        }
        self.logical += 1;
        let mut best = 0;
        for (label, &count) in counts.iter().enumerate() {
            if count > counts[best] {
                best = label;
            }
        }
        Ok(best)
    }
}

impl<O: QueryOracle> QueryOracle for AdaptiveOracle<O> {
    fn score_query(&mut self, x: &ImageTensor) -> Result<Vec<f64>, OracleError> {
        self.expected_score_query(x)
    }

    fn decision_query(&mut self, x: &ImageTensor) -> Result<usize, OracleError> {
        self.majority_decision_query(x)
    }

    fn queries_used(&self) -> u64 {
        self.inner.queries_used()
    }

    fn queries_remaining(&self) -> u64 {
        self.inner.queries_remaining()
    }
}

/// Snapshot of the running mean of a noisy scalar estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasEntry {
    pub repeats: u64,
    pub mean: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasReport {
    pub reference: f64,
    pub entries: Vec<BiasEntry>,
}

/// Tracks |mean over T samples of f(x + eta) - f(x)| as T grows, snapshotting
/// at powers of two up to `t_max`. For nonlinear f the error plateaus at the
/// smoothing bias instead of vanishing.
pub fn expectation_bias_demo(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    sigma: f64,
    t_max: u64,
    rng: &mut SeededRng,
) -> BiasReport {
    let reference = f(x);
    let mut entries = Vec::new();
    let mut sum = 0.0;
    let mut next_snapshot = 1u64;
    for t in 1..=t_max {
        let noisy: Vec<f64> = x.iter().map(|&v| v + sigma * rng.next_gaussian()).collect();
        sum += f(&noisy);
        if t == next_snapshot || t == t_max {
            let mean = sum / t as f64;
            entries.push(BiasEntry {
                repeats: t,
                mean,
                abs_error: (mean - reference).abs(),
            });
            next_snapshot = next_snapshot.saturating_mul(2);
        }
    }
    BiasReport { reference, entries }
}
