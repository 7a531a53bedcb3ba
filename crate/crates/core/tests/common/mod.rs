//! Shared fixtures and independent oracles for the integration tests.
//!
//! Everything here deliberately avoids the code paths it is used to check:
//! closed forms are computed from scratch (Lanczos log-gamma, exact binomial
//! sums) and the counting shim re-counts queries outside the ledger.

#![allow(dead_code)]

use std::sync::OnceLock;

use snd_core::dataset::{SyntheticDataset, SyntheticSpec};
use snd_core::models::train::{accuracy, train_mlp, MlpArchitecture, SgdParams};
use snd_core::models::{LinearModel, MlpModel};
use snd_core::oracle::{OracleError, QueryOracle};
use snd_core::tensor::ImageTensor;

/// Lanczos log-gamma (g = 7, 9 coefficients), |rel err| < 1e-13 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Closed-form mean of ||eta||_2 for eta ~ N(0, sigma^2 I_d):
/// sigma * sqrt(2) * Gamma((d+1)/2) / Gamma(d/2).
pub fn chi_mean(d: usize, sigma: f64) -> f64 {
    let half = d as f64 / 2.0;
    sigma * std::f64::consts::SQRT_2 * (ln_gamma(half + 0.5) - ln_gamma(half)).exp()
}

/// Exact upper binomial tail P[X >= k] for X ~ Bin(n, p).
pub fn binomial_tail(n: u64, k: u64, p: f64) -> f64 {
    let mut total = 0.0;
    for i in k..=n {
        let ln_choose = ln_gamma(n as f64 + 1.0)
            - ln_gamma(i as f64 + 1.0)
            - ln_gamma((n - i) as f64 + 1.0);
        total += (ln_choose + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp();
    }
    total
}

/// Query-counting shim: delegates to the wrapped oracle while keeping its
/// own tally, so ledger exactness can be cross-checked.
pub struct CountingOracle<O: QueryOracle> {
    pub inner: O,
    pub score_calls: u64,
    pub decision_calls: u64,
}

impl<O: QueryOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            score_calls: 0,
            decision_calls: 0,
        }
    }

    pub fn total_calls(&self) -> u64 {
        self.score_calls + self.decision_calls
    }
}

impl<O: QueryOracle> QueryOracle for CountingOracle<O> {
    fn score_query(&mut self, x: &ImageTensor) -> Result<Vec<f64>, OracleError> {
        let out = self.inner.score_query(x)?;
        self.score_calls += 1;
        Ok(out)
    }

    fn decision_query(&mut self, x: &ImageTensor) -> Result<usize, OracleError> {
        let out = self.inner.decision_query(x)?;
        self.decision_calls += 1;
        Ok(out)
    }

    fn queries_used(&self) -> u64 {
        self.inner.queries_used()
    }

    fn queries_remaining(&self) -> u64 {
        self.inner.queries_remaining()
    }
}

/// Two-class linear model with boundary normal `a` passing at distance
/// `margin` from the point `x_ref`: logits are +-(a.(x - x_ref) - margin)/2.
pub fn linear_two_class(a: &[f64], x_ref: &[f64], margin: f64) -> LinearModel {
    let half_pos: Vec<f64> = a.iter().map(|v| 0.5 * v).collect();
    let half_neg: Vec<f64> = a.iter().map(|v| -0.5 * v).collect();
    let a_dot_ref = snd_core::tensor::dot(a, x_ref);
    let offset = 0.5 * (a_dot_ref + margin * snd_core::tensor::l2_norm(a));
    // class 0 wins strictly inside the margin: logit0 - logit1 = a.x - offset*2... sign below
    LinearModel::new(vec![half_neg, half_pos], vec![offset, -offset]).unwrap()
}

/// The pinned desk task bundle: dataset, trained model, and a held-out pool
/// of correctly classified evaluation images. Trained once per test binary.
pub struct DeskTask {
    pub spec: SyntheticSpec,
    pub train: SyntheticDataset,
    pub model: MlpModel,
    pub train_accuracy: f64,
    /// Correctly classified held-out samples.
    pub eval: Vec<(ImageTensor, usize)>,
}

pub const DESK_TRAIN_SEED: u64 = 20_240_001;
pub const DESK_DATA_SEED: u64 = 1_001;
pub const DESK_EVAL_SEED: u64 = 2_002;

static DESK: OnceLock<DeskTask> = OnceLock::new();

pub fn desk_task() -> &'static DeskTask {
    DESK.get_or_init(|| {
        let spec = SyntheticSpec::desk_default();
        let train = SyntheticDataset::generate(&spec, DESK_DATA_SEED).unwrap();
        let model = train_mlp(
            &train,
            &MlpArchitecture::desk_default(),
            &SgdParams::default(),
            DESK_TRAIN_SEED,
        )
        .unwrap();
        let train_accuracy = accuracy(&model, &train);

        let mut eval_spec = spec.clone();
        eval_spec.per_class = 50;
        let pool = SyntheticDataset::generate(&eval_spec, DESK_EVAL_SEED).unwrap();
        let eval: Vec<(ImageTensor, usize)> = pool
            .samples()
            .iter()
            .filter(|(x, label)| {
                snd_core::models::predict_label(&model, x.data()) == Ok(*label)
            })
            .cloned()
            .collect();
        DeskTask {
            spec,
            train,
            model,
            train_accuracy,
            eval,
        }
    })
}
