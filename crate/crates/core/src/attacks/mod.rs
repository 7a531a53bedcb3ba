//! Attack suite: score-based (SimBA, SimBA-DCT, Bandit-TD) and
//! decision-based (Boundary Attack, Sign-OPT, HSJA, GeoDA) methods, all
//! driving an oracle under a query budget and emitting an [`AttackTrace`].
//!
//! Success is refereed against the undefended base model: a candidate counts
//! as successful when the base model misclassifies it within the
//! perturbation budget. The defense is the oracle's problem, not the
//! referee's; a defended-vote referee exists for ablations.

pub mod bandit;
pub mod boundary;
pub mod geoda;
pub mod hsja;
pub mod init;
pub mod sign_opt;
pub mod simba;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::argmax_label;
use crate::models::Model;
use crate::oracle::DefenseSpec;
use crate::rng::SeededRng;
use crate::tensor::ImageTensor;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack parameter: {0}")]
    InvalidParameter(String),
}

/// Query and perturbation budgets of a single run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackBudget {
    pub queries: u64,
    pub epsilon: f64,
}

impl AttackBudget {
    pub fn new(queries: u64, epsilon: f64) -> Result<Self, AttackError> {
        if queries < 1 {
            return Err(AttackError::InvalidParameter(
                "query budget must be >= 1".into(),
            ));
        }
        if epsilon <= 0.0 {
            return Err(AttackError::InvalidParameter(
                "perturbation budget must be > 0".into(),
            ));
        }
        Ok(AttackBudget { queries, epsilon })
    }
}

/// The observable recorded for an accepted step: the queried class
/// probability for score attacks, the observed label or current boundary
/// radius for decision attacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepValue {
    Value(f64),
    Label(usize),
}

/// One accepted update of the running adversarial candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    /// Accepted-step counter, starting at 0.
    pub step: u64,
    /// Physical queries used when the step was accepted.
    pub query: u64,
    /// Perturbation norm of the candidate.
    pub l2: f64,
    pub value: StepValue,
    /// Base-model label of the candidate (referee evaluation, query-free).
    pub base_label: usize,
    /// Base-model probability of the original class at the candidate.
    pub base_prob_original: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Success,
    BudgetExhausted,
    InitFailure,
}

/// Record of one attack run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackTrace {
    pub attack: String,
    pub original_label: usize,
    pub epsilon: f64,
    pub success: bool,
    pub termination: Termination,
    pub queries_used: u64,
    /// Query count when success was first achieved.
    pub success_query: Option<u64>,
    /// Smallest accepted perturbation norm over the run.
    pub best_l2: f64,
    /// Perturbation norm of the last accepted candidate.
    pub final_l2: f64,
    /// The last accepted candidate.
    pub final_point: Vec<f64>,
    pub steps: Vec<TraceStep>,
}

impl AttackTrace {
    /// Whether the run succeeded within the given budgets: some accepted step
    /// is base-misclassified with norm <= epsilon (inclusive) using at most
    /// `queries`.
    pub fn success_within(&self, epsilon: f64, queries: u64) -> bool {
        self.steps.iter().any(|s| {
            s.query <= queries && s.l2 <= epsilon && s.base_label != self.original_label
        })
    }

    /// Recomputed perturbation norm of the final point.
    pub fn recomputed_final_l2(&self, x0: &ImageTensor) -> f64 {
        let diff: Vec<f64> = self
            .final_point
            .iter()
            .zip(x0.data())
            .map(|(a, b)| a - b)
            .collect();
        crate::tensor::l2_norm(&diff)
    }
}

/// Judges candidates against the success criterion without spending oracle
/// queries. The default judges on the undefended base model; the defended
/// vote re-applies the defense with the referee's own generator.
pub struct Referee<'a> {
    model: &'a dyn Model,
    epsilon: f64,
    vote: Option<(DefenseSpec, SeededRng, bool)>,
}

/// Outcome of one referee evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Verdict {
    pub label: usize,
    pub prob_original: f64,
    pub success: bool,
}

impl<'a> Referee<'a> {
    pub fn new(model: &'a dyn Model, epsilon: f64) -> Self {
        Referee {
            model,
            epsilon,
            vote: None,
        }
    }

    /// Ablation mode: judge on a defended evaluation instead of the base
    /// model. Uses its own rng so attack determinism is unaffected.
    pub fn with_defended_vote(model: &'a dyn Model, epsilon: f64, defense: DefenseSpec, rng: SeededRng, clip: bool) -> Self {
        Referee {
            model,
            epsilon,
            vote: Some((defense, rng, clip)),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn probs(&mut self, x: &ImageTensor) -> Vec<f64> {
        let fed = match &mut self.vote {
            None => x.clone(),
            Some((defense, rng, clip)) => {
                let t = defense.apply(x, rng);
                if *clip {
                    t.clip01()
                } else {
                    t
                }
            }
        };
        self.model
            .forward_probs(fed.data())
            .expect("referee model dimension fixed at run construction")
    }

    /// Criterion label of a point.
    pub fn label(&mut self, x: &ImageTensor) -> usize {
        argmax_label(&self.probs(x))
    }

    pub fn judge(&mut self, x0: &ImageTensor, c0: usize, candidate: &ImageTensor) -> Verdict {
        let probs = self.probs(candidate);
        let label = argmax_label(&probs);
        let l2 = candidate.l2_distance(x0);
        Verdict {
            label,
            prob_original: probs[c0],
            success: label != c0 && l2 <= self.epsilon,
        }
    }
}

/// Incrementally assembles an [`AttackTrace`].
pub(crate) struct TraceBuilder {
    attack: &'static str,
    original_label: usize,
    epsilon: f64,
    steps: Vec<TraceStep>,
    success_query: Option<u64>,
    best_l2: f64,
}

impl TraceBuilder {
    pub fn new(attack: &'static str, original_label: usize, epsilon: f64) -> Self {
        TraceBuilder {
            attack,
            original_label,
            epsilon,
            steps: Vec::new(),
            success_query: None,
            best_l2: f64::INFINITY,
        }
    }

    /// Records an accepted step; returns true when it satisfies the success
    /// criterion (and remembers the first such query count).
    pub fn accept(
        &mut self,
        query: u64,
        l2: f64,
        value: StepValue,
        verdict: &Verdict,
    ) -> bool {
        let step = TraceStep {
            step: self.steps.len() as u64,
            query,
            l2,
            value,
            base_label: verdict.label,
            base_prob_original: verdict.prob_original,
        };
        self.steps.push(step);
        if l2 < self.best_l2 {
            self.best_l2 = l2;
        }
        if verdict.success && self.success_query.is_none() {
            self.success_query = Some(query);
        }
        verdict.success
    }

    pub fn finish(
        self,
        termination: Termination,
        queries_used: u64,
        final_point: &ImageTensor,
        final_l2: f64,
    ) -> AttackTrace {
        AttackTrace {
            attack: self.attack.to_string(),
            original_label: self.original_label,
            epsilon: self.epsilon,
            success: self.success_query.is_some(),
            termination,
            queries_used,
            success_query: self.success_query,
            best_l2: if self.best_l2.is_finite() {
                self.best_l2
            } else {
                final_l2
            },
            final_l2,
            final_point: final_point.data().to_vec(),
            steps: self.steps,
        }
    }
}

/// Rescales `x - x0` onto the epsilon ball when it falls outside.
pub(crate) fn project_to_ball(x: &ImageTensor, x0: &ImageTensor, epsilon: f64) -> ImageTensor {
    let delta = x.sub(x0);
    let norm = crate::tensor::l2_norm(&delta);
    if norm <= epsilon {
        return x.clone();
    }
    x0.add_scaled(&delta, epsilon / norm)
}
