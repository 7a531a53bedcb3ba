//! Boundary Attack: random walk along the decision boundary that gradually
//! contracts the perturbation while misclassification is maintained.
//!
//! Each proposal takes an orthogonal Gaussian step of scale
//! `orth_step * ||delta||`, re-projects onto the sphere around the clean
//! point, then contracts toward it by `contract_step`. Both scales adapt to
//! hold the acceptance rate near 0.25 over a sliding window: halve when the
//! window rate falls below 0.2, grow by 1.5x above 0.3.

use crate::attacks::init::{init_adversarial, InitError};
use crate::attacks::{
    AttackBudget, AttackError, AttackTrace, Referee, StepValue, Termination, TraceBuilder,
};
use crate::oracle::QueryOracle;
use crate::rng::SeededRng;
use crate::tensor::{dot, l2_norm, normalized, ImageTensor};

#[derive(Debug, Clone)]
pub struct BoundaryAttackParams {
    pub orth_step: f64,
    pub contract_step: f64,
    pub window: usize,
    pub init_tries: usize,
    pub init_bs_tol: f64,
}

impl BoundaryAttackParams {
    /// Defaults for input dimension `d`. The contraction scale starts a
    /// factor 2 sqrt(d) below the orthogonal scale: an orthogonal move
    /// improves boundary alignment only by O(1/sqrt(d)), so a contraction of
    /// comparable size would almost never be accepted and the adaptive
    /// halving would freeze the walk.
    pub fn for_dim(d: usize) -> Self {
        let orth = 0.01;
        BoundaryAttackParams {
            orth_step: orth,
            contract_step: orth / (2.0 * (d as f64).sqrt()),
            window: 20,
            init_tries: 50,
            init_bs_tol: 1e-3,
        }
    }
}

pub fn boundary_attack<O: QueryOracle>(
    oracle: &mut O,
    referee: &mut Referee,
    x0: &ImageTensor,
    c0: usize,
    budget: &AttackBudget,
    params: &BoundaryAttackParams,
    rng: &mut SeededRng,
) -> Result<AttackTrace, AttackError> {
    if params.orth_step < 0.0 || params.contract_step < 0.0 {
        return Err(AttackError::InvalidParameter(
            "boundary attack step scales must be >= 0".into(),
        ));
    }
    if params.window == 0 {
        return Err(AttackError::InvalidParameter("window must be >= 1".into()));
    }

    let mut trace = TraceBuilder::new("boundary", c0, budget.epsilon);
    let mut current = match init_adversarial(oracle, x0, c0, rng, params.init_tries, params.init_bs_tol)
    {
        Ok(init) => init,
        Err(InitError::NoAdversarialFound(_)) => {
            return Ok(trace.finish(
                Termination::InitFailure,
                oracle.queries_used(),
                x0,
                0.0,
            ))
        }
        Err(_) => {
            return Ok(trace.finish(
                Termination::BudgetExhausted,
                oracle.queries_used(),
                x0,
                0.0,
            ))
        }
    };

    let verdict = referee.judge(x0, c0, &current.point);
    let l2 = current.point.l2_distance(x0);
    if trace.accept(
        oracle.queries_used(),
        l2,
        StepValue::Label(current.observed_label),
        &verdict,
    ) {
        return Ok(trace.finish(Termination::Success, oracle.queries_used(), &current.point, l2));
    }

    let mut orth = params.orth_step;
    let mut contract = params.contract_step;
    let mut window_proposals = 0usize;
    let mut window_accepts = 0usize;

    loop {
        let delta = current.point.sub(x0);
        let radius = l2_norm(&delta);
        let candidate = match normalized(&delta) {
            Some(delta_hat) => {
                // orthogonal Gaussian step, re-projected to the sphere
                let mut g = rng.gaussian_vec(delta.len());
                let along = dot(&g, &delta_hat);
                for (gi, &dh) in g.iter_mut().zip(&delta_hat) {
                    *gi -= along * dh;
                }
                let stepped: Vec<f64> = match normalized(&g) {
                    Some(g_hat) => delta
                        .iter()
                        .zip(&g_hat)
                        .map(|(d, gh)| d + orth * radius * gh)
                        .collect(),
                    None => delta.clone(),
                };
                let on_sphere = match normalized(&stepped) {
                    Some(s_hat) => x0.add_scaled(&s_hat, radius),
                    None => current.point.clone(),
                };
                // contract toward the clean point
                let contracted = on_sphere.sub(x0);
                x0.add_scaled(&contracted, 1.0 - contract).clip01()
            }
            // zero perturbation: proposal degenerates to the current point
            None => current.point.clone(),
        };

        let label = match oracle.decision_query(&candidate) {
            Ok(l) => l,
            Err(_) => {
                let l2 = current.point.l2_distance(x0);
                return Ok(trace.finish(
                    Termination::BudgetExhausted,
                    oracle.queries_used(),
                    &current.point,
                    l2,
                ));
            }
        };
        window_proposals += 1;
        if label != c0 {
            window_accepts += 1;
            current.point = candidate;
            current.observed_label = label;
            let l2 = current.point.l2_distance(x0);
            let verdict = referee.judge(x0, c0, &current.point);
            if trace.accept(oracle.queries_used(), l2, StepValue::Label(label), &verdict) {
                return Ok(trace.finish(
                    Termination::Success,
                    oracle.queries_used(),
                    &current.point,
                    l2,
                ));
            }
        }

        if window_proposals >= params.window {
            let rate = window_accepts as f64 / window_proposals as f64;
            if rate < 0.2 {
                orth *= 0.5;
                contract *= 0.5;
            } else if rate > 0.3 {
                orth = (orth * 1.5).min(1.0);
                contract = (contract * 1.5).min(0.5);
            }
            window_proposals = 0;
            window_accepts = 0;
        }
    }
}
