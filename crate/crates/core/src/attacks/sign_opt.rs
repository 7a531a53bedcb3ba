//! Sign-OPT: treats the decision-based attack as minimization of the
//! direction-to-boundary distance g(theta) and descends it with a
//! sign-aggregated gradient estimate.
//!
//! Each probe costs one decision query at radius g(theta): a flip there
//! means the boundary along the perturbed direction is nearer, so that
//! probe votes negative. The direction update is backtracked until g
//! actually decreases; when no backtracking step helps, theta is left
//! unchanged.

use crate::attacks::init::{init_adversarial, InitError};
use crate::attacks::{
    AttackBudget, AttackError, AttackTrace, Referee, StepValue, Termination, TraceBuilder,
};
use crate::estim::{boundary_distance_along, EstimError};
use crate::oracle::QueryOracle;
use crate::rng::SeededRng;
use crate::tensor::{normalized, ImageTensor};

#[derive(Debug, Clone)]
pub struct SignOptParams {
    /// Probe directions per gradient estimate.
    pub probes: usize,
    /// Perturbation scale of the probe directions.
    pub probe_step: f64,
    /// Initial descent step; adapts across iterations.
    pub eta: f64,
    pub max_backtracks: usize,
    /// Relative tolerance of the g(theta) line evaluations.
    pub g_tol: f64,
    /// Radius cap beyond which a direction counts as non-crossing.
    pub search_cap: f64,
    pub init_tries: usize,
    pub init_bs_tol: f64,
}

impl Default for SignOptParams {
    fn default() -> Self {
        SignOptParams {
            probes: 30,
            probe_step: 0.05,
            eta: 0.2,
            max_backtracks: 4,
            g_tol: 1e-3,
            search_cap: 40.0,
            init_tries: 50,
            init_bs_tol: 1e-3,
        }
    }
}

/// Sign-aggregated gradient of the direction-to-boundary distance at
/// `theta` (unit), whose current distance is `g`: each probe direction votes
/// with the sign of the observed distance change at radius `g`.
pub fn sign_opt_gradient<O: QueryOracle>(
    oracle: &mut O,
    x0: &ImageTensor,
    c0: usize,
    theta: &[f64],
    g: f64,
    probes: usize,
    probe_step: f64,
    rng: &mut SeededRng,
) -> Result<Vec<f64>, crate::oracle::OracleError> {
    let d = theta.len();
    let mut grad = vec![0.0; d];
    for _ in 0..probes {
        let u = rng.gaussian_vec(d);
        let perturbed: Vec<f64> = theta
            .iter()
            .zip(&u)
            .map(|(t, ui)| t + probe_step * ui)
            .collect();
        let probe_dir = match normalized(&perturbed) {
            Some(p) => p,
            None => continue,
        };
        let probe = x0.add_scaled(&probe_dir, g);
        let label = oracle.decision_query(&probe)?;
        let sign = if label != c0 { -1.0 } else { 1.0 };
        for (gr, &ui) in grad.iter_mut().zip(&u) {
            *gr += sign * ui / probes as f64;
        }
    }
    Ok(grad)
}

pub fn sign_opt_attack<O: QueryOracle>(
    oracle: &mut O,
    referee: &mut Referee,
    x0: &ImageTensor,
    c0: usize,
    budget: &AttackBudget,
    params: &SignOptParams,
    rng: &mut SeededRng,
) -> Result<AttackTrace, AttackError> {
    if params.probes == 0 || params.probe_step <= 0.0 || params.eta <= 0.0 {
        return Err(AttackError::InvalidParameter(
            "sign-opt needs probes >= 1 and positive probe_step/eta".into(),
        ));
    }

    let mut trace = TraceBuilder::new("sign_opt", c0, budget.epsilon);
    let init = match init_adversarial(oracle, x0, c0, rng, params.init_tries, params.init_bs_tol) {
        Ok(init) => init,
        Err(InitError::NoAdversarialFound(_)) => {
            return Ok(trace.finish(Termination::InitFailure, oracle.queries_used(), x0, 0.0))
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

    let verdict = referee.judge(x0, c0, &init.point);
    if trace.accept(
        oracle.queries_used(),
        init.distance,
        StepValue::Label(init.observed_label),
        &verdict,
    ) {
        let d = init.distance;
        return Ok(trace.finish(Termination::Success, oracle.queries_used(), &init.point, d));
    }
    if init.distance == 0.0 {
        // initialized at the clean point itself; nothing to minimize
        return Ok(trace.finish(
            Termination::BudgetExhausted,
            oracle.queries_used(),
            &init.point,
            0.0,
        ));
    }

    let mut theta = normalized(&init.point.sub(x0)).expect("init point differs from x0");
    let mut g = init.distance;
    let mut eta = params.eta;

    loop {
        let mut exhausted = false;
        let grad = match sign_opt_gradient(
            oracle,
            x0,
            c0,
            &theta,
            g,
            params.probes,
            params.probe_step,
            rng,
        ) {
            Ok(g) => g,
            Err(_) => break,
        };

        // backtracking line search on g
        let mut accepted = false;
        for _ in 0..=params.max_backtracks {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(t, gr)| t - eta * gr)
                .collect();
            let candidate = match normalized(&candidate) {
                Some(c) => c,
                None => break,
            };
            let g_new = match boundary_distance_along(
                oracle,
                x0,
                c0,
                &candidate,
                g,
                params.search_cap,
                params.g_tol,
            ) {
                Ok(v) => v,
                Err(EstimError::BudgetExceeded) => {
                    exhausted = true;
                    break;
                }
                Err(_) => f64::INFINITY,
            };
            if g_new < g {
                theta = candidate;
                g = g_new;
                accepted = true;
                break;
            }
            eta *= 0.5;
            if eta < 1e-6 {
                break;
            }
        }
        if exhausted {
            break;
        }

        if accepted {
            eta = (eta * 1.5).min(10.0);
            let candidate_point = x0.add_scaled(&theta, g).clip01();
            let l2 = candidate_point.l2_distance(x0);
            let verdict = referee.judge(x0, c0, &candidate_point);
            if trace.accept(
                oracle.queries_used(),
                l2,
                StepValue::Value(g),
                &verdict,
            ) {
                return Ok(trace.finish(
                    Termination::Success,
                    oracle.queries_used(),
                    &candidate_point,
                    l2,
                ));
            }
        }
    }

    let final_point = x0.add_scaled(&theta, g).clip01();
    let l2 = final_point.l2_distance(x0);
    Ok(trace.finish(
        Termination::BudgetExhausted,
        oracle.queries_used(),
        &final_point,
        l2,
    ))
}
