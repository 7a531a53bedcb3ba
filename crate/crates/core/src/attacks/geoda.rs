//! GeoDA-style geometric attack: linearizes the decision boundary near the
//! clean point, estimates its normal from flip-signed sphere probes, and
//! walks the clean point to the boundary along the estimated normal.

use crate::attacks::init::{init_adversarial, InitError};
use crate::attacks::{
    AttackBudget, AttackError, AttackTrace, Referee, StepValue, Termination, TraceBuilder,
};
use crate::estim::{binary_search_to_boundary, boundary_distance_along, EstimError};
use crate::oracle::QueryOracle;
use crate::rng::SeededRng;
use crate::tensor::{normalized, ImageTensor};

#[derive(Debug, Clone)]
pub struct GeodaParams {
    /// Probe radius around the boundary point.
    pub probe_radius: f64,
    /// Number of sub-iterations the probe budget is split across.
    pub sub_iterations: usize,
    /// Geometric growth ratio of per-sub-iteration probe counts.
    pub budget_ratio: f64,
    /// Fraction of the remaining query budget spent on probes.
    pub probe_budget_frac: f64,
    pub bs_tol: f64,
    pub search_cap: f64,
    pub init_tries: usize,
}

impl Default for GeodaParams {
    fn default() -> Self {
        GeodaParams {
            probe_radius: 0.02,
            sub_iterations: 6,
            budget_ratio: 1.3,
            probe_budget_frac: 0.7,
            bs_tol: 1e-3,
            search_cap: 40.0,
            init_tries: 50,
        }
    }
}

/// Flip-signed mean of probe directions around a boundary point. Returns
/// `Ok(None)` when all probes land on one side (degenerate: the supposed
/// boundary point is not actually near the boundary).
pub fn geoda_estimate_normal<O: QueryOracle>(
    oracle: &mut O,
    boundary_point: &ImageTensor,
    c0: usize,
    probe_radius: f64,
    probes: usize,
    rng: &mut SeededRng,
) -> Result<Option<Vec<f64>>, EstimError> {
    if probe_radius <= 0.0 || probes == 0 {
        return Err(EstimError::InvalidParameter(
            "probe radius and probe count must be positive".into(),
        ));
    }
    let d = boundary_point.dim();
    let mut sum = vec![0.0; d];
    let mut flips = 0usize;
    for _ in 0..probes {
        let u = rng.unit_sphere(d);
        let probe = boundary_point.add_scaled(&u, probe_radius);
        let sign = if oracle.decision_query(&probe)? != c0 {
            flips += 1;
            1.0
        } else {
            -1.0
        };
        for (s, &ui) in sum.iter_mut().zip(&u) {
            *s += sign * ui;
        }
    }
    if flips == 0 || flips == probes {
        return Ok(None);
    }
    Ok(normalized(&sum))
}

/// Per-sub-iteration probe counts: proportional to ratio^j, summing to the
/// probe budget, each at least one.
pub fn probe_schedule(total: usize, sub_iterations: usize, ratio: f64) -> Vec<usize> {
    let n = sub_iterations.max(1);
    let weights: Vec<f64> = (0..n).map(|j| ratio.powi(j as i32)).collect();
    let weight_sum: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| ((w / weight_sum) * total as f64).floor().max(1.0) as usize)
        .collect()
}

pub fn geoda_attack<O: QueryOracle>(
    oracle: &mut O,
    referee: &mut Referee,
    x0: &ImageTensor,
    c0: usize,
    budget: &AttackBudget,
    params: &GeodaParams,
    rng: &mut SeededRng,
) -> Result<AttackTrace, AttackError> {
    if params.probe_radius <= 0.0 {
        return Err(AttackError::InvalidParameter(
            "geoda probe radius must be > 0".into(),
        ));
    }
    if params.sub_iterations == 0 {
        return Err(AttackError::InvalidParameter(
            "geoda needs at least one sub-iteration".into(),
        ));
    }

    let mut trace = TraceBuilder::new("geoda", c0, budget.epsilon);
    let init = match init_adversarial(oracle, x0, c0, rng, params.init_tries, params.bs_tol) {
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

    let mut current = init.point;
    let mut current_label = init.observed_label;
    let l2 = current.l2_distance(x0);
    let verdict = referee.judge(x0, c0, &current);
    if trace.accept(
        oracle.queries_used(),
        l2,
        StepValue::Label(current_label),
        &verdict,
    ) {
        return Ok(trace.finish(Termination::Success, oracle.queries_used(), &current, l2));
    }

    let probe_total =
        ((oracle.queries_remaining() as f64) * params.probe_budget_frac).floor() as usize;
    let schedule = probe_schedule(probe_total, params.sub_iterations, params.budget_ratio);

    'outer: for &probes in &schedule {
        // locate a boundary point between the clean point and the candidate
        let boundary = match binary_search_to_boundary(
            oracle,
            x0,
            c0,
            &current,
            current_label,
            params.bs_tol,
        ) {
            Ok(b) => b,
            Err(_) => break 'outer,
        };

        // estimate the normal; on a degenerate probe set re-run the search
        // from the tightened point once before giving up this sub-iteration
        let mut boundary = boundary;
        let mut normal = None;
        for _ in 0..2 {
            match geoda_estimate_normal(
                oracle,
                &boundary.point,
                c0,
                params.probe_radius,
                probes,
                rng,
            ) {
                Ok(Some(n)) => {
                    normal = Some(n);
                    break;
                }
                Ok(None) => {
                    boundary = match binary_search_to_boundary(
                        oracle,
                        x0,
                        c0,
                        &boundary.point,
                        boundary.outside_label,
                        params.bs_tol,
                    ) {
                        Ok(b) => b,
                        Err(_) => break 'outer,
                    };
                }
                Err(EstimError::BudgetExceeded) => break 'outer,
                Err(_) => break,
            }
        }
        let normal = match normal {
            Some(n) => n,
            None => {
                current = boundary.point;
                current_label = boundary.outside_label;
                continue;
            }
        };

        // step the clean point to the boundary along the estimated normal
        let margin = match boundary_distance_along(
            oracle,
            x0,
            c0,
            &normal,
            boundary.distance_from_inside.max(params.bs_tol),
            params.search_cap,
            params.bs_tol,
        ) {
            Ok(m) => m,
            Err(EstimError::BudgetExceeded) => break 'outer,
            Err(_) => f64::INFINITY,
        };
        if !margin.is_finite() {
            continue;
        }
        current = x0.add_scaled(&normal, margin).clip01();

        let label = match oracle.decision_query(&current) {
            Ok(l) => l,
            Err(_) => break 'outer,
        };
        if label == c0 {
            // landed on the clean side after clipping; keep the boundary point
            current = boundary.point;
            current_label = boundary.outside_label;
            continue;
        }
        current_label = label;

        let l2 = current.l2_distance(x0);
        let verdict = referee.judge(x0, c0, &current);
        if trace.accept(
            oracle.queries_used(),
            l2,
            StepValue::Label(current_label),
            &verdict,
        ) {
            return Ok(trace.finish(Termination::Success, oracle.queries_used(), &current, l2));
        }
    }

    let l2 = current.l2_distance(x0);
    Ok(trace.finish(
        Termination::BudgetExhausted,
        oracle.queries_used(),
        &current,
        l2,
    ))
}
