//! HSJA-style boundary attack: binary search to the boundary, a
//! flip-signed estimate of the boundary normal, and a geometric step whose
//! size shrinks as the iteration count grows.

use crate::attacks::init::{init_adversarial, InitError};
use crate::attacks::{
    AttackBudget, AttackError, AttackTrace, Referee, StepValue, Termination, TraceBuilder,
};
use crate::estim::{binary_search_to_boundary, EstimError};
use crate::oracle::QueryOracle;
use crate::rng::SeededRng;
use crate::tensor::{normalized, ImageTensor};

#[derive(Debug, Clone)]
pub struct HsjaParams {
    /// Initial probe count; iteration t uses ceil(b0 * sqrt(t)).
    pub b0: usize,
    /// Binary-search tolerance; also sets the probe radius via
    /// `probe_radius = bs_tol * sqrt(d) * ||delta||`.
    pub bs_tol: f64,
    /// Maximum halvings of the geometric step before giving up an iteration.
    pub max_step_halvings: usize,
    pub init_tries: usize,
}

impl Default for HsjaParams {
    fn default() -> Self {
        HsjaParams {
            b0: 30,
            bs_tol: 0.002,
            max_step_halvings: 60,
            init_tries: 50,
        }
    }
}

/// Flip-signed, mean-centered estimate of the boundary normal at a boundary
/// point. Probes are uniform on the sphere of the given radius; each votes
/// +1 when the observed label differs from `c0`. With the baseline control
/// variate removed the estimate points toward the adversarial side.
pub fn hsja_estimate_normal<O: QueryOracle>(
    oracle: &mut O,
    boundary_point: &ImageTensor,
    c0: usize,
    probe_radius: f64,
    probes: usize,
    rng: &mut SeededRng,
) -> Result<Option<Vec<f64>>, EstimError> {
    if probe_radius <= 0.0 {
        return Err(EstimError::InvalidParameter(
            "probe radius must be > 0".into(),
        ));
    }
    if probes == 0 {
        return Err(EstimError::InvalidParameter("probes must be >= 1".into()));
    }
    let d = boundary_point.dim();
    let mut dirs = Vec::with_capacity(probes);
    let mut signs = Vec::with_capacity(probes);
    for _ in 0..probes {
        let u = rng.unit_sphere(d);
        let probe = boundary_point.add_scaled(&u, probe_radius);
        let label = oracle.decision_query(&probe)?;
        signs.push(if label != c0 { 1.0 } else { -1.0 });
        dirs.push(u);
    }
    let mean_sign: f64 = signs.iter().sum::<f64>() / probes as f64;
    let mut normal = vec![0.0; d];
    if mean_sign.abs() >= 1.0 {
        // every probe landed on one side; fall back to the raw signed mean
        for (u, &s) in dirs.iter().zip(&signs) {
            for (n, &ui) in normal.iter_mut().zip(u) {
                *n += s * ui;
            }
        }
    } else {
        for (u, &s) in dirs.iter().zip(&signs) {
            let w = s - mean_sign;
            for (n, &ui) in normal.iter_mut().zip(u) {
                *n += w * ui;
            }
        }
    }
    Ok(normalized(&normal))
}

pub fn hsja_attack<O: QueryOracle>(
    oracle: &mut O,
    referee: &mut Referee,
    x0: &ImageTensor,
    c0: usize,
    budget: &AttackBudget,
    params: &HsjaParams,
    rng: &mut SeededRng,
) -> Result<AttackTrace, AttackError> {
    if params.bs_tol <= 0.0 {
        return Err(AttackError::InvalidParameter(
            "hsja probe radius would be zero: bs_tol must be > 0".into(),
        ));
    }
    if params.b0 == 0 {
        return Err(AttackError::InvalidParameter("b0 must be >= 1".into()));
    }

    let mut trace = TraceBuilder::new("hsja", c0, budget.epsilon);
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
    let verdict = referee.judge(x0, c0, &current);
    let l2 = current.l2_distance(x0);
    if trace.accept(
        oracle.queries_used(),
        l2,
        StepValue::Label(current_label),
        &verdict,
    ) {
        return Ok(trace.finish(Termination::Success, oracle.queries_used(), &current, l2));
    }

    let d = x0.dim();
    let mut t: u64 = 0;
    'outer: loop {
        t += 1;
        // (1) project the candidate onto the boundary
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
        let dist = boundary.distance_from_inside;

        // (2) estimate the boundary normal
        let probes = ((params.b0 as f64) * (t as f64).sqrt()).ceil() as usize;
        let probe_radius = (params.bs_tol * (d as f64).sqrt() * dist).max(1e-9);
        let normal = match hsja_estimate_normal(
            oracle,
            &boundary.point,
            c0,
            probe_radius,
            probes,
            rng,
        ) {
            Ok(Some(n)) => n,
            Ok(None) => {
                current = boundary.point;
                current_label = boundary.outside_label;
                continue;
            }
            Err(_) => break 'outer,
        };

        // (3) geometric step, halved until the stepped point is observed
        // misclassified; the halving cap only guards against a pathological
        // oracle, since the step shrinks onto the adversarial-side boundary
        // point itself
        let mut step = dist / (t as f64).sqrt();
        let mut accepted = None;
        for _ in 0..params.max_step_halvings {
            let candidate = boundary.point.add_scaled(&normal, step).clip01();
            match oracle.decision_query(&candidate) {
                Ok(label) if label != c0 => {
                    accepted = Some((candidate, label));
                    break;
                }
                Ok(_) => step *= 0.5,
                Err(_) => break 'outer,
            }
        }
        let (next, next_label) = accepted.unwrap_or((boundary.point, boundary.outside_label));
        current = next;
        current_label = next_label;

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
