//! Gradient-free estimation and boundary-geometry primitives shared by the
//! optimization-based attacks.

use thiserror::Error;

use crate::loss::{adversary_loss, LossForm};
use crate::oracle::{OracleError, QueryOracle};
use crate::rng::SeededRng;
use crate::tensor::{l2_norm, normalized, ImageTensor};

#[derive(Debug, Error)]
pub enum EstimError {
    #[error("query budget exhausted mid-estimate")]
    BudgetExceeded,
    #[error("bracket endpoints carry equal observed labels")]
    BracketError,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("oracle error: {0}")]
    Oracle(OracleError),
}

impl From<OracleError> for EstimError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExceeded => EstimError::BudgetExceeded,
            other => EstimError::Oracle(other),
        }
    }
}

/// Configuration of the random gradient-free estimator.
///
/// `samples` probe directions are drawn from N(0, probe_sigma^2 I); each is
/// evaluated at distance `smoothing` from the current point. The probe
/// deviation is deliberately a separate parameter from any defense noise so
/// attacker probes never couple to the defense.
#[derive(Debug, Clone)]
pub struct RgfConfig {
    pub samples: usize,
    pub smoothing: f64,
    pub probe_sigma: f64,
}

impl Default for RgfConfig {
    fn default() -> Self {
        RgfConfig {
            samples: 50,
            smoothing: 0.01,
            probe_sigma: 1.0,
        }
    }
}

impl RgfConfig {
    pub fn validate(&self) -> Result<(), EstimError> {
        if self.samples < 1 {
            return Err(EstimError::InvalidParameter("samples must be >= 1".into()));
        }
        if self.smoothing <= 0.0 {
            return Err(EstimError::InvalidParameter(
                "smoothing radius must be > 0".into(),
            ));
        }
        if self.probe_sigma <= 0.0 {
            return Err(EstimError::InvalidParameter(
                "probe sigma must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Random gradient-free estimate of the loss gradient at `x`:
///
/// `g = (1/B) sum_i [l(x + beta u_i) - l(x)] / beta * u_i`
///
/// The base loss is queried once and reused across all samples, so the
/// estimate consumes exactly `samples + 1` score queries. Under a randomized
/// defense that single base evaluation is itself noisy; that is the behavior
/// under study and is intentionally not compensated for.
pub fn rgf_estimate<O: QueryOracle>(
    oracle: &mut O,
    x: &ImageTensor,
    form: &LossForm,
    cfg: &RgfConfig,
    rng: &mut SeededRng,
) -> Result<Vec<f64>, EstimError> {
    cfg.validate()?;
    let d = x.dim();
    let base = adversary_loss(&oracle.score_query(x)?, form);
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.samples {
        let u: Vec<f64> = (0..d)
            .map(|_| cfg.probe_sigma * rng.next_gaussian())
            .collect();
        let probe = x.add_scaled(&u, cfg.smoothing);
        let loss = adversary_loss(&oracle.score_query(&probe)?, form);
        let coeff = (loss - base) / cfg.smoothing;
        for (g, &ui) in grad.iter_mut().zip(&u) {
            *g += coeff * ui;
        }
    }
    let b = cfg.samples as f64;
    for g in grad.iter_mut() {
        *g /= b;
    }
    Ok(grad)
}

/// A located crossing of the decision boundary.
///
/// `point` is the adversarial-side endpoint of the final bracket, so it was
/// observed misclassified at evaluation time. `distance_from_inside` is its
/// distance from the inside endpoint passed at entry.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub point: ImageTensor,
    pub distance_from_inside: f64,
    pub inside_label: usize,
    pub outside_label: usize,
}

/// Bisects the segment between two points whose observed labels differ until
/// the bracket length is at most `tol` times the original segment length.
///
/// The endpoint labels are the ones the caller observed when it queried the
/// endpoints; they are not re-verified here, so the search consumes exactly
/// `ceil(log2(1/tol))` decision queries.
pub fn binary_search_to_boundary<O: QueryOracle>(
    oracle: &mut O,
    inside: &ImageTensor,
    inside_label: usize,
    outside: &ImageTensor,
    outside_label: usize,
    tol: f64,
) -> Result<BoundaryPoint, EstimError> {
    if inside_label == outside_label {
        return Err(EstimError::BracketError);
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(EstimError::InvalidParameter(format!(
            "tol must lie in (0, 1), got {tol}"
        )));
    }
    let entry_inside = inside.clone();
    let mut lo = inside.clone();
    let mut hi = outside.clone();
    let mut hi_label = outside_label;
    let mut frac = 1.0_f64;
    while frac > tol {
        let mid = midpoint(&lo, &hi);
        let label = oracle.decision_query(&mid)?;
        if label == inside_label {
            lo = mid;
        } else {
            hi = mid;
            hi_label = label;
        }
        frac *= 0.5;
    }
    let distance_from_inside = hi.l2_distance(&entry_inside);
    Ok(BoundaryPoint {
        point: hi,
        distance_from_inside,
        inside_label,
        outside_label: hi_label,
    })
}

fn midpoint(a: &ImageTensor, b: &ImageTensor) -> ImageTensor {
    let data: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    ImageTensor::new(a.shape(), data).unwrap()
}

/// Distance from `x0` along direction `theta` to the first observed label
/// change: exponential stepping from `init_step` until a flip, then bisection
/// until the bracket is within `tol_rel` of the returned radius. Returns
/// `f64::INFINITY` when no flip is observed within `search_cap`.
pub fn boundary_distance_along<O: QueryOracle>(
    oracle: &mut O,
    x0: &ImageTensor,
    c0: usize,
    theta: &[f64],
    init_step: f64,
    search_cap: f64,
    tol_rel: f64,
) -> Result<f64, EstimError> {
    let dir = normalized(theta)
        .ok_or_else(|| EstimError::InvalidParameter("direction must be nonzero".into()))?;
    if init_step <= 0.0 || search_cap <= 0.0 || tol_rel <= 0.0 {
        return Err(EstimError::InvalidParameter(
            "init_step, search_cap and tol_rel must be > 0".into(),
        ));
    }

    let mut lambda = init_step.min(search_cap);
    let mut lo = 0.0_f64;
    let hi;
    loop {
        let probe = x0.add_scaled(&dir, lambda);
        if oracle.decision_query(&probe)? != c0 {
            hi = lambda;
            break;
        }
        lo = lambda;
        if lambda >= search_cap {
            return Ok(f64::INFINITY);
        }
        lambda = (lambda * 2.0).min(search_cap);
    }

    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol_rel * hi {
        let mid = 0.5 * (lo + hi);
        let probe = x0.add_scaled(&dir, mid);
        if oracle.decision_query(&probe)? == c0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Convenience: norm of the difference vector between two tensors.
pub fn perturbation_norm(x: &ImageTensor, x0: &ImageTensor) -> f64 {
    l2_norm(&x.sub(x0))
}
