//! Shared initialization for decision-based attacks: find any observed
//! misclassified image, then tighten it toward the clean point with one
//! binary search.

use thiserror::Error;

use crate::estim::{binary_search_to_boundary, EstimError};
use crate::oracle::{OracleError, QueryOracle};
use crate::rng::SeededRng;
use crate::tensor::ImageTensor;

#[derive(Debug, Error)]
pub enum InitError {
    #[error("no misclassified sample found within {0} tries")]
    NoAdversarialFound(usize),
    #[error("query budget exhausted during initialization")]
    BudgetExceeded,
    #[error("oracle error during initialization: {0}")]
    Oracle(OracleError),
}

impl From<OracleError> for InitError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExceeded => InitError::BudgetExceeded,
            other => InitError::Oracle(other),
        }
    }
}

impl From<EstimError> for InitError {
    fn from(e: EstimError) -> Self {
        match e {
            EstimError::BudgetExceeded => InitError::BudgetExceeded,
            EstimError::Oracle(o) => InitError::Oracle(o),
            // bracket/parameter failures cannot occur for the fixed call below
            other => InitError::Oracle(OracleError::InvalidParameter(other.to_string())),
        }
    }
}

/// An initial adversarial point with the label observed for it.
#[derive(Debug, Clone)]
pub struct InitPoint {
    pub point: ImageTensor,
    pub observed_label: usize,
    pub distance: f64,
}

/// Queries `x0` first and returns it when already observed misclassified;
/// otherwise samples uniform images in [0,1]^d until one is observed
/// misclassified (at most `max_tries` draws) and tightens it toward `x0`
/// with one binary search at tolerance `bs_tol`.
pub fn init_adversarial<O: QueryOracle>(
    oracle: &mut O,
    x0: &ImageTensor,
    c0: usize,
    rng: &mut SeededRng,
    max_tries: usize,
    bs_tol: f64,
) -> Result<InitPoint, InitError> {
    if max_tries == 0 {
        return Err(InitError::NoAdversarialFound(0));
    }
    let observed0 = oracle.decision_query(x0)?;
    if observed0 != c0 {
        return Ok(InitPoint {
            point: x0.clone(),
            observed_label: observed0,
            distance: 0.0,
        });
    }

    let shape = x0.shape();
    for _ in 0..max_tries {
        let candidate = ImageTensor::new(
            shape,
            (0..shape.dim()).map(|_| rng.next_f64()).collect(),
        )
        .unwrap();
        let label = oracle.decision_query(&candidate)?;
        if label != c0 {
            let boundary =
                binary_search_to_boundary(oracle, x0, observed0, &candidate, label, bs_tol)?;
            return Ok(InitPoint {
                distance: boundary.distance_from_inside,
                observed_label: boundary.outside_label,
                point: boundary.point,
            });
        }
    }
    Err(InitError::NoAdversarialFound(max_tries))
}
