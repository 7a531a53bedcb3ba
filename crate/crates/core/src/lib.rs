//! Simulation framework for query-based black-box adversarial attacks
//! against classifiers protected by inference-time input-noise defenses.
//!
//! The crate provides deterministic numeric primitives, analytically
//! tractable toy classifiers plus a small trainable MLP, a defended query
//! oracle with an exact ledger, gradient-free estimation primitives, a
//! suite of score- and decision-based attacks, an expectation-based
//! adaptive attacker, and the diagnostic statistics used to evaluate all
//! of it. Everything is seeded: identical seeds reproduce identical runs
//! bit for bit.

pub mod adaptive;
pub mod analysis;
pub mod attacks;
pub mod dataset;
pub mod dct;
pub mod estim;
pub mod loss;
pub mod models;
pub mod oracle;
pub mod rng;
pub mod tensor;

pub use loss::{adversary_loss, argmax_label, LossForm};
pub use oracle::{DefenseSpec, Oracle, OracleError, QueryOracle};
pub use rng::SeededRng;
pub use tensor::{ImageTensor, Shape};
