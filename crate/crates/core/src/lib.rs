//! Cost-aware auditing of equalized odds under partial feedback.
//!
//! The auditor sees `(A, f(X, A))` for every individual for free, sees `X`
//! and `Y` of positively classified individuals for free, and must pay to
//! look at the features or labels of negatively classified ones.

pub mod blackbox;
pub mod env;
pub mod error;
pub mod family;
pub mod instance;
pub mod mixture;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use error::{AuditError, Result};
pub use rng::RngStream;
