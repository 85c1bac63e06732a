//! Causal transportability laboratory.
//!
//! Discrete structural causal models over a shared token vocabulary, exact
//! and sampled evidence, circuit transport across domains, structure-agnostic
//! adaptation, a tabular two-stage learner, and partial-transport bounds for
//! confounded binary graphs.
//!
//! Positions are 0-based throughout the library. The CLI and file formats
//! name columns `v1..vT`.

pub mod adaptation;
pub mod bounds;
pub mod error;
pub mod inference;
pub mod scm;
pub mod transport;
pub mod twostage;

pub use error::{CtlabError, Result};
