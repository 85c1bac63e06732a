//! Discrete SCMs: operators, models, sampling, exact enumeration, the
//! discrepancy oracle and named fixtures.

mod domains;
pub mod fixtures;
pub mod io;
mod joint;
mod model;
mod operator;
mod sample;

pub use domains::{DiscrepancyOracle, DomainCollection, Slot};
pub use joint::{
    exact_conditional, exact_joint, joint_budget, validate_positivity, JointTable, PositivityReport,
    DEFAULT_JOINT_BUDGET,
};
pub(crate) use joint::table_size;
pub use model::{CausalDiagram, ExogenousVar, Mechanism, Scm, Variable};
pub(crate) use model::{decode_into, encode};
pub use operator::{NoisyOperator, OpKind};
pub use sample::{sample_dataset, Dataset, DomainId};
