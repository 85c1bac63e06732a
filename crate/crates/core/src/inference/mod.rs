//! Tabular estimation, exact composition of conditional tables and risk
//! evaluation.

mod circuit;
mod cpt;
mod evidence;
mod factor;
mod risk;

pub use circuit::{
    variable_eliminate, CircuitNode, CircuitPredictor, CompiledPredictor, EliminationPlan, DEFAULT_MAX_WIDTH,
};
pub use cpt::{argmax, fit_cpt, pool_rows, Counts, Cpt, RowSet, DEFAULT_ALPHA};
pub use evidence::Evidence;
pub use factor::{eliminate, Factor, Reduce};
pub use risk::{
    monte_carlo_risk, nll_risk, query_truth, true_risk, true_risk_from_joint, MonteCarloRisk, Predictor, QueryTruth,
    RiskReport,
};
