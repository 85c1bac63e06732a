//! Structure-agnostic adaptation: enumerate candidate transport structures,
//! fit each on target training data plus the sources, keep the best on
//! held-out target data.

mod hypothesis;
mod select;

pub use hypothesis::{
    bell_number, diagram_count, enumerate_diagrams, enumerate_structures, hypothesis_count, module_tr_hypotheses,
    parent_choices, restricted_growth_strings, HypothesisCount, SearchConfig, StructureHypothesis,
};
pub use select::{
    circuit_ad, fast_regime_start, holdout_split, regime_report, select_among, simple_ad, target_columns, CandidateScore,
    Regime, RegimeReport, SelectionResult, SimpleAdResult,
};
