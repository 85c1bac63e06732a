//! Exact tabular two-stage adaptation: penalised pretraining on sources,
//! then fine-tuning of target structure, target-only fallbacks and transport
//! indicators on three target splits.

mod finetune;
mod pretrain;

pub use finetune::{
    assemble_final_predictor, finetune_target_structure, fit_target_only_fallbacks, learn_transport_indicators,
    optimal_mixture, Fallback, FinetuneResult, TargetStructure,
};
pub use pretrain::{exhaustive_pretrain, parent_sets, pretrain_tabular, PretrainConfig, PretrainResult};

use serde::{Deserialize, Serialize};

use crate::error::{CtlabError, Result};
use crate::inference::{fit_cpt, pool_rows, CircuitPredictor, Cpt, Evidence, RowSet, DEFAULT_ALPHA, DEFAULT_MAX_WIDTH};
use crate::scm::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub pretrain: PretrainConfig,
    pub finetune_max_parents: usize,
    /// Recency window of the target-only fallbacks.
    pub fallback_arity: usize,
    /// Smoothing of the target-only fallbacks.
    pub alpha: f64,
    pub prefix_len: usize,
    pub split_seed: u64,
    pub max_width: usize,
}

impl TwoStageConfig {
    pub fn new(prefix_len: usize) -> Self {
        Self {
            pretrain: PretrainConfig::default(),
            finetune_max_parents: 2,
            fallback_arity: 2,
            alpha: DEFAULT_ALPHA,
            prefix_len,
            split_seed: 0,
            max_width: DEFAULT_MAX_WIDTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub pretrain: PretrainResult,
    pub finetune: FinetuneResult,
    pub predictor: CircuitPredictor,
}

/// Pretrains on `sources` and adapts to `target`.
pub fn two_stage(sources: &[Evidence], target: &Dataset, vocab: usize, config: &TwoStageConfig) -> Result<TwoStageResult> {
    let pre = pretrain_tabular(sources, vocab, config.pretrain)?;
    adapt(pre, target, vocab, config)
}

/// Fine-tuning stage on a three-way split `(train, fine-tune, test)` of the
/// target rows.
pub fn adapt(pre: PretrainResult, target: &Dataset, vocab: usize, config: &TwoStageConfig) -> Result<TwoStageResult> {
    if config.prefix_len >= target.n_vars() {
        return Err(CtlabError::InvalidConfig("prefix must leave a query position".into()));
    }
    let parts = target.split(3, config.split_seed);
    let (tr, ft, te) = (&parts[0], &parts[1], &parts[2]);
    let structure = finetune_target_structure(&pre, ft, config.finetune_max_parents)?;
    let fallbacks = fit_target_only_fallbacks(tr, config.fallback_arity, vocab, config.alpha)?;
    let candidates: Vec<(Vec<usize>, &Cpt)> = (0..target.n_vars())
        .map(|i| (structure.parents.parents(i).to_vec(), &pre.psi[structure.phi[i]]))
        .collect();
    let s = learn_transport_indicators(&candidates, &fallbacks, te)?;
    let finetune = FinetuneResult { structure, fallbacks, s };
    let predictor = assemble_final_predictor(&pre, &finetune, config.prefix_len, vocab, config.max_width)?;
    Ok(TwoStageResult { pretrain: pre, finetune, predictor })
}

/// Query rows `(v_last; v_0..v_{prefix_len})` of a dataset.
fn query_rows(d: &Dataset, prefix_len: usize) -> Result<RowSet> {
    let prefix: Vec<usize> = (0..prefix_len).collect();
    RowSet::from_dataset(d, d.n_vars() - 1, &prefix)
}

/// Tabular ERM of the query on all rows pooled as one domain.
pub fn erm_pool(sources: &[Dataset], target: &Dataset, prefix_len: usize, vocab: usize, alpha: f64) -> Result<Cpt> {
    let prefix: Vec<usize> = (0..prefix_len).collect();
    let mut maps: Vec<(&Dataset, usize, &[usize])> = sources.iter().map(|d| (d, d.n_vars() - 1, &prefix[..])).collect();
    maps.push((target, target.n_vars() - 1, &prefix));
    fit_cpt(&pool_rows(&maps)?, vocab, alpha)
}

/// Tabular ERM with the domain as an extra input, evaluated on the target:
/// the table of the target rows alone.
pub fn erm_joint(target: &Dataset, prefix_len: usize, vocab: usize, alpha: f64) -> Result<Cpt> {
    fit_cpt(&query_rows(target, prefix_len)?, vocab, alpha)
}
