//! Held-out selection among transport hypotheses.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hypothesis::{enumerate_structures, StructureHypothesis};
use crate::error::{CtlabError, Result};
use crate::inference::{nll_risk, Counts, Cpt, Evidence, RowSet};
use crate::scm::{Dataset, DomainId};
use crate::transport::{circuit_tr, TransportOptions, TransportResult};

/// Shuffles with `seed` and keeps `round(fraction * n)` rows (at least one
/// on each side) for training.
pub fn holdout_split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.len();
    if n < 2 {
        return Err(CtlabError::EmptyInput(format!("{n} target rows cannot be split")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    Ok((data.subset(&idx[..cut]), data.subset(&idx[cut..])))
}

/// Data columns playing the `target_len` hypothesised positions: the prefix
/// keeps its columns, the remaining positions take the last columns so the
/// query is always the final column.
pub fn target_columns(n_cols: usize, target_len: usize, prefix_len: usize) -> Result<Vec<usize>> {
    if target_len > n_cols || prefix_len >= target_len {
        return Err(CtlabError::InvalidConfig(format!(
            "target size {target_len} with prefix {prefix_len} over {n_cols} columns"
        )));
    }
    let tail = target_len - prefix_len;
    Ok((0..prefix_len).chain(n_cols - tail..n_cols).collect())
}

/// Index of the smallest score, ties to the smallest key.
fn argmin_by_key<K: Ord>(scores: &[f64], keys: &[K]) -> Option<usize> {
    (0..scores.len()).filter(|&i| !scores[i].is_nan()).min_by(|&a, &b| {
        scores[a].partial_cmp(&scores[b]).expect("not NaN").then_with(|| keys[a].cmp(&keys[b]))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleAdResult {
    /// Sources pooled by the chosen predictor.
    pub chosen: Vec<usize>,
    pub predictor: Cpt,
    /// Held-out NLL per subset, subsets in lexicographic order.
    pub scores: Vec<(Vec<usize>, f64)>,
    pub count: usize,
}

/// Fits `y | xs` on the target training half pooled with every subset of
/// the sources and keeps the best on the held-out half.
pub fn simple_ad(
    sources: &[Dataset],
    target: &Dataset,
    y: usize,
    xs: &[usize],
    vocab: usize,
    alpha: f64,
    split_seed: u64,
) -> Result<SimpleAdResult> {
    let k = sources.len();
    if k == 0 {
        return Err(CtlabError::EmptyInput("simple-AD needs a source".into()));
    }
    if k > 20 {
        return Err(CtlabError::BudgetExceeded(format!("2^{k} source subsets")));
    }
    let (train, test) = holdout_split(target, 0.5, split_seed)?;
    let rows = RowSet::from_dataset(&test, y, xs)?;
    let base = Evidence::Samples(&train).counts(y, xs, vocab)?;
    let per_source = sources.iter().map(|d| Evidence::Samples(d).counts(y, xs, vocab)).collect::<Result<Vec<Counts>>>()?;
    let mut subsets: Vec<Vec<usize>> =
        (0..1usize << k).map(|mask| (0..k).filter(|j| mask >> j & 1 == 1).collect()).collect();
    subsets.sort();
    let fitted = subsets
        .par_iter()
        .map(|s| {
            let mut c = base.clone();
            for &j in s {
                c.merge(&per_source[j])?;
            }
            let cpt = Cpt::from_counts(&c, alpha);
            let nll = nll_risk(&cpt, &rows)?;
            Ok((cpt, nll))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = fitted.iter().map(|f| f.1).collect();
    let best = argmin_by_key(&scores, &subsets).ok_or_else(|| CtlabError::EmptyInput("no scored subset".into()))?;
    Ok(SimpleAdResult {
        chosen: subsets[best].clone(),
        predictor: fitted[best].0.clone(),
        scores: subsets.into_iter().zip(scores).collect(),
        count: 1 << k,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub encoding: Vec<usize>,
    pub nll: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: usize,
    pub hypothesis: StructureHypothesis,
    pub transport: TransportResult,
    /// Held-out NLL per candidate, in stream order; invalid candidates
    /// (classes mixing parent counts) score `+inf`.
    pub scores: Vec<CandidateScore>,
    pub count: usize,
    pub log_count: f64,
}

impl SelectionResult {
    pub fn chosen_nll(&self) -> f64 {
        self.scores[self.chosen].nll
    }

    pub fn excess_bound(&self, n: usize) -> f64 {
        (self.log_count / n as f64).sqrt()
    }
}

/// Trains every candidate of the stream on the target training split plus
/// all sources, scores it on the held-out split and returns the argmin.
pub fn circuit_ad(
    sources: &[Dataset],
    target: &Dataset,
    config: &super::hypothesis::SearchConfig,
    vocab: usize,
) -> Result<SelectionResult> {
    let lengths: Vec<usize> = sources.iter().map(Dataset::n_vars).collect();
    let candidates = enumerate_structures(config, &lengths)?;
    select_among(sources, target, config, vocab, candidates)
}

/// [`circuit_ad`] over an explicit stream, used as given.
pub fn select_among(
    sources: &[Dataset],
    target: &Dataset,
    config: &super::hypothesis::SearchConfig,
    vocab: usize,
    candidates: Vec<StructureHypothesis>,
) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(CtlabError::EmptyInput("empty candidate stream".into()));
    }
    let (train, test) = holdout_split(target, config.split_fraction, config.split_seed)?;
    let cols = target_columns(target.n_vars(), config.target_len, config.prefix_len)?;
    let train = train.project(&cols)?;
    let prefix: Vec<usize> = (0..config.prefix_len).collect();
    let rows = RowSet::from_dataset(&test, target.n_vars() - 1, &prefix)?;
    let mut evidence: BTreeMap<DomainId, Evidence> =
        sources.iter().enumerate().map(|(j, d)| (DomainId::Source(j), Evidence::Samples(d))).collect();
    evidence.insert(DomainId::Target, Evidence::Samples(&train));
    let opts = TransportOptions { alpha: config.alpha, max_width: config.max_width };
    let fit = |h: &StructureHypothesis| -> Result<Option<TransportResult>> {
        if !h.arity_consistent() {
            return Ok(None);
        }
        match circuit_tr(&evidence, &h.oracle(), &h.diagram_map(), config.prefix_len, vocab, opts) {
            Ok(r) => Ok(Some(r)),
            Err(CtlabError::DimensionMismatch(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let scores = candidates
        .par_iter()
        .map(|h| match fit(h)? {
            Some(r) => r.predictor.nll(&rows),
            None => Ok(f64::INFINITY),
        })
        .collect::<Result<Vec<f64>>>()?;
    let keys: Vec<Vec<usize>> = candidates.iter().map(StructureHypothesis::encoding).collect();
    let best = argmin_by_key(&scores, &keys).ok_or_else(|| CtlabError::EmptyInput("no scored candidate".into()))?;
    let transport = fit(&candidates[best])?.ok_or_else(|| CtlabError::Infeasible("every candidate mixes arities".into()))?;
    let count = candidates.len();
    Ok(SelectionResult {
        chosen: best,
        hypothesis: candidates[best].clone(),
        transport,
        scores: keys.into_iter().zip(scores).map(|(encoding, nll)| CandidateScore { encoding, nll }).collect(),
        count,
        log_count: (count as f64).ln(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Fast,
    Slow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub threshold: f64,
}

/// Fast adaptation when the transporting circuit has at most `(n/K)^(1/3)`
/// modules.
pub fn regime_report(circuit_size: usize, n: usize, k: usize) -> Result<RegimeReport> {
    if circuit_size == 0 || n == 0 || k == 0 {
        return Err(CtlabError::InvalidConfig("circuit size, n and K must be positive".into()));
    }
    let threshold = (n as f64 / k as f64).cbrt();
    let regime = if circuit_size as f64 <= threshold { Regime::Fast } else { Regime::Slow };
    Ok(RegimeReport { regime, threshold })
}

/// Smallest `n` (for `K` sources) at which a circuit of `size` modules is in
/// the fast regime.
pub fn fast_regime_start(circuit_size: usize, k: usize) -> usize {
    circuit_size.pow(3) * k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::hypothesis::SearchConfig;
    use crate::scm::fixtures::{build_example_a1, build_fig_e_pair};
    use crate::scm::{sample_dataset, CausalDiagram, NoisyOperator, OpKind, Scm};

    fn copy_pair() -> Scm {
        Scm::from_operators(
            2,
            vec![(vec![], NoisyOperator::new(OpKind::Unif, 0.0).unwrap()), (vec![0], NoisyOperator::new(OpKind::Copy, 0.2).unwrap())],
        )
        .unwrap()
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let d = sample_dataset(&copy_pair(), 11, 0, DomainId::Target);
        let (a, b) = holdout_split(&d, 0.5, 3).unwrap();
        assert_eq!((a.len(), b.len()), (6, 5));
        assert_eq!(holdout_split(&d, 0.5, 3).unwrap().0, a);
        assert!(holdout_split(&d.head(1), 0.5, 0).is_err());
    }

    #[test]
    fn column_mapping_keeps_prefix_and_tail() {
        assert_eq!(target_columns(10, 6, 5).unwrap(), vec![0, 1, 2, 3, 4, 9]);
        assert_eq!(target_columns(10, 10, 5).unwrap(), (0..10).collect::<Vec<_>>());
        assert!(target_columns(4, 6, 2).is_err());
    }

    #[test]
    fn simple_ad_pools_an_identical_source() {
        let scm = copy_pair();
        let wins = (0..3)
            .filter(|&s| {
                let src = sample_dataset(&scm, 5000, 100 + s, DomainId::Source(0));
                let tgt = sample_dataset(&scm, 40, s, DomainId::Target);
                simple_ad(&[src], &tgt, 1, &[0], 2, 0.1, s).unwrap().chosen == vec![0]
            })
            .count();
        assert!(wins >= 2);
    }

    #[test]
    fn simple_ad_rejects_an_unrelated_source() {
        let dc = build_example_a1();
        let src = sample_dataset(&dc.sources[0], 5000, 1, DomainId::Source(0));
        let tgt = sample_dataset(&dc.target, 500, 2, DomainId::Target);
        let r = simple_ad(&[src], &tgt, 1, &[0], 2, 0.1, 0).unwrap();
        assert!(r.chosen.is_empty());
        let none = r.scores.iter().find(|(s, _)| s.is_empty()).unwrap().1;
        assert!(r.scores.iter().all(|(_, v)| *v >= none));
    }

    #[test]
    fn circuit_ad_agrees_with_simple_ad_on_two_variables() {
        let dc = build_example_a1();
        let g = CausalDiagram::new(vec![vec![], vec![0]]).unwrap();
        let doms = vec![DomainId::Source(0), DomainId::Target];
        let pool = StructureHypothesis::new(doms.clone(), &[0, 1, 2, 1], vec![g.clone(), g.clone()]).unwrap();
        let apart = StructureHypothesis::new(doms, &[0, 1, 2, 3], vec![g.clone(), g]).unwrap();
        for (src_scm, seed) in [(&dc.sources[0], 0u64), (&dc.target, 1)] {
            let src = sample_dataset(src_scm, 3000, 10 + seed, DomainId::Source(0));
            let tgt = sample_dataset(&dc.target, 200, seed, DomainId::Target);
            let s = simple_ad(&[src.clone()], &tgt, 1, &[0], 2, 0.1, seed).unwrap();
            let mut c = SearchConfig::new(2, 1);
            c.split_seed = seed;
            let r = select_among(&[src], &tgt, &c, 2, vec![pool.clone(), apart.clone()]).unwrap();
            assert_eq!(r.hypothesis == pool, s.chosen == vec![0]);
            assert!((r.chosen_nll() - s.scores.iter().map(|x| x.1).fold(f64::INFINITY, f64::min)).abs() < 1e-12);
        }
    }

    #[test]
    fn only_no_transport_is_target_only_erm() {
        let dc = build_fig_e_pair(0.1).unwrap();
        let src = sample_dataset(&dc.sources[0], 200, 0, DomainId::Source(0));
        let tgt = sample_dataset(&dc.target, 40, 1, DomainId::Target);
        let mut c = SearchConfig::new(10, 5);
        c.candidates = vec![StructureHypothesis::no_transport(c.domains(1), &[10, 10])];
        let r = circuit_ad(&[src], &tgt, &c, 10).unwrap();
        assert_eq!(r.count, 1);
        assert_eq!(r.transport.n_transported(), 0);
        let (train, _) = holdout_split(&tgt, 0.5, 0).unwrap();
        let want = crate::inference::fit_cpt(&RowSet::from_dataset(&train, 9, &[]).unwrap(), 10, 0.1).unwrap();
        assert_eq!(r.transport.predictor.nodes().last().unwrap().cpt, want);
    }

    #[test]
    fn selection_ignores_stream_order() {
        let dc = build_fig_e_pair(0.1).unwrap();
        let src = sample_dataset(&dc.sources[0], 2000, 0, DomainId::Source(0));
        let tgt = sample_dataset(&dc.target, 60, 1, DomainId::Target);
        let hs = super::super::module_tr_hypotheses(&[dc.sources[0].diagram()], 5, 1);
        let mut c = SearchConfig::new(6, 5);
        c.max_parents = 1;
        let a = select_among(&[src.clone()], &tgt, &c, 10, hs.clone()).unwrap();
        let mut rev = hs;
        rev.reverse();
        let b = select_among(&[src], &tgt, &c, 10, rev).unwrap();
        assert_eq!(a.hypothesis, b.hypothesis);
        let min = a.scores.iter().map(|s| s.nll).fold(f64::INFINITY, f64::min);
        assert_eq!(a.chosen_nll(), min);
    }

    #[test]
    fn regimes() {
        assert_eq!(regime_report(1, 5, 5).unwrap().regime, Regime::Fast);
        assert!((regime_report(3, 7, 7).unwrap().threshold - 1.0).abs() < 1e-12);
        assert_eq!(regime_report(3, 26, 1).unwrap().regime, Regime::Slow);
        assert_eq!(regime_report(3, 27, 1).unwrap().regime, Regime::Fast);
        // GCD over |V| = 16: subtraction chain vs the mod-based chain
        let slow = fast_regime_start(3 * 16, 1);
        let fast = fast_regime_start(3 * 4, 1);
        assert!(fast < slow);
    }
}
