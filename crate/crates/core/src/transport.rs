//! Structure-informed transport: pooling source evidence into target
//! mechanisms that are known to be shared.
//!
//! Three levels of structure are supported. [`simple_tr`] and [`module_tr`]
//! transport a single conditional `y | pa(y)` using coarse per-source
//! discrepancy sets; [`circuit_tr`] uses a full discrepancy oracle over
//! (domain, position) slots and composes one table per target position.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CtlabError, Result};
use crate::inference::{CircuitNode, CircuitPredictor, Counts, Cpt, Evidence, DEFAULT_ALPHA, DEFAULT_MAX_WIDTH};
use crate::scm::{CausalDiagram, DiscrepancyOracle, DomainId, Slot};

/// Per source `j`, the target positions whose mechanism may differ from
/// source `j`.
pub type DeltaSets = [BTreeSet<usize>];

/// A conditional as it appears in one domain: label position and ordered
/// parent positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundModule {
    pub label: usize,
    pub parents: Vec<usize>,
}

impl BoundModule {
    pub fn new(label: usize, parents: Vec<usize>) -> Self {
        Self { label, parents }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentLists {
    pub sources: Vec<BoundModule>,
    pub target: BoundModule,
}

impl ParentLists {
    /// Same binding in every domain.
    pub fn uniform(n_sources: usize, module: BoundModule) -> Self {
        Self { sources: vec![module.clone(); n_sources], target: module }
    }
}

/// Sources whose mechanism for `label` is shared with the target.
pub fn transport_set(delta: &DeltaSets, label: usize) -> Vec<usize> {
    (0..delta.len()).filter(|&j| !delta[j].contains(&label)).collect()
}

/// Pools every source outside the discrepancy set of `y` with the target and
/// fits `y | xs` on the union.
pub fn simple_tr(
    sources: &[Evidence],
    target: &Evidence,
    delta: &DeltaSets,
    y: usize,
    xs: &[usize],
    vocab: usize,
    alpha: f64,
) -> Result<Cpt> {
    let module = BoundModule::new(y, xs.to_vec());
    module_tr(sources, target, delta, &ParentLists::uniform(sources.len(), module), vocab, alpha)
}

/// Fits the target conditional on target rows plus the rows of every source
/// sharing its mechanism, each projected in that domain's own parent order.
/// The result takes arguments in target parent order.
pub fn module_tr(
    sources: &[Evidence],
    target: &Evidence,
    delta: &DeltaSets,
    parents: &ParentLists,
    vocab: usize,
    alpha: f64,
) -> Result<Cpt> {
    if delta.len() != sources.len() || parents.sources.len() != sources.len() {
        return Err(CtlabError::DimensionMismatch(format!(
            "{} sources, {} discrepancy sets, {} parent lists",
            sources.len(),
            delta.len(),
            parents.sources.len()
        )));
    }
    let c = parents.target.parents.len();
    let mut pooled = target.counts(parents.target.label, &parents.target.parents, vocab)?;
    for j in transport_set(delta, parents.target.label) {
        let m = &parents.sources[j];
        if m.parents.len() != c {
            return Err(CtlabError::DimensionMismatch(format!(
                "source {j} binds {} parents where the target binds {c}",
                m.parents.len()
            )));
        }
        pooled.merge(&sources[j].counts(m.label, &m.parents, vocab)?)?;
    }
    Ok(Cpt::from_counts(&pooled, alpha))
}

/// Counts pooled for one target position together with the slots they came
/// from.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledCounts {
    pub counts: Counts,
    pub slots: Vec<Slot>,
}

/// Pools `(v_i'; pa(i'))` over every slot sharing the mechanism of target
/// position `i`, the target slot itself always included. Domains without
/// evidence contribute nothing.
pub fn pooled_data_for_position(
    i: usize,
    evidence: &BTreeMap<DomainId, Evidence>,
    oracle: &DiscrepancyOracle,
    diagrams: &BTreeMap<DomainId, CausalDiagram>,
    vocab: usize,
) -> Result<PooledCounts> {
    let diagram = |d: DomainId| {
        diagrams.get(&d).ok_or_else(|| CtlabError::InvalidConfig(format!("no diagram for {d}")))
    };
    let target = diagram(DomainId::Target)?;
    if i >= target.len() {
        return Err(CtlabError::OutOfRange(format!("target position {i} of {}", target.len())));
    }
    let arity = target.parents(i).len();
    let mut slots = oracle.matching((DomainId::Target, i));
    if !slots.contains(&(DomainId::Target, i)) {
        slots.push((DomainId::Target, i));
    }
    slots.sort();
    let mut counts = Counts::new(arity, vocab);
    let mut used = Vec::new();
    for (d, k) in slots {
        let g = diagram(d)?;
        if k >= g.len() {
            return Err(CtlabError::OutOfRange(format!("slot ({d}, {k}) outside its diagram")));
        }
        let pa = g.parents(k);
        if pa.len() != arity {
            return Err(CtlabError::DimensionMismatch(format!(
                "slot ({d}, {k}) has {} parents but shares the mechanism of target position {i} with {arity}",
                pa.len()
            )));
        }
        let Some(ev) = evidence.get(&d) else { continue };
        counts.merge(&ev.counts(k, pa, vocab)?)?;
        used.push((d, k));
    }
    Ok(PooledCounts { counts, slots: used })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub alpha: f64,
    pub max_width: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, max_width: DEFAULT_MAX_WIDTH }
    }
}

/// Where the table of one target position came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionStatus {
    pub position: usize,
    pub class: Option<usize>,
    /// Slots pooled besides the target position itself.
    pub pooled: Vec<Slot>,
    pub transported: bool,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub predictor: CircuitPredictor,
    pub status: Vec<PositionStatus>,
}

impl TransportResult {
    pub fn n_transported(&self) -> usize {
        self.status.iter().filter(|s| s.transported).count()
    }
}

/// One pooled table per target position `prefix_len..T*`, composed into a
/// predictor of the last target position given the first `prefix_len`.
pub fn circuit_tr(
    evidence: &BTreeMap<DomainId, Evidence>,
    oracle: &DiscrepancyOracle,
    diagrams: &BTreeMap<DomainId, CausalDiagram>,
    prefix_len: usize,
    vocab: usize,
    opts: TransportOptions,
) -> Result<TransportResult> {
    let t = diagrams
        .get(&DomainId::Target)
        .ok_or_else(|| CtlabError::InvalidConfig("no target diagram".into()))?
        .len();
    if prefix_len >= t {
        return Err(CtlabError::OutOfRange(format!("prefix length {prefix_len} leaves no query in {t} positions")));
    }
    let fitted = (prefix_len..t)
        .into_par_iter()
        .map(|i| {
            let pooled = pooled_data_for_position(i, evidence, oracle, diagrams, vocab)?;
            let node = CircuitNode {
                position: i,
                parents: diagrams[&DomainId::Target].parents(i).to_vec(),
                cpt: Cpt::from_counts(&pooled.counts, opts.alpha),
            };
            let others: Vec<Slot> = pooled.slots.into_iter().filter(|&s| s != (DomainId::Target, i)).collect();
            let status = PositionStatus {
                position: i,
                class: oracle.class_of((DomainId::Target, i)),
                transported: others.iter().any(|(d, _)| *d != DomainId::Target),
                pooled: others,
                weight: pooled.counts.total(),
            };
            Ok((node, status))
        })
        .collect::<Result<Vec<_>>>()?;
    let (nodes, status): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let predictor = CircuitPredictor::new(vocab, prefix_len, nodes, opts.max_width)?;
    Ok(TransportResult { predictor, status })
}

/// Evidence and diagrams keyed by domain, the true diagrams taken from the
/// SCMs of a collection.
pub fn true_diagrams(domains: &crate::scm::DomainCollection) -> BTreeMap<DomainId, CausalDiagram> {
    domains.domain_ids().into_iter().map(|d| (d, domains.scm(d).diagram())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{fit_cpt, true_risk, QueryTruth, RowSet};
    use crate::scm::fixtures::{build_example_2_1, build_example_a1, build_fig_e_pair, build_gcd_collection};
    use crate::scm::{exact_joint, sample_dataset};

    fn ex21_parents() -> ParentLists {
        ParentLists { sources: vec![BoundModule::new(3, vec![0, 1])], target: BoundModule::new(3, vec![2, 1]) }
    }

    #[test]
    fn empty_transport_set_is_target_only() {
        let dc = build_example_a1();
        let src = sample_dataset(&dc.sources[0], 300, 1, DomainId::Source(0));
        let tgt = sample_dataset(&dc.target, 40, 2, DomainId::Target);
        let delta = vec![BTreeSet::from([1])];
        assert!(transport_set(&delta, 1).is_empty());
        let got = simple_tr(&[Evidence::Samples(&src)], &Evidence::Samples(&tgt), &delta, 1, &[0], 2, 0.1).unwrap();
        let want = fit_cpt(&RowSet::from_dataset(&tgt, 1, &[0]).unwrap(), 2, 0.1).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn example_2_1_exact_limit_is_the_subtraction_table() {
        let dc = build_example_2_1();
        let empty = crate::scm::Dataset::empty(DomainId::Target, 4);
        let cpt = module_tr(
            &[Evidence::exact(&dc.sources[0])],
            &Evidence::Samples(&empty),
            &[BTreeSet::new()],
            &ex21_parents(),
            10,
            0.0,
        )
        .unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let want = (a + 10 - b) % 10;
                for y in 0..10 {
                    let p = if y == want { 0.91 } else { 0.01 };
                    assert!((cpt.prob(y, &[a, b]) - p).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn module_tr_rejects_arity_mismatch() {
        let dc = build_example_2_1();
        let d = sample_dataset(&dc.sources[0], 10, 0, DomainId::Source(0));
        let t = sample_dataset(&dc.target, 10, 0, DomainId::Target);
        let mut pl = ex21_parents();
        pl.sources[0].parents = vec![0];
        let err = module_tr(&[Evidence::Samples(&d)], &Evidence::Samples(&t), &[BTreeSet::new()], &pl, 10, 0.1);
        assert!(matches!(err, Err(CtlabError::DimensionMismatch(_))));
    }

    #[test]
    fn consistent_parent_permutation_permutes_the_table() {
        let dc = build_example_2_1();
        let d = sample_dataset(&dc.sources[0], 2000, 4, DomainId::Source(0));
        let t = sample_dataset(&dc.target, 50, 5, DomainId::Target);
        let fit = |pl: &ParentLists| {
            module_tr(&[Evidence::Samples(&d)], &Evidence::Samples(&t), &[BTreeSet::new()], pl, 10, 0.1).unwrap()
        };
        let base = fit(&ex21_parents());
        let swapped = ParentLists { sources: vec![BoundModule::new(3, vec![1, 0])], target: BoundModule::new(3, vec![1, 2]) };
        let other = fit(&swapped);
        for a in 0..10 {
            for b in 0..10 {
                assert_eq!(other.row(&[b, a]), base.row(&[a, b]));
            }
        }
        assert_eq!(other, base.permute_args(&[1, 0]));
    }

    #[test]
    fn single_query_circuit_coincides_with_module_tr() {
        let dc = build_example_2_1();
        let src = sample_dataset(&dc.sources[0], 3000, 7, DomainId::Source(0));
        let tgt = sample_dataset(&dc.target, 30, 8, DomainId::Target);
        let oracle = DiscrepancyOracle::induced(&dc);
        let evidence = BTreeMap::from([(DomainId::Source(0), Evidence::Samples(&src)), (DomainId::Target, Evidence::Samples(&tgt))]);
        let diagrams = true_diagrams(&dc);
        let res = circuit_tr(&evidence, &oracle, &diagrams, 3, 10, TransportOptions::default()).unwrap();
        let m = module_tr(
            &[Evidence::Samples(&src)],
            &Evidence::Samples(&tgt),
            &[oracle.delta_set(0)],
            &ex21_parents(),
            10,
            DEFAULT_ALPHA,
        )
        .unwrap();
        assert_eq!(res.predictor.nodes()[0].cpt, m);
        assert!(res.status[0].transported);
    }

    #[test]
    fn example_2_1_transport_beats_target_only() {
        let dc = build_example_2_1();
        let joint = exact_joint(&dc.target, 1 << 20).unwrap();
        let truth = QueryTruth::from_joint(&joint, 3, &[2, 1]).unwrap();
        let src = sample_dataset(&dc.sources[0], 50_000, 0, DomainId::Source(0));
        let tgt = sample_dataset(&dc.target, 50, 0, DomainId::Target);
        // add-one smoothing: with 500 rows per table row the 0.01 cells are
        // sparse enough that alpha = 0.1 lands near 0.011
        let tr = module_tr(&[Evidence::Samples(&src)], &Evidence::Samples(&tgt), &[BTreeSet::new()], &ex21_parents(), 10, 1.0).unwrap();
        let only = fit_cpt(&RowSet::from_dataset(&tgt, 3, &[2, 1]).unwrap(), 10, 0.1).unwrap();
        let kl = true_risk(&tr, &truth).unwrap().kl;
        assert!(kl < 0.01, "{kl}");
        assert!(true_risk(&only, &truth).unwrap().kl > 0.1);
    }

    #[test]
    fn fig_e_every_non_root_position_has_a_source_match() {
        let dc = build_fig_e_pair(0.1).unwrap();
        let o = DiscrepancyOracle::induced(&dc);
        for i in 1..10 {
            let m = o.matching((DomainId::Target, i));
            assert!(m.iter().any(|(d, _)| *d == DomainId::Source(0)), "position {i}");
        }
    }

    #[test]
    fn gcd_max_positions_pool_the_max_source() {
        let dc = build_gcd_collection(6, 0.05).unwrap();
        let o = DiscrepancyOracle::induced(&dc);
        let src: Vec<_> = (0..3).map(|j| sample_dataset(&dc.sources[j], 100, j as u64, DomainId::Source(j))).collect();
        let evidence: BTreeMap<_, _> = (0..3).map(|j| (DomainId::Source(j), Evidence::Samples(&src[j]))).collect();
        let pooled = pooled_data_for_position(2, &evidence, &o, &true_diagrams(&dc), 6).unwrap();
        assert_eq!(pooled.slots, vec![(DomainId::Source(0), 2)]);
        assert_eq!(pooled.counts.total(), 100.0);
    }

    #[test]
    fn unmatched_position_without_target_rows_is_uniform_and_flagged() {
        let dc = build_example_a1();
        let oracle = DiscrepancyOracle::induced(&dc);
        let src = sample_dataset(&dc.sources[0], 500, 1, DomainId::Source(0));
        let evidence = BTreeMap::from([(DomainId::Source(0), Evidence::Samples(&src))]);
        let res = circuit_tr(&evidence, &oracle, &true_diagrams(&dc), 1, 2, TransportOptions::default()).unwrap();
        assert!(!res.status[0].transported);
        let cpt = &res.predictor.nodes()[0].cpt;
        assert_eq!(cpt.flagged(), &[0, 1]);
        assert_eq!(cpt.row(&[0]), &[0.5, 0.5]);
    }

    #[test]
    fn class_mixing_arities_is_an_error() {
        let dc = build_example_2_1();
        let mut classes = oracle_classes(&dc);
        // claim the binary target y shares the root mechanism
        classes.get_mut(&DomainId::Target).unwrap()[3] = classes[&DomainId::Source(0)][0];
        let o = DiscrepancyOracle::from_classes(classes);
        let src = sample_dataset(&dc.sources[0], 10, 1, DomainId::Source(0));
        let evidence = BTreeMap::from([(DomainId::Source(0), Evidence::Samples(&src))]);
        let err = pooled_data_for_position(3, &evidence, &o, &true_diagrams(&dc), 10);
        assert!(matches!(err, Err(CtlabError::DimensionMismatch(_))));
    }

    fn oracle_classes(dc: &crate::scm::DomainCollection) -> BTreeMap<DomainId, Vec<usize>> {
        DiscrepancyOracle::induced(dc).classes().clone()
    }
}
