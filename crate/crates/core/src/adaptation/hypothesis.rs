//! Structure hypotheses: a partition of (domain, position) slots into
//! mechanism classes plus one diagram per domain, with their enumeration and
//! counting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CtlabError, Result};
use crate::scm::{CausalDiagram, DiscrepancyOracle, DomainCollection, DomainId, Slot};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructureHypothesis {
    pub domains: Vec<DomainId>,
    /// Restricted-growth class labels over the slots, domains in order and
    /// positions in order within each domain.
    pub partition: Vec<usize>,
    pub diagrams: Vec<CausalDiagram>,
}

impl StructureHypothesis {
    /// Builds a hypothesis from arbitrary class labels, relabelling them as a
    /// restricted-growth string.
    pub fn new(domains: Vec<DomainId>, labels: &[usize], diagrams: Vec<CausalDiagram>) -> Result<Self> {
        if domains.len() != diagrams.len() {
            return Err(CtlabError::DimensionMismatch(format!("{} domains, {} diagrams", domains.len(), diagrams.len())));
        }
        let m: usize = diagrams.iter().map(CausalDiagram::len).sum();
        if labels.len() != m {
            return Err(CtlabError::DimensionMismatch(format!("{} labels for {m} slots", labels.len())));
        }
        for g in &diagrams {
            CausalDiagram::new(g.all_parents().to_vec())?;
        }
        Ok(Self { domains, partition: canonical_labels(labels), diagrams })
    }

    /// Every slot in its own class and no edges anywhere.
    pub fn no_transport(domains: Vec<DomainId>, lengths: &[usize]) -> Self {
        let m = lengths.iter().sum();
        Self { domains, partition: (0..m).collect(), diagrams: lengths.iter().map(|&t| CausalDiagram::empty(t)).collect() }
    }

    /// Classes read off an oracle (unlabelled slots become singletons).
    pub fn from_oracle(oracle: &DiscrepancyOracle, diagrams: &BTreeMap<DomainId, CausalDiagram>) -> Result<Self> {
        let domains: Vec<DomainId> = diagrams.keys().copied().collect();
        let mut labels = Vec::new();
        let fresh = oracle.classes().values().flatten().max().map_or(0, |m| m + 1);
        for (&d, g) in diagrams {
            for i in 0..g.len() {
                labels.push(oracle.class_of((d, i)).unwrap_or(fresh + labels.len()));
            }
        }
        Self::new(domains, &labels, diagrams.values().cloned().collect())
    }

    /// The structure of a collection: induced classes and true diagrams.
    pub fn truth(domains: &DomainCollection) -> Self {
        let diagrams = crate::transport::true_diagrams(domains);
        Self::from_oracle(&DiscrepancyOracle::induced(domains), &diagrams).expect("true structure is valid")
    }

    pub fn slots(&self) -> Vec<Slot> {
        self.domains.iter().zip(&self.diagrams).flat_map(|(&d, g)| (0..g.len()).map(move |i| (d, i))).collect()
    }

    pub fn oracle(&self) -> DiscrepancyOracle {
        let mut classes = BTreeMap::new();
        let mut k = 0;
        for (&d, g) in self.domains.iter().zip(&self.diagrams) {
            classes.insert(d, self.partition[k..k + g.len()].to_vec());
            k += g.len();
        }
        DiscrepancyOracle::from_classes(classes)
    }

    pub fn diagram_map(&self) -> BTreeMap<DomainId, CausalDiagram> {
        self.domains.iter().copied().zip(self.diagrams.iter().cloned()).collect()
    }

    pub fn diagram(&self, d: DomainId) -> Option<&CausalDiagram> {
        self.domains.iter().position(|&e| e == d).map(|k| &self.diagrams[k])
    }

    /// Partition labels, then per domain and node the parent count followed
    /// by the parents. Ties between candidates go to the smallest encoding.
    pub fn encoding(&self) -> Vec<usize> {
        let mut e = self.partition.clone();
        for g in &self.diagrams {
            for pa in g.all_parents() {
                e.push(pa.len());
                e.extend_from_slice(pa);
            }
        }
        e
    }

    /// `false` when some class joins slots with different parent counts.
    pub fn arity_consistent(&self) -> bool {
        let arities: Vec<usize> = self.diagrams.iter().flat_map(|g| g.all_parents().iter().map(Vec::len)).collect();
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        self.partition.iter().zip(&arities).all(|(&c, &a)| *seen.entry(c).or_insert(a) == a)
    }
}

fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// All set partitions of `m` items as restricted-growth strings, in
/// lexicographic order.
pub fn restricted_growth_strings(m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, max: usize, m: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        let top = if prefix.is_empty() { 0 } else { max + 1 };
        for c in 0..=top {
            prefix.push(c);
            rec(prefix, max.max(c), m, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), 0, m, &mut out);
    out
}

/// Bell numbers by the Bell triangle, in floating point (exact below 2^53).
pub fn bell_number(m: usize) -> f64 {
    let mut row = vec![1.0f64];
    for _ in 0..m {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("non-empty"));
        for k in 0..row.len() {
            let v = next[k] + row[k];
            next.push(v);
        }
        row = next;
    }
    row[0]
}

/// Ordered tuples of distinct positions below `i` with at most `max_parents`
/// entries, shortest first.
pub fn parent_choices(i: usize, max_parents: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_parents.min(i) {
        let mut next = Vec::new();
        for t in &frontier {
            for p in 0..i {
                if !t.contains(&p) {
                    let mut u: Vec<usize> = t.clone();
                    u.push(p);
                    next.push(u);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Number of diagrams over `t` positions: node `i` has
/// `sum_k i!/(i-k)!` choices for `k <= max_parents`.
pub fn diagram_count(t: usize, max_parents: usize) -> f64 {
    (0..t)
        .map(|i| {
            let mut total = 0.0;
            let mut perm = 1.0;
            for k in 0..=max_parents.min(i) {
                total += perm;
                perm *= (i - k) as f64;
            }
            total
        })
        .product()
}

pub fn enumerate_diagrams(t: usize, max_parents: usize) -> Vec<CausalDiagram> {
    let choices: Vec<Vec<Vec<usize>>> = (0..t).map(|i| parent_choices(i, max_parents)).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; t];
    loop {
        let parents = idx.iter().zip(&choices).map(|(&k, c)| c[k].clone()).collect();
        out.push(CausalDiagram::new(parents).expect("parents precede children"));
        // odometer over per-node choices, last node fastest
        let mut k = t;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Bounds and candidates of the structure search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Size T* of the hypothesised target SCM.
    pub target_len: usize,
    pub prefix_len: usize,
    pub max_parents: usize,
    pub partition_cap: u64,
    pub diagram_cap: u64,
    /// Explicit candidates; when non-empty the search is guided.
    #[serde(default)]
    pub candidates: Vec<StructureHypothesis>,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub alpha: f64,
    pub max_width: usize,
}

impl SearchConfig {
    pub fn new(target_len: usize, prefix_len: usize) -> Self {
        Self {
            target_len,
            prefix_len,
            max_parents: 2,
            partition_cap: 100_000,
            diagram_cap: 100_000,
            candidates: Vec::new(),
            split_fraction: 0.5,
            split_seed: 0,
            alpha: crate::inference::DEFAULT_ALPHA,
            max_width: crate::inference::DEFAULT_MAX_WIDTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.partition_cap == 0 || self.diagram_cap == 0 {
            return Err(CtlabError::InvalidConfig("search caps must be at least 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(CtlabError::InvalidConfig(format!("split fraction {} outside (0, 1)", self.split_fraction)));
        }
        if self.prefix_len >= self.target_len {
            return Err(CtlabError::InvalidConfig("prefix must leave a query position".into()));
        }
        Ok(())
    }

    pub fn domains(&self, n_sources: usize) -> Vec<DomainId> {
        let mut d: Vec<DomainId> = (0..n_sources).map(DomainId::Source).collect();
        d.push(DomainId::Target);
        d
    }

    fn lengths(&self, source_lengths: &[usize]) -> Vec<usize> {
        let mut l = source_lengths.to_vec();
        l.push(self.target_len);
        l
    }
}

/// Size of the exhaustive space: partitions times diagram choices.
fn exhaustive_counts(config: &SearchConfig, lengths: &[usize]) -> (f64, f64) {
    let m: usize = lengths.iter().sum();
    let diagrams = lengths.iter().map(|&t| diagram_count(t, config.max_parents)).product();
    (bell_number(m), diagrams)
}

/// The candidate stream: exhaustive when no explicit candidates are given
/// and both counts fit their caps; otherwise the explicit list plus the
/// no-transport hypothesis, deduplicated and in encoding order.
pub fn enumerate_structures(config: &SearchConfig, source_lengths: &[usize]) -> Result<Vec<StructureHypothesis>> {
    config.validate()?;
    let domains = config.domains(source_lengths.len());
    let lengths = config.lengths(source_lengths);
    if !config.candidates.is_empty() {
        let mut list = config.candidates.clone();
        for h in &list {
            let own: Vec<usize> = h.diagrams.iter().map(CausalDiagram::len).collect();
            if h.domains != domains || own != lengths {
                return Err(CtlabError::InvalidConfig(format!(
                    "candidate over {:?} with lengths {own:?}, expected {domains:?} with {lengths:?}",
                    h.domains
                )));
            }
        }
        list.push(StructureHypothesis::no_transport(domains, &lengths));
        list.sort_by_key(StructureHypothesis::encoding);
        list.dedup();
        return Ok(list);
    }
    let (partitions, diagrams) = exhaustive_counts(config, &lengths);
    if partitions > config.partition_cap as f64 || diagrams > config.diagram_cap as f64 {
        return Err(CtlabError::BudgetExceeded(format!(
            "{partitions} partitions x {diagrams} diagram sets exceed the caps and no candidates were given"
        )));
    }
    let per_domain: Vec<Vec<CausalDiagram>> = lengths.iter().map(|&t| enumerate_diagrams(t, config.max_parents)).collect();
    let m: usize = lengths.iter().sum();
    let mut out = Vec::with_capacity((partitions * diagrams) as usize);
    for rgs in restricted_growth_strings(m) {
        let mut idx = vec![0usize; per_domain.len()];
        'diagrams: loop {
            let ds = idx.iter().zip(&per_domain).map(|(&k, all)| all[k].clone()).collect();
            out.push(StructureHypothesis { domains: domains.clone(), partition: rgs.clone(), diagrams: ds });
            let mut k = idx.len();
            loop {
                if k == 0 {
                    break 'diagrams;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_domain[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCount {
    pub count: f64,
    pub log_count: f64,
}

impl HypothesisCount {
    /// The `sqrt(log|H| / n)` selection term.
    pub fn excess_bound(&self, n: usize) -> f64 {
        (self.log_count / n as f64).sqrt()
    }
}

/// |H| for `k` sources of `t` positions each and the configured target size.
pub fn hypothesis_count(config: &SearchConfig, k: usize, t: usize) -> HypothesisCount {
    if !config.candidates.is_empty() {
        let n = enumerate_structures(config, &vec![t; k]).map_or(config.candidates.len() + 1, |l| l.len()) as f64;
        return HypothesisCount { count: n, log_count: n.ln() };
    }
    let (p, d) = exhaustive_counts(config, &config.lengths(&vec![t; k]));
    HypothesisCount { count: p * d, log_count: p.ln() + d.ln() }
}

/// Module-transport hypotheses for a `prefix_len + 1` target: the query
/// picks an ordered tuple of at most `max_parents` prefix positions and is
/// either novel or shares the mechanism of one source slot with the same
/// parent count. Sources keep the given diagrams; every other slot is its
/// own class.
pub fn module_tr_hypotheses(source_diagrams: &[CausalDiagram], prefix_len: usize, max_parents: usize) -> Vec<StructureHypothesis> {
    let k = source_diagrams.len();
    let mut domains: Vec<DomainId> = (0..k).map(DomainId::Source).collect();
    domains.push(DomainId::Target);
    let n_source_slots: usize = source_diagrams.iter().map(CausalDiagram::len).sum();
    // (slot index, parent count) over all source slots
    let source_slots: Vec<(usize, usize)> =
        source_diagrams.iter().flat_map(|g| g.all_parents().iter().map(Vec::len)).enumerate().collect();
    let mut out = Vec::new();
    for pa in parent_choices(prefix_len, max_parents) {
        let mut parents = vec![Vec::new(); prefix_len];
        parents.push(pa.clone());
        let target = CausalDiagram::new(parents).expect("prefix parents");
        let mut diagrams = source_diagrams.to_vec();
        diagrams.push(target);
        let base: Vec<usize> = (0..n_source_slots + prefix_len + 1).collect();
        let y = n_source_slots + prefix_len;
        out.push(StructureHypothesis::new(domains.clone(), &base, diagrams.clone()).expect("valid"));
        for &(s, arity) in &source_slots {
            if arity == pa.len() {
                let mut labels = base.clone();
                labels[y] = s;
                out.push(StructureHypothesis::new(domains.clone(), &labels, diagrams.clone()).expect("valid"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::fixtures::build_fig_e_pair;

    #[test]
    fn bell_numbers() {
        let want = [1.0, 1.0, 2.0, 5.0, 15.0, 52.0, 203.0];
        for (m, w) in want.iter().enumerate() {
            assert_eq!(bell_number(m), *w);
            assert_eq!(restricted_growth_strings(m).len() as f64, *w);
        }
    }

    #[test]
    fn diagram_counts_match_enumeration() {
        assert_eq!(diagram_count(3, 1), 6.0);
        for t in 1..5 {
            for mp in 0..3 {
                assert_eq!(enumerate_diagrams(t, mp).len() as f64, diagram_count(t, mp), "t={t} mp={mp}");
            }
        }
    }

    #[test]
    fn exhaustive_two_by_two() {
        let mut c = SearchConfig::new(2, 1);
        c.max_parents = 1;
        let all = enumerate_structures(&c, &[2]).unwrap();
        assert_eq!(all.len(), 15 * 4);
        let hc = hypothesis_count(&c, 1, 2);
        assert_eq!(hc.count, 15.0 * diagram_count(2, 1).powi(2));
        assert!(hc.excess_bound(1_000_000) < hc.excess_bound(100));
    }

    #[test]
    fn guided_stream_adds_no_transport() {
        let dc = build_fig_e_pair(0.1).unwrap();
        let truth = StructureHypothesis::truth(&dc);
        let mut alt = truth.clone();
        alt.partition = (0..20).collect();
        let mut alt2 = truth.clone();
        alt2.diagrams[0] = CausalDiagram::empty(10);
        let mut c = SearchConfig::new(10, 5);
        c.candidates = vec![truth, alt, alt2];
        assert_eq!(enumerate_structures(&c, &[10]).unwrap().len(), 4);
    }

    #[test]
    fn caps_without_candidates_error() {
        let c = SearchConfig::new(10, 5);
        assert!(matches!(enumerate_structures(&c, &[10]), Err(CtlabError::BudgetExceeded(_))));
    }

    #[test]
    fn log_count_grows_superlinearly_in_target_size() {
        let at = |t: usize| {
            let mut c = SearchConfig::new(t, t - 1);
            c.max_parents = 1;
            hypothesis_count(&c, 1, 3).log_count
        };
        assert!(at(6) > 2.0 * at(3));
        assert!(at(4) > at(3));
    }

    #[test]
    fn truth_roundtrips_through_the_oracle() {
        let dc = build_fig_e_pair(0.1).unwrap();
        let h = StructureHypothesis::truth(&dc);
        let o = h.oracle();
        let induced = DiscrepancyOracle::induced(&dc);
        for a in h.slots() {
            for b in h.slots() {
                assert_eq!(o.delta(a, b), induced.delta(a, b));
            }
        }
        assert!(h.arity_consistent());
    }

    #[test]
    fn fig_e_module_space_size() {
        let dc = build_fig_e_pair(0.1).unwrap();
        let hs = module_tr_hypotheses(&[dc.sources[0].diagram()], 5, 2);
        // 1 + 5 + 20 parent tuples; one root and one unary source slot, eight binary
        assert_eq!(hs.len(), 2 + 5 * 2 + 20 * 9);
        assert!(hs.iter().all(StructureHypothesis::arity_consistent));
    }
}
