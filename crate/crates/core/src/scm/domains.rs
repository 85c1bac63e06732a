//! Domain collections and the mechanism-discrepancy oracle.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::Scm;
use super::sample::DomainId;
use crate::error::{CtlabError, Result};

/// K source SCMs and one target SCM over a shared vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainCollection {
    pub sources: Vec<Scm>,
    pub target: Scm,
}

impl DomainCollection {
    pub fn new(sources: Vec<Scm>, target: Scm) -> Result<Self> {
        if sources.is_empty() {
            return Err(CtlabError::InvalidScm("at least one source domain is required".into()));
        }
        if let Some(s) = sources.iter().find(|s| s.vocab() != target.vocab()) {
            return Err(CtlabError::InvalidScm(format!(
                "source vocabulary {} differs from target vocabulary {}",
                s.vocab(),
                target.vocab()
            )));
        }
        Ok(Self { sources, target })
    }

    pub fn vocab(&self) -> usize {
        self.target.vocab()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn scm(&self, d: DomainId) -> &Scm {
        match d {
            DomainId::Source(j) => &self.sources[j],
            DomainId::Target => &self.target,
        }
    }

    /// Sources in order, then the target.
    pub fn domain_ids(&self) -> Vec<DomainId> {
        let mut ids: Vec<DomainId> = (0..self.sources.len()).map(DomainId::Source).collect();
        ids.push(DomainId::Target);
        ids
    }
}

/// A (domain, position) pair.
pub type Slot = (DomainId, usize);

/// Δ over (domain, position) slots, stored as mechanism-class labels so the
/// zero relation is an equivalence by construction. Slots without a label
/// only match themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscrepancyOracle {
    classes: BTreeMap<DomainId, Vec<usize>>,
}

impl DiscrepancyOracle {
    pub fn from_classes(classes: BTreeMap<DomainId, Vec<usize>>) -> Self {
        Self { classes }
    }

    /// Oracle induced by the true mechanisms: two slots match iff operator
    /// kind, noise level and exogenous law coincide.
    pub fn induced(domains: &DomainCollection) -> Self {
        let mut labels: BTreeMap<String, usize> = BTreeMap::new();
        let mut classes = BTreeMap::new();
        for d in domains.domain_ids() {
            let scm = domains.scm(d);
            let ids = (0..scm.len())
                .map(|i| {
                    let next = labels.len();
                    *labels.entry(scm.mechanism_signature(i)).or_insert(next)
                })
                .collect();
            classes.insert(d, ids);
        }
        Self { classes }
    }

    pub fn classes(&self) -> &BTreeMap<DomainId, Vec<usize>> {
        &self.classes
    }

    pub fn class_of(&self, slot: Slot) -> Option<usize> {
        self.classes.get(&slot.0).and_then(|c| c.get(slot.1)).copied()
    }

    /// `true` when the mechanisms at `a` and `b` differ.
    pub fn delta(&self, a: Slot, b: Slot) -> bool {
        if a == b {
            return false;
        }
        match (self.class_of(a), self.class_of(b)) {
            (Some(x), Some(y)) => x != y,
            _ => true,
        }
    }

    /// Every labelled slot sharing the mechanism of `slot`, itself included.
    pub fn matching(&self, slot: Slot) -> Vec<Slot> {
        let Some(c) = self.class_of(slot) else {
            return vec![slot];
        };
        self.classes
            .iter()
            .flat_map(|(&d, ids)| ids.iter().enumerate().filter(move |(_, &k)| k == c).map(move |(i, _)| (d, i)))
            .collect()
    }

    /// Positions of the target whose mechanism differs from the same
    /// position in source `j`.
    pub fn delta_set(&self, j: usize) -> BTreeSet<usize> {
        let t = self.classes.get(&DomainId::Target).map_or(0, Vec::len);
        (0..t).filter(|&i| self.delta((DomainId::Source(j), i), (DomainId::Target, i))).collect()
    }
}
