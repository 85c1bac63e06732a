//! Penalised-likelihood pretraining over source domains.
//!
//! The objective over per-source diagrams and a mechanism labelling of all
//! source slots is
//!
//! ```text
//! sum over classes c [ sum over members m of CE_m(psi_c) / N_m + k_c (|V|-1) / N ]
//!   + lambda * (#classes + #edges)
//! ```
//!
//! where `psi_c` is the smoothed table fitted on the pooled member counts,
//! `k_c` its number of supported rows and `N` the smallest source size. The
//! `k_c` term is an AIC-style correction for in-sample optimism; it is zero
//! for exact evidence. The search runs in two phases: per-slot parent sets
//! (the objective decomposes per slot while every slot is its own class),
//! then greedy merging of classes with a search over argument orders.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::restricted_growth_strings;
use crate::error::{CtlabError, Result};
use crate::inference::{Counts, Cpt, Evidence};
use crate::scm::CausalDiagram;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub lambda: f64,
    pub max_parents: usize,
    pub alpha: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { lambda: 1e-3, max_parents: 2, alpha: crate::inference::DEFAULT_ALPHA }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainResult {
    /// Class of every source slot, `phi[j][i]`.
    pub phi: Vec<Vec<usize>>,
    /// Per-source diagrams; parent order is the argument order of the class
    /// table.
    pub diagrams: Vec<CausalDiagram>,
    pub psi: Vec<Cpt>,
    pub d: usize,
    pub lambda: f64,
    pub objective: f64,
}

impl PretrainResult {
    pub fn class_arity(&self, c: usize) -> usize {
        self.psi[c].arity()
    }

    /// 0/1 parent matrices, one per source.
    pub fn parent_matrices(&self) -> Vec<Vec<Vec<u8>>> {
        self.diagrams.iter().map(CausalDiagram::parent_matrix).collect()
    }
}

/// Per-slot statistics shared by both phases.
struct Model<'a> {
    evidence: &'a [Evidence<'a>],
    vocab: usize,
    config: PretrainConfig,
    n_ref: f64,
    exact: bool,
}

impl<'a> Model<'a> {
    fn new(evidence: &'a [Evidence<'a>], vocab: usize, config: PretrainConfig) -> Result<Self> {
        if evidence.is_empty() {
            return Err(CtlabError::EmptyInput("pretraining needs at least one source".into()));
        }
        let exact = evidence[0].is_exact();
        if evidence.iter().any(|e| e.is_exact() != exact) {
            return Err(CtlabError::Unsupported("mixing exact and sampled sources in pretraining".into()));
        }
        let n_ref = evidence.iter().map(Evidence::size).fold(f64::INFINITY, f64::min);
        if !(n_ref > 0.0) {
            return Err(CtlabError::EmptyInput("empty source".into()));
        }
        Ok(Self { evidence, vocab, config, n_ref, exact })
    }

    fn counts(&self, j: usize, i: usize, parents: &[usize]) -> Result<Counts> {
        self.evidence[j].counts(i, parents, self.vocab)
    }

    /// Cost of one class given its members' counts in class argument order.
    fn class_cost(&self, members: &[(&Counts, f64)]) -> (f64, Cpt) {
        let mut pooled = members[0].0.clone();
        for (c, _) in &members[1..] {
            pooled.merge(c).expect("members share the class arity");
        }
        let cpt = Cpt::from_counts(&pooled, self.config.alpha);
        let nll: f64 = members.iter().map(|(c, n)| c.cross_entropy(&cpt) / n).sum();
        let correction =
            if self.exact { 0.0 } else { (pooled.supported_rows() * (self.vocab - 1)) as f64 / self.n_ref };
        (nll + correction, cpt)
    }
}

/// Unordered parent sets of position `i` (ascending tuples), empty first.
pub fn parent_sets(i: usize, max_parents: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_parents.min(i) {
        let mut next = Vec::new();
        for s in &frontier {
            let from = s.last().map_or(0, |&l| l + 1);
            for p in from..i {
                let mut t = s.clone();
                t.push(p);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in 0..k {
            if !cur.contains(&x) {
                cur.push(x);
                rec(cur, k, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), k, &mut out);
    out
}

struct Class {
    /// (source, position, ordered parents)
    members: Vec<(usize, usize, Vec<usize>)>,
    counts: Vec<(Counts, f64)>,
    cost: f64,
    cpt: Cpt,
}

/// Two-phase search: per-slot parent sets, then greedy class merging.
pub fn pretrain_tabular(evidence: &[Evidence], vocab: usize, config: PretrainConfig) -> Result<PretrainResult> {
    let model = Model::new(evidence, vocab, config)?;
    let slots: Vec<(usize, usize)> =
        (0..evidence.len()).flat_map(|j| (0..evidence[j].n_vars()).map(move |i| (j, i))).collect();
    // phase 1: the objective decomposes per slot while classes are singletons
    let mut classes = slots
        .par_iter()
        .map(|&(j, i)| {
            let mut best: Option<(f64, Vec<usize>, Counts, f64, Cpt)> = None;
            for pa in parent_sets(i, config.max_parents) {
                let c = model.counts(j, i, &pa)?;
                let (cost, cpt) = model.class_cost(&[(&c, evidence[j].size())]);
                let score = cost + config.lambda * pa.len() as f64;
                if best.as_ref().map_or(true, |b| score < b.0) {
                    best = Some((score, pa, c, cost, cpt));
                }
            }
            let (_, pa, c, cost, cpt) = best.expect("the empty set is always a candidate");
            Ok(Class { members: vec![(j, i, pa)], counts: vec![(c, evidence[j].size())], cost, cpt })
        })
        .collect::<Result<Vec<_>>>()?;
    // phase 2: merge while the objective does not increase
    let tol = 1e-12;
    loop {
        let pairs: Vec<(usize, usize)> = (0..classes.len())
            .flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| classes[a].cpt.arity() == classes[b].cpt.arity())
            .collect();
        let evaluated: Vec<(f64, usize, usize, Vec<usize>)> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let k = classes[a].cpt.arity();
                let mut best = (f64::INFINITY, Vec::new());
                for perm in permutations(k) {
                    let moved: Vec<Counts> = classes[b].counts.iter().map(|(c, _)| c.permute_args(&perm)).collect();
                    let mut members: Vec<(&Counts, f64)> = classes[a].counts.iter().map(|(c, n)| (c, *n)).collect();
                    members.extend(moved.iter().zip(&classes[b].counts).map(|(c, (_, n))| (c, *n)));
                    let (cost, _) = model.class_cost(&members);
                    if cost < best.0 {
                        best = (cost, perm);
                    }
                }
                (best.0 - classes[a].cost - classes[b].cost - config.lambda, a, b, best.1)
            })
            .collect();
        let Some(&(delta, a, b, ref perm)) = evaluated
            .iter()
            .min_by(|x, y| x.0.partial_cmp(&y.0).expect("finite").then((x.1, x.2).cmp(&(y.1, y.2))))
        else {
            break;
        };
        if delta > tol {
            break;
        }
        let perm = perm.clone();
        let gone = classes.remove(b);
        let into = &mut classes[a];
        for ((j, i, pa), (c, n)) in gone.members.into_iter().zip(gone.counts) {
            into.members.push((j, i, perm.iter().map(|&p| pa[p]).collect()));
            into.counts.push((c.permute_args(&perm), n));
        }
        let members: Vec<(&Counts, f64)> = into.counts.iter().map(|(c, n)| (c, *n)).collect();
        let (cost, cpt) = model.class_cost(&members);
        into.cost = cost;
        into.cpt = cpt;
    }
    finish(evidence, classes, config)
}

fn finish(evidence: &[Evidence], mut classes: Vec<Class>, config: PretrainConfig) -> Result<PretrainResult> {
    // label classes by their first slot in (source, position) order
    for c in &mut classes {
        c.members.sort_by_key(|m| (m.0, m.1));
    }
    classes.sort_by_key(|c| (c.members[0].0, c.members[0].1));
    let mut phi: Vec<Vec<usize>> = evidence.iter().map(|e| vec![0; e.n_vars()]).collect();
    let mut parents: Vec<Vec<Vec<usize>>> = evidence.iter().map(|e| vec![Vec::new(); e.n_vars()]).collect();
    let mut objective = 0.0;
    let mut edges = 0;
    for (k, c) in classes.iter().enumerate() {
        objective += c.cost;
        for (j, i, pa) in &c.members {
            phi[*j][*i] = k;
            edges += pa.len();
            parents[*j][*i] = pa.clone();
        }
    }
    objective += config.lambda * (classes.len() + edges) as f64;
    let diagrams = parents.into_iter().map(CausalDiagram::new).collect::<Result<Vec<_>>>()?;
    Ok(PretrainResult {
        phi,
        diagrams,
        d: classes.len(),
        psi: classes.into_iter().map(|c| c.cpt).collect(),
        lambda: config.lambda,
        objective,
    })
}

/// Exhaustive minimum of the same objective over every labelling of the
/// source slots and every parent set (with argument orders), for small
/// problems. The best cost of each block of slots is memoised, then every
/// set partition is scored as a sum of block costs.
pub fn exhaustive_pretrain(evidence: &[Evidence], vocab: usize, config: PretrainConfig) -> Result<PretrainResult> {
    let model = Model::new(evidence, vocab, config)?;
    let slots: Vec<(usize, usize)> =
        (0..evidence.len()).flat_map(|j| (0..evidence[j].n_vars()).map(move |i| (j, i))).collect();
    let m = slots.len();
    if m > 12 {
        return Err(CtlabError::BudgetExceeded(format!("exhaustive pretraining over {m} slots")));
    }
    let mut counts: HashMap<(usize, usize, Vec<usize>), Counts> = HashMap::new();
    for &(j, i) in &slots {
        for pa in parent_sets(i, config.max_parents) {
            let c = model.counts(j, i, &pa)?;
            counts.insert((j, i, pa), c);
        }
    }
    // best (cost + lambda * (1 + edges), ordered parents) per block bitmask
    let best_block = |mask: usize| -> Option<(f64, Vec<Vec<usize>>)> {
        let members: Vec<(usize, usize)> = (0..m).filter(|k| mask >> k & 1 == 1).map(|k| slots[k]).collect();
        let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
        for arity in 0..=config.max_parents {
            let choices: Vec<Vec<Vec<usize>>> = members
                .iter()
                .map(|&(_, i)| parent_sets(i, config.max_parents).into_iter().filter(|p| p.len() == arity).collect())
                .collect();
            if choices.iter().any(Vec::is_empty) {
                continue;
            }
            let perms = permutations(arity);
            let mut pick = vec![0usize; members.len()];
            let mut order = vec![0usize; members.len()];
            'assign: loop {
                let chosen: Vec<Vec<usize>> =
                    pick.iter().zip(&choices).zip(&order).map(|((&k, c), &o)| perms[o].iter().map(|&p| c[k][p]).collect()).collect();
                let moved: Vec<Counts> = members
                    .iter()
                    .zip(pick.iter().zip(&choices))
                    .zip(&order)
                    .map(|((&(j, i), (&k, c)), &o)| counts[&(j, i, c[k].clone())].permute_args(&perms[o]))
                    .collect();
                let list: Vec<(&Counts, f64)> = moved.iter().zip(&members).map(|(c, &(j, _))| (c, evidence[j].size())).collect();
                let (cost, _) = model.class_cost(&list);
                let score = cost + config.lambda * (1 + arity * members.len()) as f64;
                if best.as_ref().map_or(true, |b| score < b.0) {
                    best = Some((score, chosen));
                }
                // odometer: the first member keeps its order, the others range
                // over every permutation and every parent set of this arity
                let mut k = 0;
                loop {
                    if k == members.len() {
                        break 'assign;
                    }
                    if k > 0 {
                        order[k] += 1;
                        if order[k] < perms.len() {
                            break;
                        }
                        order[k] = 0;
                    }
                    pick[k] += 1;
                    if pick[k] < choices[k].len() {
                        break;
                    }
                    pick[k] = 0;
                    k += 1;
                }
            }
        }
        best
    };
    let blocks: Vec<Option<(f64, Vec<Vec<usize>>)>> = (0..1usize << m).into_par_iter().map(|mask| if mask == 0 { None } else { best_block(mask) }).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for rgs in restricted_growth_strings(m) {
        let n_blocks = rgs.iter().max().map_or(0, |x| x + 1);
        let mut masks = vec![0usize; n_blocks];
        for (k, &b) in rgs.iter().enumerate() {
            masks[b] |= 1 << k;
        }
        let mut total = 0.0;
        for &mask in &masks {
            match &blocks[mask] {
                Some((c, _)) => total += c,
                None => {
                    total = f64::INFINITY;
                    break;
                }
            }
        }
        if best.as_ref().map_or(true, |b| total < b.0) {
            best = Some((total, rgs));
        }
    }
    let (_, rgs) = best.ok_or_else(|| CtlabError::EmptyInput("no slots".into()))?;
    let n_blocks = rgs.iter().max().map_or(0, |x| x + 1);
    let mut classes = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let idx: Vec<usize> = (0..m).filter(|&k| rgs[k] == b).collect();
        let mask = idx.iter().fold(0usize, |acc, &k| acc | 1 << k);
        let (_, chosen) = blocks[mask].clone().expect("finite optimum");
        let mut members = Vec::new();
        let mut cs = Vec::new();
        for (&k, pa) in idx.iter().zip(chosen) {
            let (j, i) = slots[k];
            let mut sorted = pa.clone();
            sorted.sort();
            let base = &counts[&(j, i, sorted.clone())];
            // ordered parents `pa` are `sorted` permuted: pa[t] = sorted[perm[t]]
            let perm: Vec<usize> = pa.iter().map(|p| sorted.iter().position(|q| q == p).expect("same set")).collect();
            cs.push((base.permute_args(&perm), evidence[j].size()));
            members.push((j, i, pa));
        }
        let list: Vec<(&Counts, f64)> = cs.iter().map(|(c, n)| (c, *n)).collect();
        let (cost, cpt) = model.class_cost(&list);
        classes.push(Class { members, counts: cs, cost, cpt });
    }
    finish(evidence, classes, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{sample_dataset, DomainId, NoisyOperator, OpKind, Scm};

    fn copy_pair(p: f64) -> Scm {
        Scm::from_operators(
            3,
            vec![(vec![], NoisyOperator::new(OpKind::Unif, 0.0).unwrap()), (vec![0], NoisyOperator::new(OpKind::Copy, p).unwrap())],
        )
        .unwrap()
    }

    #[test]
    fn parent_set_enumeration() {
        assert_eq!(parent_sets(0, 2), vec![Vec::<usize>::new()]);
        assert_eq!(parent_sets(3, 2).len(), 1 + 3 + 3);
        assert_eq!(parent_sets(3, 1), vec![vec![], vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn copy_pair_recovers_edge_and_two_classes() {
        let scm = copy_pair(0.1);
        let ev = [Evidence::exact(&scm)];
        let cfg = PretrainConfig { alpha: 0.0, ..Default::default() };
        let r = pretrain_tabular(&ev, 3, cfg).unwrap();
        assert_eq!(r.diagrams[0].parents(1), &[0]);
        assert_eq!(r.d, 2);
        let e = exhaustive_pretrain(&ev, 3, cfg).unwrap();
        assert_eq!(e.diagrams, r.diagrams);
        assert!((e.objective - r.objective).abs() < 1e-12);
    }

    #[test]
    fn identical_domains_share_classes() {
        let scm = copy_pair(0.2);
        let a = sample_dataset(&scm, 4000, 1, DomainId::Source(0));
        let b = sample_dataset(&scm, 4000, 2, DomainId::Source(1));
        let ev = [Evidence::Samples(&a), Evidence::Samples(&b)];
        let r = pretrain_tabular(&ev, 3, PretrainConfig::default()).unwrap();
        assert_eq!(r.phi[0], r.phi[1]);
        assert_eq!(r.d, 2);
    }

    #[test]
    fn merge_search_finds_reversed_argument_order() {
        // y = x1 - x2 in one source, y = x2' - x1' with swapped positions in the other
        let mk = |parents: Vec<usize>| {
            Scm::from_operators(
                3,
                vec![
                    (vec![], NoisyOperator::new(OpKind::Unif, 0.0).unwrap()),
                    (vec![], NoisyOperator::new(OpKind::Unif, 0.0).unwrap()),
                    (parents, NoisyOperator::new(OpKind::Subtract, 0.1).unwrap()),
                ],
            )
            .unwrap()
        };
        let (s0, s1) = (mk(vec![0, 1]), mk(vec![1, 0]));
        let ev = [Evidence::exact(&s0), Evidence::exact(&s1)];
        let r = pretrain_tabular(&ev, 3, PretrainConfig { alpha: 0.0, ..Default::default() }).unwrap();
        assert_eq!(r.phi[0][2], r.phi[1][2]);
        assert_eq!(r.d, 2);
        assert_eq!(r.diagrams[0].parents(2), &[0, 1]);
        assert_eq!(r.diagrams[1].parents(2), &[1, 0]);
    }
}
