//! Exact joint distributions by enumeration.

use serde::{Deserialize, Serialize};

use super::model::{decode_into, decode_mixed, Mechanism, Scm};
use super::sample::Dataset;
use crate::error::{CtlabError, Result};
use crate::inference::Cpt;

pub const DEFAULT_JOINT_BUDGET: usize = 100_000_000;

/// Maximum number of dense table entries; `CTLAB_BUDGET` overrides the default.
pub fn joint_budget() -> usize {
    std::env::var("CTLAB_BUDGET")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_JOINT_BUDGET)
}

pub(crate) fn table_size(vocab: usize, n_vars: usize, budget: usize) -> Result<usize> {
    match vocab.checked_pow(n_vars as u32) {
        Some(s) if s <= budget => Ok(s),
        _ => Err(CtlabError::BudgetExceeded(format!(
            "dense table {vocab}^{n_vars} exceeds budget of {budget} entries"
        ))),
    }
}

/// Dense distribution over all |V|^T assignments, first position most
/// significant in the index.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    vocab: usize,
    n_vars: usize,
    probs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub ok: bool,
    pub min_mass: f64,
}

impl JointTable {
    pub fn from_probs(vocab: usize, n_vars: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = vocab
            .checked_pow(n_vars as u32)
            .ok_or_else(|| CtlabError::BudgetExceeded("joint size overflow".into()))?;
        if probs.len() != expected {
            return Err(CtlabError::DimensionMismatch(format!("{} probabilities, expected {expected}", probs.len())));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(CtlabError::OutOfRange("negative or non-finite probability".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(CtlabError::OutOfRange(format!("joint sums to {s}")));
        }
        Ok(Self { vocab, n_vars, probs })
    }

    /// Empirical frequencies of a dataset.
    pub fn empirical(data: &Dataset, vocab: usize, budget: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(CtlabError::EmptyInput("empirical joint of empty dataset".into()));
        }
        data.check_vocab(vocab)?;
        let size = table_size(vocab, data.n_vars(), budget)?;
        let mut probs = vec![0.0; size];
        let w = 1.0 / data.len() as f64;
        for row in data.rows() {
            probs[super::model::encode(row, vocab)] += w;
        }
        Ok(Self { vocab, n_vars: data.n_vars(), probs })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, assignment: &[usize]) -> f64 {
        assert_eq!(assignment.len(), self.n_vars);
        self.probs[super::model::encode(assignment, self.vocab)]
    }

    /// Iterates `(assignment, probability)` over all entries.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], f64)) {
        let mut a = vec![0usize; self.n_vars];
        for (idx, &p) in self.probs.iter().enumerate() {
            decode_into(idx, self.vocab, &mut a);
            f(&a, p);
        }
    }

    fn check_vars(&self, vars: &[usize]) -> Result<()> {
        for (k, &v) in vars.iter().enumerate() {
            if v >= self.n_vars {
                return Err(CtlabError::OutOfRange(format!("position {v} of {}", self.n_vars)));
            }
            if vars[..k].contains(&v) {
                return Err(CtlabError::DimensionMismatch(format!("position {v} repeated")));
            }
        }
        Ok(())
    }

    /// Dense marginal over `vars` in the listed order.
    pub fn marginal(&self, vars: &[usize]) -> Result<Vec<f64>> {
        self.check_vars(vars)?;
        let mut out = vec![0.0; self.vocab.pow(vars.len() as u32)];
        self.for_each(|a, p| {
            let idx = vars.iter().fold(0, |acc, &v| acc * self.vocab + a[v]);
            out[idx] += p;
        });
        Ok(out)
    }

    /// Exact P(v_target | v_given) with rows ordered by the given positions.
    /// Zero-mass rows come back uniform and flagged.
    pub fn conditional(&self, target: usize, given: &[usize]) -> Result<Cpt> {
        let mut vars = given.to_vec();
        vars.push(target);
        let m = self.marginal(&vars)?;
        let v = self.vocab;
        let mut probs = m;
        let mut flagged = Vec::new();
        for (r, row) in probs.chunks_exact_mut(v).enumerate() {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|p| *p /= s);
            } else {
                row.iter_mut().for_each(|p| *p = 1.0 / v as f64);
                flagged.push(r);
            }
        }
        Cpt::from_probs(given.len(), v, probs, 0.0, flagged)
    }

    pub fn min_mass(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn positivity(&self, epsilon: f64) -> PositivityReport {
        let min_mass = self.min_mass();
        PositivityReport { ok: min_mass >= epsilon, min_mass }
    }

    pub fn max_abs_diff(&self, other: &JointTable) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len());
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Shorthand for [`JointTable::conditional`].
pub fn exact_conditional(joint: &JointTable, target: usize, given: &[usize]) -> Result<Cpt> {
    joint.conditional(target, given)
}

pub fn validate_positivity(joint: &JointTable, epsilon: f64) -> PositivityReport {
    joint.positivity(epsilon)
}

/// Exact joint by enumeration. Explicit exogenous variables are enumerated
/// configuration by configuration; operator noise is mixed in per position.
pub fn exact_joint(scm: &Scm, budget: usize) -> Result<JointTable> {
    let v = scm.vocab();
    let t = scm.len();
    let size = table_size(v, t, budget)?;
    let cards: Vec<usize> = scm.exogenous().iter().map(|u| u.cardinality()).collect();
    let n_configs: usize = cards.iter().product();
    let mut total = vec![0.0; size];
    let mut exo = vec![0usize; cards.len()];
    let mut cur: Vec<f64> = Vec::with_capacity(size);
    let mut next: Vec<f64> = Vec::with_capacity(size);
    let mut args = Vec::with_capacity(2);
    let mut exo_args = Vec::with_capacity(2);
    let mut dist = vec![0.0; v];

    for config in 0..n_configs {
        decode_mixed(config, &cards, &mut exo);
        let w: f64 = scm.exogenous().iter().zip(&exo).map(|(u, &k)| u.probs[k]).product();
        if w == 0.0 {
            continue;
        }
        cur.clear();
        cur.push(w);
        for i in 0..t {
            let var = scm.variable(i);
            // stride of position k inside a prefix of length i
            let stride = |k: usize| v.pow((i - 1 - k) as u32);
            next.clear();
            next.resize(cur.len() * v, 0.0);
            for (idx, &p) in cur.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                args.clear();
                args.extend(var.parents.iter().map(|&k| (idx / stride(k)) % v));
                match &var.mechanism {
                    Mechanism::Noisy(op) => {
                        op.distribution_into(&args, v, &mut dist);
                        for (y, &q) in dist.iter().enumerate() {
                            next[idx * v + y] = p * q;
                        }
                    }
                    Mechanism::Table { exogenous, table } => {
                        exo_args.clear();
                        exo_args.extend(exogenous.iter().map(|&u| exo[u]));
                        let y = table[scm.table_index(i, &args, &exo_args)];
                        next[idx * v + y] = p;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        total.iter_mut().zip(&cur).for_each(|(a, b)| *a += b);
    }
    JointTable::from_probs(v, t, total)
}
