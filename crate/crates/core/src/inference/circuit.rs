//! Composed predictors: per-position tables chained in causal order and
//! marginalised down to `v_T | v_{1:M}`.

use serde::{Deserialize, Serialize};

use std::collections::HashMap;

use super::cpt::{Cpt, RowSet};
use super::factor::{eliminate, Factor, Reduce};
use super::risk::{nll_risk, Predictor};
use crate::error::{CtlabError, Result};
use crate::scm::joint_budget;

pub const DEFAULT_MAX_WIDTH: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitNode {
    pub position: usize,
    pub parents: Vec<usize>,
    pub cpt: Cpt,
}

/// Frontier kept after each node: generated positions still read downstream
/// (the query position is always kept).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationPlan {
    pub frontiers: Vec<Vec<usize>>,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitPredictor {
    vocab: usize,
    prefix_len: usize,
    nodes: Vec<CircuitNode>,
    plan: EliminationPlan,
}

impl CircuitPredictor {
    /// `nodes` must cover positions `prefix_len..T` in order.
    pub fn new(vocab: usize, prefix_len: usize, nodes: Vec<CircuitNode>, max_width: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(CtlabError::EmptyInput("circuit without query position".into()));
        }
        for (k, node) in nodes.iter().enumerate() {
            if node.position != prefix_len + k {
                return Err(CtlabError::DimensionMismatch(format!(
                    "node {k} sits at position {}, expected {}",
                    node.position,
                    prefix_len + k
                )));
            }
            if node.parents.iter().any(|&p| p >= node.position) {
                return Err(CtlabError::InvalidScm(format!("position {} has a non-causal parent", node.position)));
            }
            if node.cpt.arity() != node.parents.len() || node.cpt.vocab() != vocab {
                return Err(CtlabError::DimensionMismatch(format!(
                    "position {}: table arity {} for {} parents",
                    node.position,
                    node.cpt.arity(),
                    node.parents.len()
                )));
            }
        }
        let plan = plan(prefix_len, &nodes);
        if plan.width > max_width {
            return Err(CtlabError::BudgetExceeded(format!("frontier width {} exceeds {max_width}", plan.width)));
        }
        Ok(Self { vocab, prefix_len, nodes, plan })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    /// Total number of positions T.
    pub fn n_vars(&self) -> usize {
        self.prefix_len + self.nodes.len()
    }

    pub fn nodes(&self) -> &[CircuitNode] {
        &self.nodes
    }

    pub fn plan(&self) -> &EliminationPlan {
        &self.plan
    }

    fn query(&self) -> usize {
        self.n_vars() - 1
    }

    /// Distribution of the last position given a full prefix, by frontier
    /// elimination in causal order.
    pub fn predict(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        if prefix.len() != self.prefix_len {
            return Err(CtlabError::DimensionMismatch(format!("prefix of length {}, expected {}", prefix.len(), self.prefix_len)));
        }
        if prefix.iter().any(|&t| t >= self.vocab) {
            return Err(CtlabError::OutOfRange("prefix token outside vocabulary".into()));
        }
        let v = self.vocab;
        let budget = joint_budget();
        let mut front = Factor::scalar(v, 1.0);
        for (node, keep) in self.nodes.iter().zip(&self.plan.frontiers) {
            // local factor over the non-prefix parents and the node itself
            let free: Vec<usize> = node.parents.iter().copied().filter(|&p| p >= self.prefix_len).collect();
            let mut scope = free.clone();
            scope.push(node.position);
            let mut values = Vec::with_capacity(v.pow(scope.len() as u32));
            let mut args = vec![0usize; node.parents.len()];
            let mut free_vals = vec![0usize; free.len()];
            for idx in 0..v.pow(free.len() as u32) {
                crate::scm::decode_into(idx, v, &mut free_vals);
                for (a, &p) in args.iter_mut().zip(&node.parents) {
                    *a = if p < self.prefix_len { prefix[p] } else { free_vals[free.iter().position(|&f| f == p).unwrap()] };
                }
                values.extend_from_slice(node.cpt.row(&args));
            }
            let local = Factor::new(scope, v, values)?;
            front = front.product(&local, budget)?;
            for var in front.scope().to_vec() {
                if !keep.contains(&var) {
                    front = front.sum_out(var);
                }
            }
        }
        let out = front.into_values();
        debug_assert_eq!(out.len(), v);
        Ok(out)
    }

    /// Brute-force sum over every intermediate assignment; exponential, for
    /// cross-checks on small circuits.
    pub fn predict_brute_force(&self, prefix: &[usize]) -> Vec<f64> {
        let v = self.vocab;
        let n_mid = self.nodes.len() - 1;
        let mut out = vec![0.0; v];
        let mut full: Vec<usize> = prefix.to_vec();
        full.resize(self.n_vars(), 0);
        let mut args = Vec::new();
        for idx in 0..v.pow(self.nodes.len() as u32) {
            crate::scm::decode_into(idx, v, &mut full[self.prefix_len..]);
            let mut w = 1.0;
            for node in &self.nodes {
                args.clear();
                args.extend(node.parents.iter().map(|&p| full[p]));
                w *= node.cpt.prob(full[node.position], &args);
            }
            out[full[self.prefix_len + n_mid]] += w;
        }
        out
    }

    /// Precomputes `v_T | v_S` where `S` is the set of prefix positions the
    /// query actually depends on. Positions that cannot reach the query are
    /// dropped first.
    pub fn compile(&self, budget: usize) -> Result<CompiledPredictor> {
        let q = self.query();
        let mut relevant = vec![false; self.n_vars()];
        relevant[q] = true;
        for node in self.nodes.iter().rev() {
            if relevant[node.position] {
                node.parents.iter().for_each(|&p| relevant[p] = true);
            }
        }
        let factors: Vec<Factor> = self
            .nodes
            .iter()
            .filter(|n| relevant[n.position])
            .map(|n| Factor::from_cpt(&n.cpt, &n.parents, n.position))
            .collect();
        let order: Vec<usize> = (self.prefix_len..q).filter(|&i| relevant[i]).collect();
        let joint = eliminate(factors, &order, Reduce::Sum, self.vocab, budget)?;
        let scope: Vec<usize> = (0..self.prefix_len).filter(|&i| relevant[i]).collect();
        let mut layout = scope.clone();
        layout.push(q);
        let f = joint.reorder(&layout)?;
        let v = self.vocab;
        let mut probs = f.into_values();
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
        let cpt = Cpt::from_probs(scope.len(), v, probs, 0.0, flagged)?;
        Ok(CompiledPredictor { prefix_len: self.prefix_len, scope, cpt })
    }
}

impl Predictor for CircuitPredictor {
    fn vocab(&self) -> usize {
        self.vocab
    }

    fn arity(&self) -> usize {
        self.prefix_len
    }

    fn distribution(&self, x: &[usize], out: &mut [f64]) {
        out.copy_from_slice(&self.predict(x).expect("prefix checked by the caller"));
    }
}

impl CircuitPredictor {
    /// Tabulated form when it fits `budget`, otherwise `None`.
    pub fn try_compile(&self, budget: usize) -> Result<Option<CompiledPredictor>> {
        match self.compile(budget) {
            Ok(c) => Ok(Some(c)),
            Err(CtlabError::BudgetExceeded(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Mean `-log μ(y | prefix)` over rows whose `x` is the full prefix.
    pub fn nll(&self, rows: &RowSet) -> Result<f64> {
        if let Some(c) = self.try_compile(joint_budget())? {
            return nll_risk(&c, rows);
        }
        if rows.arity() != self.prefix_len {
            return Err(CtlabError::DimensionMismatch(format!("rows of arity {} for prefix {}", rows.arity(), self.prefix_len)));
        }
        if rows.is_empty() {
            return Err(CtlabError::EmptyInput("no evaluation rows".into()));
        }
        let mut memo: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
        let mut total = 0.0;
        for (x, y) in rows.iter() {
            if !memo.contains_key(x) {
                memo.insert(x.to_vec(), self.predict(x)?);
            }
            let p = memo[x][y];
            total += if p > 0.0 { -p.ln() } else { f64::INFINITY };
        }
        Ok(total / rows.len() as f64)
    }
}

fn plan(prefix_len: usize, nodes: &[CircuitNode]) -> EliminationPlan {
    let last = prefix_len + nodes.len() - 1;
    let mut frontiers = Vec::with_capacity(nodes.len());
    let mut current: Vec<usize> = Vec::new();
    let mut width = 0;
    for (k, node) in nodes.iter().enumerate() {
        current.push(node.position);
        let later = &nodes[k + 1..];
        current.retain(|&v| v == last || later.iter().any(|n| n.parents.contains(&v)));
        width = width.max(current.len());
        frontiers.push(current.clone());
    }
    EliminationPlan { frontiers, width }
}

/// Shorthand for [`CircuitPredictor::predict`].
pub fn variable_eliminate(circuit: &CircuitPredictor, prefix: &[usize]) -> Result<Vec<f64>> {
    circuit.predict(prefix)
}

/// `v_T | v_{1:M}` tabulated over the relevant prefix positions only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledPredictor {
    prefix_len: usize,
    scope: Vec<usize>,
    cpt: Cpt,
}

impl CompiledPredictor {
    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cpt(&self) -> &Cpt {
        &self.cpt
    }

    pub fn row(&self, prefix: &[usize]) -> &[f64] {
        let idx = self.scope.iter().fold(0, |acc, &p| acc * self.cpt.vocab() + prefix[p]);
        self.cpt.row_at(idx)
    }
}

impl Predictor for CompiledPredictor {
    fn vocab(&self) -> usize {
        self.cpt.vocab()
    }

    fn arity(&self) -> usize {
        self.prefix_len
    }

    fn distribution(&self, x: &[usize], out: &mut [f64]) {
        out.copy_from_slice(self.row(x));
    }
}
