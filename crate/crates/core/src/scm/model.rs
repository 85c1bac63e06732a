use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::operator::{NoisyOperator, OpKind};
use crate::error::{CtlabError, Result};
use crate::inference::Cpt;

/// Ordered parent lists, one per position; parents always precede the child.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CausalDiagram {
    parents: Vec<Vec<usize>>,
}

impl CausalDiagram {
    pub fn new(parents: Vec<Vec<usize>>) -> Result<Self> {
        for (i, pa) in parents.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &p in pa {
                if p >= i {
                    return Err(CtlabError::InvalidScm(format!(
                        "parent {p} of position {i} is not earlier in causal order"
                    )));
                }
                if !seen.insert(p) {
                    return Err(CtlabError::InvalidScm(format!(
                        "duplicate parent {p} at position {i}"
                    )));
                }
            }
        }
        Ok(Self { parents })
    }

    /// Diagram with no edges over `n` positions.
    pub fn empty(n: usize) -> Self {
        Self { parents: vec![Vec::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn all_parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    /// 0/1 adjacency with `m[i][k] = 1` iff `k` is a parent of `i`.
    pub fn parent_matrix(&self) -> Vec<Vec<u8>> {
        let t = self.len();
        self.parents
            .iter()
            .map(|pa| {
                let mut row = vec![0u8; t];
                pa.iter().for_each(|&k| row[k] = 1);
                row
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }
}

/// A discrete exogenous variable with an explicit law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousVar {
    pub name: String,
    pub probs: Vec<f64>,
}

impl ExogenousVar {
    pub fn bernoulli(name: &str, p_one: f64) -> Self {
        Self { name: name.to_string(), probs: vec![1.0 - p_one, p_one] }
    }

    pub fn cardinality(&self) -> usize {
        self.probs.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    /// Noisy operator with private corruption noise.
    Noisy(NoisyOperator),
    /// Deterministic function of the parents and of explicit exogenous
    /// variables. `table` is indexed mixed-radix by the parent values (radix
    /// |V|, first parent most significant) followed by the exogenous values.
    Table { exogenous: Vec<usize>, table: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub parents: Vec<usize>,
    pub mechanism: Mechanism,
}

/// Discrete SCM in causal order.
#[derive(Clone, Debug, PartialEq)]
pub struct Scm {
    vocab: usize,
    variables: Vec<Variable>,
    exogenous: Vec<ExogenousVar>,
}

impl Scm {
    pub fn new(vocab: usize, variables: Vec<Variable>, exogenous: Vec<ExogenousVar>) -> Result<Self> {
        if vocab < 2 {
            return Err(CtlabError::InvalidScm(format!("vocabulary size {vocab} < 2")));
        }
        if variables.is_empty() {
            return Err(CtlabError::InvalidScm("no variables".into()));
        }
        for u in &exogenous {
            if u.probs.is_empty() || u.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(CtlabError::InvalidScm(format!("bad law for exogenous `{}`", u.name)));
            }
            let s: f64 = u.probs.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(CtlabError::InvalidScm(format!(
                    "exogenous `{}` sums to {s}, not 1",
                    u.name
                )));
            }
        }
        CausalDiagram::new(variables.iter().map(|v| v.parents.clone()).collect())?;
        for (i, var) in variables.iter().enumerate() {
            match &var.mechanism {
                Mechanism::Noisy(op) => {
                    if op.arity() != var.parents.len() {
                        return Err(CtlabError::InvalidScm(format!(
                            "position {i}: operator {} has arity {} but {} parents",
                            op.kind,
                            op.arity(),
                            var.parents.len()
                        )));
                    }
                    if !(0.0..=1.0).contains(&op.noise_p) {
                        return Err(CtlabError::InvalidScm(format!("position {i}: noise_p out of range")));
                    }
                }
                Mechanism::Table { exogenous: ex, table } => {
                    let mut size = vocab.pow(var.parents.len() as u32);
                    for &u in ex {
                        let card = exogenous
                            .get(u)
                            .ok_or_else(|| CtlabError::InvalidScm(format!("position {i}: unknown exogenous {u}")))?
                            .cardinality();
                        size *= card;
                    }
                    if table.len() != size {
                        return Err(CtlabError::InvalidScm(format!(
                            "position {i}: table has {} entries, expected {size}",
                            table.len()
                        )));
                    }
                    if table.iter().any(|&t| t >= vocab) {
                        return Err(CtlabError::InvalidScm(format!("position {i}: table token out of range")));
                    }
                }
            }
        }
        Ok(Self { vocab, variables, exogenous })
    }

    /// Operator-only SCM with variables named `v1..vT`.
    pub fn from_operators(vocab: usize, nodes: Vec<(Vec<usize>, NoisyOperator)>) -> Result<Self> {
        let variables = nodes
            .into_iter()
            .enumerate()
            .map(|(i, (parents, op))| Variable {
                name: format!("v{}", i + 1),
                parents,
                mechanism: Mechanism::Noisy(op),
            })
            .collect();
        Self::new(vocab, variables, Vec::new())
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn exogenous(&self) -> &[ExogenousVar] {
        &self.exogenous
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.variables[i].parents
    }

    pub fn position_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn diagram(&self) -> CausalDiagram {
        CausalDiagram { parents: self.variables.iter().map(|v| v.parents.clone()).collect() }
    }

    pub fn operator(&self, i: usize) -> Option<&NoisyOperator> {
        match &self.variables[i].mechanism {
            Mechanism::Noisy(op) => Some(op),
            Mechanism::Table { .. } => None,
        }
    }

    pub fn op_kind(&self, i: usize) -> Option<OpKind> {
        self.operator(i).map(|op| op.kind)
    }

    pub fn has_tables(&self) -> bool {
        self.variables.iter().any(|v| matches!(v.mechanism, Mechanism::Table { .. }))
    }

    /// True when position `i` reads an exogenous variable that another
    /// position also reads.
    pub fn is_confounded(&self, i: usize) -> bool {
        let Mechanism::Table { exogenous: mine, .. } = &self.variables[i].mechanism else {
            return false;
        };
        self.variables.iter().enumerate().any(|(k, v)| {
            k != i
                && matches!(&v.mechanism, Mechanism::Table { exogenous: theirs, .. }
                    if theirs.iter().any(|u| mine.contains(u)))
        })
    }

    pub(crate) fn table_index(&self, i: usize, parent_values: &[usize], exo_values: &[usize]) -> usize {
        let Mechanism::Table { exogenous, .. } = &self.variables[i].mechanism else {
            unreachable!("table_index on operator mechanism")
        };
        let mut idx = 0;
        for &v in parent_values {
            idx = idx * self.vocab + v;
        }
        for (&u, &val) in exogenous.iter().zip(exo_values) {
            idx = idx * self.exogenous[u].cardinality() + val;
        }
        idx
    }

    /// P(v_i | pa_i) for an unconfounded position.
    pub fn mechanism_cpt(&self, i: usize) -> Result<Cpt> {
        let var = &self.variables[i];
        let arity = var.parents.len();
        let v = self.vocab;
        let n_rows = v.pow(arity as u32);
        let mut probs = vec![0.0; n_rows * v];
        let mut args = vec![0usize; arity];
        match &var.mechanism {
            Mechanism::Noisy(op) => {
                for row in 0..n_rows {
                    decode_into(row, v, &mut args);
                    op.distribution_into(&args, v, &mut probs[row * v..(row + 1) * v]);
                }
            }
            Mechanism::Table { exogenous, table } => {
                if self.is_confounded(i) {
                    return Err(CtlabError::Unsupported(format!(
                        "position {i} shares exogenous noise; no local mechanism table"
                    )));
                }
                let cards: Vec<usize> = exogenous.iter().map(|&u| self.exogenous[u].cardinality()).collect();
                let n_exo: usize = cards.iter().product();
                let mut exo = vec![0usize; cards.len()];
                for row in 0..n_rows {
                    for e in 0..n_exo {
                        decode_mixed(e, &cards, &mut exo);
                        let w: f64 = exogenous
                            .iter()
                            .zip(&exo)
                            .map(|(&u, &val)| self.exogenous[u].probs[val])
                            .product();
                        let y = table[row * n_exo + e];
                        probs[row * v + y] += w;
                    }
                }
            }
        }
        Cpt::from_probs(arity, v, probs, 0.0, Vec::new())
    }

    /// Canonical description of the mechanism at `i` (function plus the law
    /// of its exogenous inputs). Equal signatures mean equal mechanisms.
    pub fn mechanism_signature(&self, i: usize) -> String {
        let var = &self.variables[i];
        match &var.mechanism {
            // the corruption level of `unif` does not change its law
            Mechanism::Noisy(op) if op.kind == OpKind::Unif => "op:unif".to_string(),
            Mechanism::Noisy(op) => {
                format!("op:{}:{:016x}:{}", op.kind, op.noise_p.to_bits(), var.parents.len())
            }
            Mechanism::Table { exogenous, table } => {
                let laws: Vec<String> = exogenous
                    .iter()
                    .map(|&u| {
                        let bits: Vec<String> =
                            self.exogenous[u].probs.iter().map(|p| format!("{:016x}", p.to_bits())).collect();
                        bits.join(",")
                    })
                    .collect();
                format!("table:{}:{:?}:[{}]", var.parents.len(), table, laws.join(";"))
            }
        }
    }
}

/// Decodes `idx` into `out.len()` base-`radix` digits, most significant first.
pub(crate) fn decode_into(mut idx: usize, radix: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = idx % radix;
        idx /= radix;
    }
}

pub(crate) fn decode_mixed(mut idx: usize, radices: &[usize], out: &mut [usize]) {
    for (d, &r) in out.iter_mut().zip(radices).rev() {
        *d = idx % r;
        idx /= r;
    }
}

pub(crate) fn encode(digits: &[usize], radix: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * radix + d)
}
