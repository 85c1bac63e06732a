//! Log-loss risks, against samples or against exact truth.

use serde::{Deserialize, Serialize};

use super::cpt::{Cpt, RowSet};
use super::factor::{eliminate, Factor, Reduce};
use crate::error::{CtlabError, Result};
use crate::scm::{decode_into, sample_dataset, table_size, DomainId, JointTable, Scm};

/// A conditional distribution `μ(y | x)` over a fixed-length `x`.
pub trait Predictor: Sync {
    fn vocab(&self) -> usize;
    fn arity(&self) -> usize;
    fn distribution(&self, x: &[usize], out: &mut [f64]);
}

impl Predictor for Cpt {
    fn vocab(&self) -> usize {
        Cpt::vocab(self)
    }

    fn arity(&self) -> usize {
        Cpt::arity(self)
    }

    fn distribution(&self, x: &[usize], out: &mut [f64]) {
        out.copy_from_slice(self.row(x));
    }
}

fn neg_log(p: f64) -> f64 {
    if p > 0.0 {
        -p.ln()
    } else {
        f64::INFINITY
    }
}

/// Mean `-log μ(y|x)` over rows.
pub fn nll_risk(pred: &dyn Predictor, rows: &RowSet) -> Result<f64> {
    if rows.arity() != pred.arity() {
        return Err(CtlabError::DimensionMismatch(format!("rows of arity {} for predictor of arity {}", rows.arity(), pred.arity())));
    }
    if rows.is_empty() {
        return Err(CtlabError::EmptyInput("no evaluation rows".into()));
    }
    let mut buf = vec![0.0; pred.vocab()];
    let total: f64 = rows
        .iter()
        .map(|(x, y)| {
            pred.distribution(x, &mut buf);
            neg_log(buf[y])
        })
        .sum();
    Ok(total / rows.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub nll: f64,
    pub bayes_nll: f64,
    pub excess: f64,
    pub kl: f64,
}

/// Exact `P(x, y)` for a query `y | x`, laid out with `y` least significant.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryTruth {
    arity: usize,
    vocab: usize,
    joint: Vec<f64>,
}

impl QueryTruth {
    pub fn new(arity: usize, vocab: usize, joint: Vec<f64>) -> Result<Self> {
        if joint.len() != vocab.pow(arity as u32 + 1) {
            return Err(CtlabError::DimensionMismatch("query table size".into()));
        }
        Ok(Self { arity, vocab, joint })
    }

    pub fn from_joint(joint: &JointTable, target: usize, given: &[usize]) -> Result<Self> {
        let mut vars = given.to_vec();
        vars.push(target);
        Ok(Self { arity: given.len(), vocab: joint.vocab(), joint: joint.marginal(&vars)? })
    }

    /// Exact query table by elimination over the mechanism tables of an
    /// unconfounded SCM.
    pub fn from_scm(scm: &Scm, target: usize, given: &[usize], budget: usize) -> Result<Self> {
        let mut keep = given.to_vec();
        keep.push(target);
        if keep.iter().any(|&k| k >= scm.len()) {
            return Err(CtlabError::OutOfRange("query position outside the SCM".into()));
        }
        // positions after the last kept one are barren
        let last = *keep.iter().max().expect("non-empty");
        let factors = (0..=last)
            .map(|i| Ok(Factor::from_cpt(&scm.mechanism_cpt(i)?, scm.parents(i), i)))
            .collect::<Result<Vec<_>>>()?;
        let order: Vec<usize> = (0..=last).filter(|i| !keep.contains(i)).collect();
        let f = eliminate(factors, &order, Reduce::Sum, scm.vocab(), budget)?.reorder(&keep)?;
        Ok(Self { arity: given.len(), vocab: scm.vocab(), joint: f.into_values() })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    /// `P(y | x)`; zero-mass rows come back uniform and flagged.
    pub fn conditional(&self) -> Cpt {
        let v = self.vocab;
        let mut probs = self.joint.clone();
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
        Cpt::from_probs(self.arity, v, probs, 0.0, flagged).expect("normalised rows")
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.joint.chunks_exact(self.vocab).map(|r| r.iter().sum()).collect()
    }
}

/// Exact risk of `pred` under `truth`. The excess is computed as
/// `nll - bayes_nll`, the KL term independently row by row.
pub fn true_risk(pred: &dyn Predictor, truth: &QueryTruth) -> Result<RiskReport> {
    if pred.arity() != truth.arity || pred.vocab() != truth.vocab {
        return Err(CtlabError::DimensionMismatch(format!(
            "predictor ({}, |V|={}) against query ({}, |V|={})",
            pred.arity(),
            pred.vocab(),
            truth.arity,
            truth.vocab
        )));
    }
    let v = truth.vocab;
    let mut x = vec![0usize; truth.arity];
    let mut mu = vec![0.0; v];
    let (mut nll, mut bayes, mut kl) = (0.0, 0.0, 0.0);
    for (r, row) in truth.joint.chunks_exact(v).enumerate() {
        let px: f64 = row.iter().sum();
        if px <= 0.0 {
            continue;
        }
        decode_into(r, v, &mut x);
        pred.distribution(&x, &mut mu);
        let mut row_kl = 0.0;
        for (y, &pxy) in row.iter().enumerate() {
            if pxy <= 0.0 {
                continue;
            }
            let p = pxy / px;
            nll += pxy * neg_log(mu[y]);
            bayes += pxy * neg_log(p);
            row_kl += p * (p.ln() - mu[y].ln());
        }
        kl += px * row_kl;
    }
    Ok(RiskReport { nll, bayes_nll: bayes, excess: nll - bayes, kl })
}

/// Risk against a joint table for `target | given`.
pub fn true_risk_from_joint(pred: &dyn Predictor, joint: &JointTable, target: usize, given: &[usize]) -> Result<RiskReport> {
    true_risk(pred, &QueryTruth::from_joint(joint, target, given)?)
}

/// Exact truth for `target | given` by whichever route fits the budget:
/// elimination for unconfounded SCMs, full enumeration otherwise.
pub fn query_truth(scm: &Scm, target: usize, given: &[usize], budget: usize) -> Result<QueryTruth> {
    if scm.has_tables() {
        let joint = crate::scm::exact_joint(scm, budget)?;
        return QueryTruth::from_joint(&joint, target, given);
    }
    table_size(scm.vocab(), given.len() + 1, budget)?;
    QueryTruth::from_scm(scm, target, given, budget)
}

/// Monte Carlo NLL with its standard error, for queries too large to
/// evaluate exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRisk {
    pub nll: f64,
    pub std_error: f64,
    pub n: usize,
}

pub fn monte_carlo_risk(pred: &dyn Predictor, scm: &Scm, target: usize, given: &[usize], n: usize, seed: u64) -> Result<MonteCarloRisk> {
    if n < 2 {
        return Err(CtlabError::EmptyInput("Monte Carlo risk needs at least two rows".into()));
    }
    let data = sample_dataset(scm, n, seed, DomainId::Target);
    let rows = RowSet::from_dataset(&data, target, given)?;
    let mut buf = vec![0.0; pred.vocab()];
    let losses: Vec<f64> = rows
        .iter()
        .map(|(x, y)| {
            pred.distribution(x, &mut buf);
            neg_log(buf[y])
        })
        .collect();
    let mean = losses.iter().sum::<f64>() / n as f64;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(MonteCarloRisk { nll: mean, std_error: (var / n as f64).sqrt(), n })
}
