//! Fine-tuning on target data: structure and mechanism choice against the
//! frozen pretrained tables, target-only fallbacks, transport indicators and
//! the assembled mixture circuit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pretrain::PretrainResult;
use crate::adaptation::parent_choices;
use crate::error::{CtlabError, Result};
use crate::inference::{fit_cpt, CircuitNode, CircuitPredictor, Cpt, RowSet};
use crate::scm::{decode_into, CausalDiagram, Dataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetStructure {
    pub parents: CausalDiagram,
    pub phi: Vec<usize>,
    /// Fine-tuning NLL of the chosen (parents, class) per position.
    pub nll: Vec<f64>,
}

fn mean_nll(cpt: &Cpt, rows: &RowSet) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .map(|(x, y)| {
            let p = cpt.prob(y, x);
            if p > 0.0 {
                -p.ln()
            } else {
                f64::INFINITY
            }
        })
        .sum();
    total / rows.len() as f64
}

/// Per position, the (ordered parent tuple, class) whose frozen table has
/// the lowest NLL on `ft`. Ties go to the smaller class, then the earlier
/// tuple.
pub fn finetune_target_structure(pre: &PretrainResult, ft: &Dataset, max_parents: usize) -> Result<TargetStructure> {
    let t = ft.n_vars();
    let picks = (0..t)
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, usize, Vec<usize>)> = None;
            for pa in parent_choices(i, max_parents) {
                let rows = RowSet::from_dataset(ft, i, &pa)?;
                for (c, psi) in pre.psi.iter().enumerate() {
                    if psi.arity() != pa.len() {
                        continue;
                    }
                    let nll = mean_nll(psi, &rows);
                    let better = match &best {
                        None => true,
                        Some((b, bc, _)) => nll < *b || (nll == *b && c < *bc),
                    };
                    if better {
                        best = Some((nll, c, pa.clone()));
                    }
                }
            }
            best.ok_or_else(|| CtlabError::Infeasible(format!("no pretrained class fits position {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let nll = picks.iter().map(|p| p.0).collect();
    let phi = picks.iter().map(|p| p.1).collect();
    let parents = CausalDiagram::new(picks.into_iter().map(|p| p.2).collect())?;
    Ok(TargetStructure { parents, phi, nll })
}

/// Target-only table for one position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fallback {
    pub parents: Vec<usize>,
    pub cpt: Cpt,
}

/// `v_i | v_{i-c..i-1}` fitted on `tr`, conditioning on at most `arity_cap`
/// of the most recent positions.
pub fn fit_target_only_fallbacks(tr: &Dataset, arity_cap: usize, vocab: usize, alpha: f64) -> Result<Vec<Fallback>> {
    (0..tr.n_vars())
        .map(|i| {
            let parents: Vec<usize> = (i.saturating_sub(arity_cap)..i).collect();
            let cpt = fit_cpt(&RowSet::from_dataset(tr, i, &parents)?, vocab, alpha)?;
            Ok(Fallback { parents, cpt })
        })
        .collect()
}

/// Weight `s` in `[0, 1]` minimising `-mean log(s p + (1 - s) q)`, by ternary
/// search to 1e-4 followed by a comparison with both endpoints. Ties prefer
/// `s = 1`.
pub fn optimal_mixture(p: &[f64], q: &[f64]) -> f64 {
    if p.is_empty() {
        return 1.0;
    }
    let f = |s: f64| -> f64 {
        p.iter()
            .zip(q)
            .map(|(&a, &b)| {
                let m = s * a + (1.0 - s) * b;
                if m > 0.0 {
                    -m.ln()
                } else {
                    f64::INFINITY
                }
            })
            .sum::<f64>()
            / p.len() as f64
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-4 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    let tol = 1e-12;
    let (f1, f0, fm) = (f(1.0), f(0.0), f(mid));
    if f1 <= fm + tol && f1 <= f0 + tol {
        1.0
    } else if f0 < fm {
        0.0
    } else {
        mid
    }
}

/// Transport indicator per position from held-out rows.
pub fn learn_transport_indicators(
    candidates: &[(Vec<usize>, &Cpt)],
    fallbacks: &[Fallback],
    te: &Dataset,
) -> Result<Vec<f64>> {
    if candidates.len() != fallbacks.len() {
        return Err(CtlabError::DimensionMismatch("one candidate and one fallback per position".into()));
    }
    candidates
        .par_iter()
        .zip(fallbacks)
        .enumerate()
        .map(|(i, ((pa, psi), fb))| {
            let a = RowSet::from_dataset(te, i, pa)?;
            let b = RowSet::from_dataset(te, i, &fb.parents)?;
            let p: Vec<f64> = a.iter().map(|(x, y)| psi.prob(y, x)).collect();
            let q: Vec<f64> = b.iter().map(|(x, y)| fb.cpt.prob(y, x)).collect();
            Ok(optimal_mixture(&p, &q))
        })
        .collect()
}

/// Everything fine-tuning produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneResult {
    pub structure: TargetStructure,
    pub fallbacks: Vec<Fallback>,
    pub s: Vec<f64>,
}

/// Mixture `s psi(v_i | pa*_i) + (1 - s) mu*_i(v_i | fallback parents)` per
/// position from `prefix_len` on, tabulated over the union of both scopes
/// (only one scope when `s` is 0 or 1), composed into a circuit.
pub fn assemble_final_predictor(
    pre: &PretrainResult,
    ft: &FinetuneResult,
    prefix_len: usize,
    vocab: usize,
    max_width: usize,
) -> Result<CircuitPredictor> {
    let t = ft.structure.phi.len();
    let nodes = (prefix_len..t)
        .map(|i| {
            let pa = ft.structure.parents.parents(i);
            let psi = &pre.psi[ft.structure.phi[i]];
            let fb = &ft.fallbacks[i];
            let s = ft.s[i];
            let mut scope: Vec<usize> = Vec::new();
            if s > 0.0 {
                scope.extend_from_slice(pa);
            }
            if s < 1.0 {
                scope.extend_from_slice(&fb.parents);
            }
            scope.sort();
            scope.dedup();
            let n_rows = vocab.pow(scope.len() as u32);
            let mut probs = Vec::with_capacity(n_rows * vocab);
            let mut vals = vec![0usize; scope.len()];
            let pick = |vals: &[usize], which: &[usize]| -> Vec<usize> {
                which.iter().map(|p| vals[scope.iter().position(|q| q == p).expect("in scope")]).collect()
            };
            for r in 0..n_rows {
                decode_into(r, vocab, &mut vals);
                let a = if s > 0.0 { psi.row(&pick(&vals, pa)).to_vec() } else { vec![0.0; vocab] };
                let b = if s < 1.0 { fb.cpt.row(&pick(&vals, &fb.parents)).to_vec() } else { vec![0.0; vocab] };
                probs.extend(a.iter().zip(&b).map(|(x, y)| s * x + (1.0 - s) * y));
            }
            let cpt = Cpt::from_probs(scope.len(), vocab, probs, 0.0, Vec::new())?;
            Ok(CircuitNode { position: i, parents: scope, cpt })
        })
        .collect::<Result<Vec<_>>>()?;
    CircuitPredictor::new(vocab, prefix_len, nodes, max_width)
}
