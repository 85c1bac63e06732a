//! Response-type parameterisation of the binary bow graph.
//!
//! A unit is described by an X-type and a Y-type. The X-type says which
//! value `x` takes under the source mechanism that differs from the target
//! (first bit) and under the target mechanism (second bit): constant-0,
//! copy, flip, constant-1 read as functions of that switch. The Y-type is one
//! of the four maps `x -> y` (`h(0)`, `h(1)` as bits): constant-0, copy,
//! flip, constant-1. Any dependence on exogenous noise is absorbed into the
//! joint law `q` over the 16 cells. A source sharing the target's `y`
//! mechanism sees the same Y-type for the same unit, so its joint is a
//! linear image of `q`; a source sharing `x` only pins the target's
//! `x`-marginal.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lp::{minimize, LpOutcome};
use crate::error::{CtlabError, Result};

pub const CELLS: usize = 16;

/// `P(x, y)` indexed `[x][y]`.
pub type BinaryJoint = [[f64; 2]; 2];

/// Cell index of X-type `rx` and Y-type `h`.
pub fn cell(rx: usize, h: usize) -> usize {
    rx * 4 + h
}

/// `x` under the differing source mechanism and under the target mechanism.
pub fn x_values(rx: usize) -> (usize, usize) {
    (rx >> 1, rx & 1)
}

pub fn response(h: usize, x: usize) -> usize {
    if x == 0 {
        h >> 1
    } else {
        h & 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseTypePolytope {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    labels: Vec<String>,
}

fn indicator(f: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    (0..CELLS).map(|c| if f(c / 4, c % 4) { 1.0 } else { 0.0 }).collect()
}

fn check_joint(p: &BinaryJoint, j: usize) -> Result<()> {
    let total: f64 = p.iter().flatten().sum();
    if p.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(CtlabError::OutOfRange(format!("source {j} joint {p:?} is not a distribution")));
    }
    Ok(())
}

/// Constraints tying `q` to the source joints. `delta[j]` holds the
/// positions (0 for `x`, 1 for `y`) whose mechanism in source `j` differs
/// from the target. At most one source may differ in `x` alone.
pub fn canonical_constraints(sources: &[BinaryJoint], delta: &[BTreeSet<usize>]) -> Result<ResponseTypePolytope> {
    if sources.len() != delta.len() {
        return Err(CtlabError::DimensionMismatch(format!("{} source joints, {} discrepancy sets", sources.len(), delta.len())));
    }
    let mut rows = vec![vec![1.0; CELLS]];
    let mut rhs = vec![1.0];
    let mut labels = vec!["total".to_string()];
    let mut x_switch_used = false;
    for (j, (p, d)) in sources.iter().zip(delta).enumerate() {
        check_joint(p, j)?;
        if d.iter().any(|&i| i > 1) {
            return Err(CtlabError::Unsupported(format!("discrepancy set {d:?} outside the two-variable graph")));
        }
        match (d.contains(&0), d.contains(&1)) {
            (false, false) => {
                for x in 0..2 {
                    for y in 0..2 {
                        rows.push(indicator(|rx, h| x_values(rx).1 == x && response(h, x) == y));
                        rhs.push(p[x][y]);
                        labels.push(format!("source-{j} P(x={x},y={y}) as target"));
                    }
                }
            }
            (false, true) => {
                for x in 0..2 {
                    rows.push(indicator(|rx, _| x_values(rx).1 == x));
                    rhs.push(p[x][0] + p[x][1]);
                    labels.push(format!("source-{j} P(x={x})"));
                }
            }
            (true, false) => {
                if x_switch_used {
                    return Err(CtlabError::Unsupported("two sources with distinct x mechanisms".into()));
                }
                x_switch_used = true;
                for x in 0..2 {
                    for y in 0..2 {
                        rows.push(indicator(|rx, h| x_values(rx).0 == x && response(h, x) == y));
                        rhs.push(p[x][y]);
                        labels.push(format!("source-{j} P(x={x},y={y}) via shared y"));
                    }
                }
            }
            (true, true) => {}
        }
    }
    let poly = ResponseTypePolytope { rows, rhs, labels };
    match minimize(&poly.rows, &poly.rhs, &[0.0; CELLS]) {
        LpOutcome::Optimal { .. } => Ok(poly),
        _ => Err(CtlabError::Infeasible("no response-type law reproduces the source joints".into())),
    }
}

impl ResponseTypePolytope {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Largest equality violation, counting negative cells as violations.
    pub fn residual(&self, q: &[f64]) -> f64 {
        let eq = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| (r.iter().zip(q).map(|(a, v)| a * v).sum::<f64>() - b).abs())
            .fold(0.0, f64::max);
        q.iter().map(|v| -v).fold(eq, f64::max)
    }

    pub fn contains(&self, q: &[f64], tol: f64) -> bool {
        q.len() == CELLS && self.residual(q) <= tol
    }

    /// `P*(x, y)` under `q`.
    pub fn target_joint(q: &[f64]) -> BinaryJoint {
        let mut p = [[0.0; 2]; 2];
        for (c, v) in q.iter().enumerate() {
            let x = x_values(c / 4).1;
            p[x][response(c % 4, x)] += v;
        }
        p
    }

    /// Numerator and denominator weights of `P*(y | x)`.
    pub fn ratio_forms(x: usize, y: usize) -> (Vec<f64>, Vec<f64>) {
        (
            indicator(|rx, h| x_values(rx).1 == x && response(h, x) == y),
            indicator(|rx, _| x_values(rx).1 == x),
        )
    }

    /// Every vertex, as basic feasible solutions of the equality system.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        // keep a maximal independent subset of rows
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..self.rows.len() {
            let mut trial = kept.clone();
            trial.push(i);
            let m = DMatrix::from_fn(trial.len(), CELLS, |r, c| self.rows[trial[r]][c]);
            if m.rank(1e-9) == trial.len() {
                kept = trial;
            }
        }
        let r = kept.len();
        let a = DMatrix::from_fn(r, CELLS, |i, c| self.rows[kept[i]][c]);
        let b = DVector::from_fn(r, |i, _| self.rhs[kept[i]]);
        let mut found: Vec<Vec<f64>> = combinations(CELLS, r)
            .into_par_iter()
            .filter_map(|cols| {
                let basis = DMatrix::from_fn(r, r, |i, k| a[(i, cols[k])]);
                let sol = basis.lu().solve(&b)?;
                let mut q = vec![0.0; CELLS];
                for (k, &c) in cols.iter().enumerate() {
                    q[c] = sol[k];
                }
                if q.iter().any(|v| *v < -1e-10) || self.residual(&q) > 1e-9 {
                    return None;
                }
                q.iter_mut().for_each(|v| *v = v.max(0.0));
                Some(q)
            })
            .collect();
        found.sort_by(|x, y| x.iter().zip(y).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        found.dedup_by(|x, y| x.iter().zip(y.iter()).all(|(a, b)| (a - b).abs() < 1e-9));
        found
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(p: [f64; 4]) -> BinaryJoint {
        [[p[0], p[1]], [p[2], p[3]]]
    }

    #[test]
    fn combination_count() {
        assert_eq!(combinations(16, 3).len(), 560);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn unconstrained_polytope_is_the_simplex() {
        let p = canonical_constraints(&[], &[]).unwrap();
        let v = p.vertices();
        assert_eq!(v.len(), CELLS);
        assert!(v.iter().all(|q| q.iter().filter(|&&x| x == 1.0).count() == 1));
    }

    #[test]
    fn inconsistent_shared_sources_are_infeasible() {
        let a = joint([0.25, 0.25, 0.25, 0.25]);
        let b = joint([0.4, 0.1, 0.25, 0.25]);
        let all = BTreeSet::new();
        let r = canonical_constraints(&[a, b], &[all.clone(), all]);
        assert!(matches!(r, Err(CtlabError::Infeasible(_))));
    }

    #[test]
    fn fully_shared_source_pins_the_target_joint() {
        let a = joint([0.1, 0.2, 0.3, 0.4]);
        let p = canonical_constraints(&[a], &[BTreeSet::new()]).unwrap();
        for q in p.vertices() {
            let t = ResponseTypePolytope::target_joint(&q);
            for x in 0..2 {
                for y in 0..2 {
                    assert!((t[x][y] - a[x][y]).abs() < 1e-9);
                }
            }
        }
    }
}
