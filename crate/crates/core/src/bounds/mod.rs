//! Partial transport of `P*(y | x)` in the binary bow graph, where a hidden
//! common cause of `x` and `y` blocks point transport: response-type
//! polytope, sharp bounds, the minimax predictor and ERM-versus-minimax risk
//! curves.

mod cro;
mod curve;
mod interval;
mod lp;
mod polytope;

pub use cro::{cro_predictor, cross_entropy, minimax_probability, worst_case_risk, CroPredictor};
pub use curve::{conditional_risk, erm_vs_cro_curve, CurveConfig, CurveRow, CurveSummary, RiskCurve, METHODS};
pub use interval::{partial_transport_bounds, BoundEntry, BoundsResult, WITNESS_TOL};
pub use lp::{fractional_optimum, minimize, FractionalOptimum, LpOutcome};
pub use polytope::{canonical_constraints, cell, response, x_values, BinaryJoint, ResponseTypePolytope, CELLS};

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CtlabError, Result};
use crate::scm::{exact_joint, DiscrepancyOracle, DomainCollection, Scm};

/// Exact `P(x, y)` of a binary two-variable SCM.
pub fn binary_joint(scm: &Scm) -> Result<BinaryJoint> {
    if scm.len() != 2 || scm.vocab() != 2 || scm.parents(1) != [0] || !scm.parents(0).is_empty() {
        return Err(CtlabError::Unsupported("bounds need a binary x -> y SCM".into()));
    }
    let j = exact_joint(scm, 16)?;
    Ok([[j.prob(&[0, 0]), j.prob(&[0, 1])], [j.prob(&[1, 0]), j.prob(&[1, 1])]])
}

pub fn conditional_one(p: &BinaryJoint, x: usize) -> f64 {
    p[x][1] / (p[x][0] + p[x][1])
}

/// Source joints, their discrepancy sets and the (held-back) target joint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowProblem {
    pub sources: Vec<BinaryJoint>,
    pub delta: Vec<BTreeSet<usize>>,
    pub target: BinaryJoint,
}

impl BowProblem {
    pub fn from_collection(dc: &DomainCollection) -> Result<Self> {
        let oracle = DiscrepancyOracle::induced(dc);
        Ok(Self {
            sources: dc.sources.iter().map(binary_joint).collect::<Result<_>>()?,
            delta: (0..dc.n_sources()).map(|j| oracle.delta_set(j)).collect(),
            target: binary_joint(&dc.target)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowAnalysis {
    pub problem: BowProblem,
    pub polytope: ResponseTypePolytope,
    pub bounds: BoundsResult,
    /// Range of `P*(x = 1)` over the polytope.
    pub px1_range: (f64, f64),
    pub cro: CroPredictor,
}

fn linear_range(poly: &ResponseTypePolytope, w: &[f64]) -> Result<(f64, f64)> {
    let neg: Vec<f64> = w.iter().map(|v| -v).collect();
    match (minimize(poly.rows(), poly.rhs(), w), minimize(poly.rows(), poly.rhs(), &neg)) {
        (LpOutcome::Optimal { value: lo, .. }, LpOutcome::Optimal { value: hi, .. }) => Ok((lo, -hi)),
        _ => Err(CtlabError::Infeasible("empty response-type polytope".into())),
    }
}

/// Bounds and minimax predictor from the sources alone.
pub fn analyze_bow(problem: BowProblem) -> Result<BowAnalysis> {
    let polytope = canonical_constraints(&problem.sources, &problem.delta)?;
    let bounds = partial_transport_bounds(&polytope)?;
    let (_, den) = ResponseTypePolytope::ratio_forms(1, 1);
    let px1_range = linear_range(&polytope, &den)?;
    let cro = cro_predictor(&bounds, px1_range);
    Ok(BowAnalysis { problem, polytope, bounds, px1_range, cro })
}

/// Range of `P*(y | x)` seen over random feasible laws. Each draw mixes one to
/// three random vertices with flat Dirichlet weights; full mixtures of all
/// vertices concentrate near the centroid and never reach the extremes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

pub fn probe_conditional(poly: &ResponseTypePolytope, x: usize, y: usize, samples: usize, seed: u64) -> ProbeReport {
    const CHUNK: usize = 10_000;
    let vertices = poly.vertices();
    let (num, den) = ResponseTypePolytope::ratio_forms(x, y);
    let proj: Vec<(f64, f64)> = vertices
        .iter()
        .map(|q| (num.iter().zip(q).map(|(a, b)| a * b).sum(), den.iter().zip(q).map(|(a, b)| a * b).sum()))
        .collect();
    let chunks = samples.div_ceil(CHUNK);
    let (min, max) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0xA24B_AED4_963E_E407));
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                let (mut n, mut d) = (0.0, 0.0);
                for _ in 0..rng.gen_range(1..=3) {
                    let (pn, pd) = proj[rng.gen_range(0..proj.len())];
                    let w = -(1.0 - rng.gen::<f64>()).ln();
                    n += w * pn;
                    d += w * pd;
                }
                if d > 1e-12 {
                    lo = lo.min(n / d);
                    hi = hi.max(n / d);
                }
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    ProbeReport { min, max, samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::fixtures::{build_bow_examples, random_bow_collection};
    use crate::scm::Mechanism;

    /// Response-type law of the true target SCM, coupled with the first
    /// source: exogenous variables with equal laws are one draw, the others
    /// independent copies.
    fn true_type_law(dc: &DomainCollection) -> Vec<f64> {
        let (s1, t) = (&dc.sources[0], &dc.target);
        let tables = |scm: &Scm, i: usize| match &scm.variable(i).mechanism {
            Mechanism::Table { exogenous, table } => (exogenous.clone(), table.clone()),
            _ => unreachable!(),
        };
        let n_exo = t.exogenous().len();
        let shared: Vec<bool> = (0..n_exo).map(|k| s1.exogenous()[k].probs == t.exogenous()[k].probs).collect();
        let mut q = vec![0.0; CELLS];
        // draw the target's exogenous values and a private copy for the source
        for code in 0..(1usize << (2 * n_exo)) {
            let ut: Vec<usize> = (0..n_exo).map(|k| (code >> k) & 1).collect();
            let us: Vec<usize> = (0..n_exo).map(|k| if shared[k] { ut[k] } else { (code >> (n_exo + k)) & 1 }).collect();
            // shared draws do not consume the private bit
            if (0..n_exo).any(|k| shared[k] && (code >> (n_exo + k)) & 1 == 1) {
                continue;
            }
            let mut w: f64 = (0..n_exo).map(|k| t.exogenous()[k].probs[ut[k]]).product();
            w *= (0..n_exo).filter(|&k| !shared[k]).map(|k| s1.exogenous()[k].probs[us[k]]).product::<f64>();
            // parent value (0 for the root) then exogenous digits
            let eval = |scm: &Scm, u: &[usize], i: usize, x: usize| {
                let (exo, table) = tables(scm, i);
                table[exo.iter().fold(x, |idx, &e| idx * 2 + u[e])]
            };
            let x_src = eval(s1, &us, 0, 0);
            let x_tgt = eval(t, &ut, 0, 0);
            let h = eval(t, &ut, 1, 0) * 2 + eval(t, &ut, 1, 1);
            q[cell(x_src * 2 + x_tgt, h)] += w;
        }
        q
    }

    #[test]
    fn named_fixture_anchors() {
        let dc = build_bow_examples();
        let p = BowProblem::from_collection(&dc).unwrap();
        assert_eq!(p.delta, vec![BTreeSet::from([0]), BTreeSet::from([1])]);
        assert!((conditional_one(&p.sources[0], 1) - 0.0475 / 0.77).abs() < 1e-9);
        assert!((conditional_one(&p.target, 1) - 0.0475 / 0.14).abs() < 1e-9);
        let a = analyze_bow(p).unwrap();
        let (l, u) = a.bounds.interval(1, 1);
        assert!(l <= 0.0475 / 0.14 && 0.0475 / 0.14 <= u);
        assert!(a.bounds.method_gap() < 1e-7);
        assert!((a.px1_range.0 - 0.14).abs() < 1e-9 && (a.px1_range.1 - 0.14).abs() < 1e-9);
    }

    #[test]
    fn true_type_law_is_feasible() {
        for dc in std::iter::once(build_bow_examples()).chain((0..10).map(random_bow_collection)) {
            let p = BowProblem::from_collection(&dc).unwrap();
            let poly = canonical_constraints(&p.sources, &p.delta).unwrap();
            let q = true_type_law(&dc);
            assert!(poly.contains(&q, 1e-12), "residual {}", poly.residual(&q));
            let t = ResponseTypePolytope::target_joint(&q);
            for x in 0..2 {
                for y in 0..2 {
                    assert!((t[x][y] - p.target[x][y]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn probing_stays_inside_bounds() {
        let dc = build_bow_examples();
        let a = analyze_bow(BowProblem::from_collection(&dc).unwrap()).unwrap();
        let r = probe_conditional(&a.polytope, 1, 1, 20_000, 7);
        let (l, u) = a.bounds.interval(1, 1);
        assert!(r.min >= l - 1e-9 && r.max <= u + 1e-9);
    }
}
