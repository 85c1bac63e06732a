//! Target-sample risk curves: ERM, ERM clipped to the bounds, and CRO.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cro::{cross_entropy, CroPredictor};
use super::interval::BoundsResult;
use super::polytope::BinaryJoint;
use crate::error::{CtlabError, Result};
use crate::scm::{sample_dataset, DomainId, Scm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Additive smoothing of the target ERM.
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub risk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub n: usize,
    pub method: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub rows: Vec<CurveRow>,
    pub summary: Vec<CurveSummary>,
    pub bayes_risk: f64,
}

impl RiskCurve {
    pub fn mean(&self, n: usize, method: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.n == n && s.method == method).map(|s| s.mean)
    }
}

pub const METHODS: [&str; 3] = ["constrained-erm", "cro", "erm"];

/// Risk under `truth` of a predictor given by `P(y = 1 | x)`.
pub fn conditional_risk(truth: &BinaryJoint, mu1: [f64; 2]) -> f64 {
    (0..2)
        .map(|x| {
            let px = truth[x][0] + truth[x][1];
            if px <= 0.0 {
                0.0
            } else {
                px * cross_entropy(truth[x][1] / px, mu1[x])
            }
        })
        .sum()
}

fn sample_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ n as u64
}

pub fn erm_vs_cro_curve(target: &Scm, truth: &BinaryJoint, bounds: &BoundsResult, cro: &CroPredictor, cfg: &CurveConfig) -> Result<RiskCurve> {
    if cfg.n_grid.is_empty() || cfg.seeds.is_empty() {
        return Err(CtlabError::InvalidConfig("risk curve needs sample sizes and seeds".into()));
    }
    if !(cfg.alpha >= 0.0) {
        return Err(CtlabError::InvalidConfig(format!("smoothing {} must be non-negative", cfg.alpha)));
    }
    let cro_risk = conditional_risk(truth, [cro.mu[0][1], cro.mu[1][1]]);
    let cells: Vec<(usize, u64)> = cfg.n_grid.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let mut rows: Vec<CurveRow> = cells
        .par_iter()
        .flat_map_iter(|&(n, seed)| {
            let data = sample_dataset(target, n, sample_seed(seed, n), DomainId::Target);
            let mut counts = [[0.0f64; 2]; 2];
            for r in data.rows() {
                counts[r[0]][r[1]] += 1.0;
            }
            let mut erm = [0.5; 2];
            let mut clipped = [0.5; 2];
            for x in 0..2 {
                let tot = counts[x][0] + counts[x][1] + 2.0 * cfg.alpha;
                if tot > 0.0 {
                    erm[x] = (counts[x][1] + cfg.alpha) / tot;
                }
                let (l, u) = bounds.interval(x, 1);
                clipped[x] = erm[x].clamp(l, u);
            }
            [
                ("constrained-erm", conditional_risk(truth, clipped)),
                ("cro", cro_risk),
                ("erm", conditional_risk(truth, erm)),
            ]
            .into_iter()
            .map(move |(m, risk)| CurveRow { n, seed, method: m.to_string(), risk })
        })
        .collect();
    rows.sort_by(|a, b| (a.n, &a.method, a.seed).cmp(&(b.n, &b.method, b.seed)));

    let mut summary = Vec::new();
    for &n in &cfg.n_grid {
        for m in METHODS {
            let r: Vec<f64> = rows.iter().filter(|row| row.n == n && row.method == m).map(|row| row.risk).collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let sd = if r.len() > 1 { (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt() } else { 0.0 };
            summary.push(CurveSummary { n, method: m.to_string(), mean, sd });
        }
    }
    let bayes = (0..2)
        .map(|x| {
            let px = truth[x][0] + truth[x][1];
            if px <= 0.0 {
                0.0
            } else {
                px * cross_entropy(truth[x][1] / px, truth[x][1] / px)
            }
        })
        .sum();
    Ok(RiskCurve { rows, summary, bayes_risk: bayes })
}
