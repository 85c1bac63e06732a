//! Minimax (causal robust) prediction against an interval of conditionals.

use serde::{Deserialize, Serialize};

use super::interval::BoundsResult;

/// `-q log μ - (1 - q) log(1 - μ)`, with `0 log 0 = 0`.
pub fn cross_entropy(q: f64, mu: f64) -> f64 {
    let term = |w: f64, p: f64| if w == 0.0 { 0.0 } else { -w * p.ln() };
    term(q, mu) + term(1.0 - q, 1.0 - mu)
}

fn slope(q: f64, mu: f64) -> f64 {
    -q / mu + (1.0 - q) / (1.0 - mu)
}

/// Worst-case cross-entropy of `mu` when the truth is anywhere in `[l, u]`;
/// the loss is linear in the truth, so an endpoint is worst.
pub fn worst_case_risk(l: f64, u: f64, mu: f64) -> f64 {
    cross_entropy(l, mu).max(cross_entropy(u, mu))
}

/// Minimiser of [`worst_case_risk`] by bisection on the sign of a
/// subgradient of the (convex) worst case. The optimum lies in `[l, u]`.
pub fn minimax_probability(l: f64, u: f64, tol: f64) -> f64 {
    if u - l <= tol {
        return 0.5 * (l + u);
    }
    let (mut lo, mut hi) = (l, u);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let active = if cross_entropy(u, mid) >= cross_entropy(l, mid) { u } else { l };
        if slope(active, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CroPredictor {
    /// `μ(y | x)` indexed `[x][y]`.
    pub mu: [[f64; 2]; 2],
    /// Worst-case risk per `x`.
    pub worst_risk: [f64; 2],
    /// Worst case over the per-`x` intervals and over `P*(x = 1)` in its
    /// range.
    pub minimax_risk: f64,
}

/// Per-`x` minimax predictor. The loss separates over `x`, so the worst
/// target `x`-marginal in `px1_range` only changes the reported risk.
pub fn cro_predictor(bounds: &BoundsResult, px1_range: (f64, f64)) -> CroPredictor {
    let mut mu = [[0.5; 2]; 2];
    let mut worst = [0.0; 2];
    for x in 0..2 {
        let (l, u) = bounds.interval(x, 1);
        let m = minimax_probability(l, u, 1e-12);
        mu[x] = [1.0 - m, m];
        worst[x] = worst_case_risk(l, u, m);
    }
    let at = |p1: f64| (1.0 - p1) * worst[0] + p1 * worst[1];
    CroPredictor { mu, worst_risk: worst, minimax_risk: at(px1_range.0).max(at(px1_range.1)) }
}
