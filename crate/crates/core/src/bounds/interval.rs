//! Sharp bounds on `P*(y | x)` over the response-type polytope.

use serde::{Deserialize, Serialize};

use super::lp::fractional_optimum;
use super::polytope::ResponseTypePolytope;
use crate::error::{CtlabError, Result};

/// Witnesses must satisfy the constraints and hit their endpoint to this
/// tolerance.
pub const WITNESS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub x: usize,
    pub y: usize,
    pub l: f64,
    pub u: f64,
    /// Same endpoints from vertex enumeration.
    pub l_vertex: f64,
    pub u_vertex: f64,
    /// Feasible laws attaining `l` and `u`.
    pub witness_q: [Vec<f64>; 2],
    /// `P*(x) = 0` on the whole polytope; the interval is then `[0, 1]`.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub entries: Vec<BoundEntry>,
    pub n_vertices: usize,
}

impl BoundsResult {
    pub fn entry(&self, x: usize, y: usize) -> &BoundEntry {
        &self.entries[x * 2 + y]
    }

    pub fn interval(&self, x: usize, y: usize) -> (f64, f64) {
        let e = self.entry(x, y);
        (e.l, e.u)
    }

    /// Largest gap between the LP and vertex endpoints.
    pub fn method_gap(&self) -> f64 {
        self.entries.iter().map(|e| (e.l - e.l_vertex).abs().max((e.u - e.u_vertex).abs())).fold(0.0, f64::max)
    }
}

fn ratio(num: &[f64], den: &[f64], q: &[f64]) -> (f64, f64) {
    let dot = |w: &[f64]| w.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    (dot(num), dot(den))
}

/// Bounds for every `(x, y)` by the Charnes–Cooper program, cross-checked
/// against vertex enumeration, with verified witnesses.
pub fn partial_transport_bounds(poly: &ResponseTypePolytope) -> Result<BoundsResult> {
    let vertices = poly.vertices();
    if vertices.is_empty() {
        return Err(CtlabError::Infeasible("empty response-type polytope".into()));
    }
    let mut entries = Vec::with_capacity(4);
    for x in 0..2 {
        for y in 0..2 {
            let (num, den) = ResponseTypePolytope::ratio_forms(x, y);
            let lo = fractional_optimum(poly.rows(), poly.rhs(), &num, &den, false);
            let hi = fractional_optimum(poly.rows(), poly.rhs(), &num, &den, true);
            // the numerator cells are a subset of the denominator cells, so
            // extremes sit on vertices with positive denominator
            let vals: Vec<f64> = vertices
                .iter()
                .filter_map(|q| {
                    let (n, d) = ratio(&num, &den, q);
                    (d > 1e-12).then_some(n / d)
                })
                .collect();
            let (lo, hi) = match (lo, hi) {
                (Some(lo), Some(hi)) if !vals.is_empty() => (lo, hi),
                _ => {
                    entries.push(BoundEntry {
                        x,
                        y,
                        l: 0.0,
                        u: 1.0,
                        l_vertex: 0.0,
                        u_vertex: 1.0,
                        witness_q: [vertices[0].clone(), vertices[0].clone()],
                        degenerate: true,
                    });
                    continue;
                }
            };
            for (w, target) in [(&lo.argument, lo.value), (&hi.argument, hi.value)] {
                let (n, d) = ratio(&num, &den, w);
                if !poly.contains(w, WITNESS_TOL) || (n / d - target).abs() > WITNESS_TOL {
                    return Err(CtlabError::Infeasible(format!("witness for ({x}, {y}) failed verification")));
                }
            }
            entries.push(BoundEntry {
                x,
                y,
                l: lo.value.clamp(0.0, 1.0),
                u: hi.value.clamp(0.0, 1.0),
                l_vertex: vals.iter().copied().fold(f64::INFINITY, f64::min),
                u_vertex: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                witness_q: [lo.argument, hi.argument],
                degenerate: false,
            });
        }
    }
    Ok(BoundsResult { entries, n_vertices: vertices.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::polytope::canonical_constraints;
    use std::collections::BTreeSet;

    #[test]
    fn point_polytope_gives_point_interval() {
        let p = [[0.1, 0.2], [0.3, 0.4]];
        let poly = canonical_constraints(&[p], &[BTreeSet::new()]).unwrap();
        let b = partial_transport_bounds(&poly).unwrap();
        let (l, u) = b.interval(1, 1);
        assert!((l - 0.4 / 0.7).abs() < 1e-9 && (u - l).abs() < 1e-9);
        assert!(b.method_gap() < 1e-7);
    }

    #[test]
    fn complementary_endpoints() {
        let p1 = [[0.1, 0.2], [0.3, 0.4]];
        let p2 = [[0.2, 0.3], [0.1, 0.4]];
        let delta = vec![BTreeSet::from([0]), BTreeSet::from([1])];
        let b = partial_transport_bounds(&canonical_constraints(&[p1, p2], &delta).unwrap()).unwrap();
        for x in 0..2 {
            assert!((b.entry(x, 1).l - (1.0 - b.entry(x, 0).u)).abs() < 1e-9);
            assert!(b.entry(x, 1).l <= b.entry(x, 1).u);
        }
    }

    #[test]
    fn zero_target_mass_is_degenerate() {
        // source sharing x pins P*(x = 1) = 0
        let p2 = [[0.5, 0.5], [0.0, 0.0]];
        let poly = canonical_constraints(&[p2], &[BTreeSet::from([1])]).unwrap();
        let b = partial_transport_bounds(&poly).unwrap();
        assert!(b.entry(1, 1).degenerate && !b.entry(0, 1).degenerate);
    }
}
