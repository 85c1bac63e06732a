//! Dense two-phase simplex for small equality-form programs, plus the
//! Charnes–Cooper reduction of linear-fractional objectives.

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
        self.basis[r] = c;
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.rhs(i)).sum()
    }

    /// Bland's rule over the columns below `allowed`; `false` when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j] - self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.rows[i][j]).sum::<f64>();
                reduced < -COST_EPS
            });
            let Some(c) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match leave {
                    None => true,
                    Some((r, best)) => ratio < best - PIVOT_EPS || (ratio <= best + PIVOT_EPS && self.basis[i] < self.basis[r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
        panic!("simplex exceeded {MAX_PIVOTS} pivots under Bland's rule");
    }
}

/// Minimises `c·x` subject to `A x = b`, `x ≥ 0`.
pub fn minimize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let (m, n) = (a.len(), c.len());
    assert!(a.iter().all(|r| r.len() == n) && b.len() == m, "inconsistent LP dimensions");
    let n_cols = n + m;
    let rows = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (r, &bi))| {
            let s = if bi < 0.0 { -1.0 } else { 1.0 };
            let mut row: Vec<f64> = r.iter().map(|v| s * v).collect();
            row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            row.push(s * bi);
            row
        })
        .collect();
    let mut t = Tableau { rows, basis: (n..n_cols).collect(), n_cols };

    let phase1: Vec<f64> = (0..n_cols).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    t.optimize(&phase1, n_cols);
    let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
    if t.objective(&phase1) > 1e-9 * scale {
        return LpOutcome::Infeasible;
    }
    // drive zero-level artificials out of the basis; rows that cannot pivot
    // are linearly dependent and are dropped
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9 && !t.basis.contains(&j)) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let cost: Vec<f64> = c.iter().copied().chain(std::iter::repeat(0.0).take(m)).collect();
    if !t.optimize(&cost, n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bcol) in t.basis.iter().enumerate() {
        x[bcol] = t.rhs(i).max(0.0);
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, value }
}

/// Optimum of `(num·q) / (den·q)` over `{A q = b, q ≥ 0}` with the
/// denominator positive on the feasible set.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalOptimum {
    pub value: f64,
    pub argument: Vec<f64>,
}

/// Charnes–Cooper: with `y = t q` and `den·y = 1` the program becomes
/// `min ±num·y` subject to `A y − b t = 0`, `den·y = 1`, `y, t ≥ 0`.
/// `None` when the problem is infeasible or the denominator is zero on the
/// whole feasible set.
pub fn fractional_optimum(a: &[Vec<f64>], b: &[f64], num: &[f64], den: &[f64], maximize: bool) -> Option<FractionalOptimum> {
    let n = num.len();
    let mut rows: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &bi)| {
            let mut row = r.clone();
            row.push(-bi);
            row
        })
        .collect();
    let mut norm = den.to_vec();
    norm.push(0.0);
    rows.push(norm);
    let mut rhs = vec![0.0; a.len()];
    rhs.push(1.0);
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut cost: Vec<f64> = num.iter().map(|v| sign * v).collect();
    cost.push(0.0);
    match minimize(&rows, &rhs, &cost) {
        LpOutcome::Optimal { x, value } => {
            let t = x[n];
            if t <= 1e-12 {
                return None;
            }
            Some(FractionalOptimum { value: sign * value, argument: x[..n].iter().map(|y| y / t).collect() })
        }
        _ => None,
    }
}
