//! Dense discrete factors over token-valued positions and bucket elimination.

use crate::error::{CtlabError, Result};
use crate::inference::Cpt;
use crate::scm::{decode_into, table_size};

/// How a variable is removed from a factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Min,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    vocab: usize,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, vocab: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != vocab.pow(scope.len() as u32) {
            return Err(CtlabError::DimensionMismatch(format!(
                "{} values for scope of size {}",
                values.len(),
                scope.len()
            )));
        }
        Ok(Self { scope, vocab, values })
    }

    pub fn scalar(vocab: usize, v: f64) -> Self {
        Self { scope: Vec::new(), vocab, values: vec![v] }
    }

    /// Factor over `(parents..., child)` holding `cpt(child | parents)`.
    pub fn from_cpt(cpt: &Cpt, parents: &[usize], child: usize) -> Self {
        let mut scope = parents.to_vec();
        scope.push(child);
        Self { scope, vocab: cpt.vocab(), values: cpt.probs().to_vec() }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn strides(&self) -> Vec<usize> {
        let n = self.scope.len();
        (0..n).map(|k| self.vocab.pow((n - 1 - k) as u32)).collect()
    }

    /// Pointwise product over the union scope (own variables first).
    pub fn product(&self, other: &Factor, budget: usize) -> Result<Factor> {
        let mut scope = self.scope.clone();
        scope.extend(other.scope.iter().filter(|v| !self.scope.contains(v)));
        let size = table_size(self.vocab, scope.len(), budget)?;
        let sa = self.strides();
        let sb = other.strides();
        // stride contribution of each result digit into each operand
        let da: Vec<usize> = scope
            .iter()
            .map(|v| self.scope.iter().position(|w| w == v).map_or(0, |k| sa[k]))
            .collect();
        let db: Vec<usize> = scope
            .iter()
            .map(|v| other.scope.iter().position(|w| w == v).map_or(0, |k| sb[k]))
            .collect();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // odometer increment, least significant digit last
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                ia += da[k];
                ib += db[k];
                if digits[k] < self.vocab {
                    break;
                }
                digits[k] = 0;
                ia -= da[k] * self.vocab;
                ib -= db[k] * self.vocab;
            }
        }
        Ok(Factor { scope, vocab: self.vocab, values })
    }

    /// Removes `var` by summing or minimising over its values.
    pub fn reduce(&self, var: usize, how: Reduce) -> Factor {
        let Some(p) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let v = self.vocab;
        let inner = v.pow((self.scope.len() - 1 - p) as u32);
        let outer = self.values.len() / (inner * v);
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let mut acc = match how {
                    Reduce::Sum => 0.0,
                    Reduce::Min => f64::INFINITY,
                };
                for k in 0..v {
                    let x = self.values[(o * v + k) * inner + i];
                    acc = match how {
                        Reduce::Sum => acc + x,
                        Reduce::Min => acc.min(x),
                    };
                }
                values.push(acc);
            }
        }
        let mut scope = self.scope.clone();
        scope.remove(p);
        Factor { scope, vocab: v, values }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        self.reduce(var, Reduce::Sum)
    }

    /// Fixes `var` to `value`, dropping it from the scope.
    pub fn condition(&self, var: usize, value: usize) -> Factor {
        let Some(p) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let v = self.vocab;
        let inner = v.pow((self.scope.len() - 1 - p) as u32);
        let outer = self.values.len() / (inner * v);
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * v + value) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut scope = self.scope.clone();
        scope.remove(p);
        Factor { scope, vocab: v, values }
    }

    /// Same factor with variables laid out in `order` (a permutation of the
    /// scope).
    pub fn reorder(&self, order: &[usize]) -> Result<Factor> {
        if order.len() != self.scope.len() || order.iter().any(|v| !self.scope.contains(v)) {
            return Err(CtlabError::DimensionMismatch(format!("reorder {order:?} of scope {:?}", self.scope)));
        }
        if order == self.scope.as_slice() {
            return Ok(self.clone());
        }
        let s = self.strides();
        let map: Vec<usize> = order.iter().map(|v| s[self.scope.iter().position(|w| w == v).unwrap()]).collect();
        let mut digits = vec![0usize; order.len()];
        let values = (0..self.values.len())
            .map(|idx| {
                decode_into(idx, self.vocab, &mut digits);
                let src: usize = digits.iter().zip(&map).map(|(d, m)| d * m).sum();
                self.values[src]
            })
            .collect();
        Ok(Factor { scope: order.to_vec(), vocab: self.vocab, values })
    }
}

/// Bucket elimination: removes each variable of `order` in turn by
/// multiplying the factors that mention it and reducing, then multiplies the
/// remaining factors together.
pub fn eliminate(mut factors: Vec<Factor>, order: &[usize], how: Reduce, vocab: usize, budget: usize) -> Result<Factor> {
    for &var in order {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.scope.contains(&var));
        factors = rest;
        if bucket.is_empty() {
            continue;
        }
        let mut it = bucket.into_iter();
        let mut prod = it.next().expect("non-empty bucket");
        for f in it {
            prod = prod.product(&f, budget)?;
        }
        factors.push(prod.reduce(var, how));
    }
    let mut out = Factor::scalar(vocab, 1.0);
    for f in &factors {
        out = out.product(f, budget)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(scope: Vec<usize>, values: Vec<f64>) -> Factor {
        Factor::new(scope, 2, values).unwrap()
    }

    #[test]
    fn product_matches_pointwise() {
        let a = f(vec![0, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let b = f(vec![1, 2], vec![5.0, 6.0, 7.0, 8.0]);
        let p = a.product(&b, 100).unwrap();
        assert_eq!(p.scope(), &[0, 1, 2]);
        for x0 in 0..2 {
            for x1 in 0..2 {
                for x2 in 0..2 {
                    let want = a.values()[x0 * 2 + x1] * b.values()[x1 * 2 + x2];
                    assert_eq!(p.values()[x0 * 4 + x1 * 2 + x2], want);
                }
            }
        }
    }

    #[test]
    fn reduce_sum_and_min() {
        let a = f(vec![3, 7], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.sum_out(3).values(), &[4.0, 6.0]);
        assert_eq!(a.sum_out(7).values(), &[3.0, 7.0]);
        assert_eq!(a.reduce(7, Reduce::Min).values(), &[1.0, 3.0]);
        assert_eq!(a.condition(3, 1).values(), &[3.0, 4.0]);
        assert_eq!(a.condition(7, 0).values(), &[1.0, 3.0]);
    }

    #[test]
    fn reorder_transposes() {
        let a = f(vec![0, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let r = a.reorder(&[1, 0]).unwrap();
        assert_eq!(r.values(), &[1.0, 3.0, 2.0, 4.0]);
        assert!(a.reorder(&[0]).is_err());
    }

    #[test]
    fn budget_applies_to_products() {
        let a = Factor::new(vec![0, 1], 10, vec![1.0; 100]).unwrap();
        let b = Factor::new(vec![2, 3], 10, vec![1.0; 100]).unwrap();
        assert!(matches!(a.product(&b, 9_999), Err(CtlabError::BudgetExceeded(_))));
    }

    #[test]
    fn elimination_of_chain_marginal() {
        // p(a) p(b|a): marginal of b
        let pa = f(vec![0], vec![0.3, 0.7]);
        let pb = f(vec![0, 1], vec![0.9, 0.1, 0.2, 0.8]);
        let m = eliminate(vec![pa, pb], &[0], Reduce::Sum, 2, 100).unwrap();
        assert_eq!(m.scope(), &[1]);
        assert!((m.values()[1] - (0.3 * 0.1 + 0.7 * 0.8)).abs() < 1e-15);
    }
}
