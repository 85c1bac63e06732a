//! Evidence from one domain: finite samples or the exact-limit distribution.

use super::cpt::{Counts, RowSet};
use super::risk::query_truth;
use crate::error::{CtlabError, Result};
use crate::scm::{joint_budget, Dataset, Scm};

/// Exact evidence stands in for infinitely many rows: its counts are the
/// exact marginal `P(x, y)` scaled by `weight`.
#[derive(Clone, Copy, Debug)]
pub enum Evidence<'a> {
    Samples(&'a Dataset),
    Exact { scm: &'a Scm, weight: f64 },
}

impl<'a> Evidence<'a> {
    pub fn exact(scm: &'a Scm) -> Self {
        Evidence::Exact { scm, weight: 1.0 }
    }

    pub fn n_vars(&self) -> usize {
        match self {
            Evidence::Samples(d) => d.n_vars(),
            Evidence::Exact { scm, .. } => scm.len(),
        }
    }

    /// Effective sample size (the weight, for exact evidence).
    pub fn size(&self) -> f64 {
        match self {
            Evidence::Samples(d) => d.len() as f64,
            Evidence::Exact { weight, .. } => *weight,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Evidence::Exact { .. })
    }

    /// Counts of `(v[xs], v[y])`.
    pub fn counts(&self, y: usize, xs: &[usize], vocab: usize) -> Result<Counts> {
        let t = self.n_vars();
        if y >= t || xs.iter().any(|&x| x >= t) {
            return Err(CtlabError::OutOfRange(format!("projection ({y}; {xs:?}) on {t} positions")));
        }
        let mut c = Counts::new(xs.len(), vocab);
        match self {
            Evidence::Samples(d) => {
                let mut x = vec![0usize; xs.len()];
                for row in d.rows() {
                    for (slot, &k) in x.iter_mut().zip(xs) {
                        *slot = row[k];
                    }
                    if row[y] >= vocab || x.iter().any(|&t| t >= vocab) {
                        return Err(CtlabError::OutOfRange(format!("token outside vocabulary of size {vocab}")));
                    }
                    c.add(&x, row[y], 1.0);
                }
            }
            Evidence::Exact { scm, weight } => {
                if scm.vocab() != vocab {
                    return Err(CtlabError::DimensionMismatch(format!("SCM vocabulary {} against {vocab}", scm.vocab())));
                }
                let truth = query_truth(scm, y, xs, joint_budget())?;
                for (w, p) in c.weights_mut().iter_mut().zip(truth.joint()) {
                    *w = weight * p;
                }
            }
        }
        Ok(c)
    }

    /// Rows for held-out scoring; exact evidence has none.
    pub fn rows(&self, y: usize, xs: &[usize]) -> Result<RowSet> {
        match self {
            Evidence::Samples(d) => RowSet::from_dataset(d, y, xs),
            Evidence::Exact { .. } => Err(CtlabError::Unsupported("held-out rows from exact evidence".into())),
        }
    }
}
