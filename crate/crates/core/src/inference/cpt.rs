//! Conditional probability tables and their smoothed empirical fits.

use serde::{Deserialize, Serialize};

use crate::error::{CtlabError, Result};
use crate::scm::{decode_into, encode, Dataset};

/// Default additive smoothing.
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Projected `(x, y)` rows of a fixed conditioning arity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RowSet {
    arity: usize,
    xs: Vec<usize>,
    ys: Vec<usize>,
}

impl RowSet {
    pub fn new(arity: usize) -> Self {
        Self { arity, xs: Vec::new(), ys: Vec::new() }
    }

    pub fn push(&mut self, x: &[usize], y: usize) {
        assert_eq!(x.len(), self.arity, "row arity");
        self.xs.extend_from_slice(x);
        self.ys.push(y);
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn get(&self, r: usize) -> (&[usize], usize) {
        (&self.xs[r * self.arity..(r + 1) * self.arity], self.ys[r])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], usize)> + '_ {
        (0..self.len()).map(move |r| self.get(r))
    }

    /// Rows `(data[y]; data[xs...])` of one dataset.
    pub fn from_dataset(data: &Dataset, y: usize, xs: &[usize]) -> Result<Self> {
        let t = data.n_vars();
        if y >= t || xs.iter().any(|&x| x >= t) {
            return Err(CtlabError::OutOfRange(format!("projection ({y}; {xs:?}) on {t} columns")));
        }
        let mut rows = RowSet::new(xs.len());
        rows.xs.reserve(data.len() * xs.len());
        rows.ys.reserve(data.len());
        for row in data.rows() {
            rows.xs.extend(xs.iter().map(|&k| row[k]));
            rows.ys.push(row[y]);
        }
        Ok(rows)
    }

    pub fn extend(&mut self, other: &RowSet) -> Result<()> {
        if other.arity != self.arity {
            return Err(CtlabError::DimensionMismatch(format!("pooling arity {} with arity {}", other.arity, self.arity)));
        }
        self.xs.extend_from_slice(&other.xs);
        self.ys.extend_from_slice(&other.ys);
        Ok(())
    }
}

/// Concatenates projected rows `(dataset, y, xs)`; every mapping must have
/// the same conditioning arity.
pub fn pool_rows(mappings: &[(&Dataset, usize, &[usize])]) -> Result<RowSet> {
    let Some(first) = mappings.first() else {
        return Err(CtlabError::EmptyInput("no datasets to pool".into()));
    };
    let mut pooled = RowSet::new(first.2.len());
    for (data, y, xs) in mappings {
        pooled.extend(&RowSet::from_dataset(data, *y, xs)?)?;
    }
    Ok(pooled)
}

/// Weighted `(x, y)` counts; weights may be fractional (exact evidence).
#[derive(Clone, Debug, PartialEq)]
pub struct Counts {
    arity: usize,
    vocab: usize,
    weights: Vec<f64>,
}

impl Counts {
    pub fn new(arity: usize, vocab: usize) -> Self {
        Self { arity, vocab, weights: vec![0.0; vocab.pow(arity as u32 + 1)] }
    }

    pub fn from_rows(rows: &RowSet, vocab: usize) -> Result<Self> {
        let mut c = Counts::new(rows.arity(), vocab);
        for (x, y) in rows.iter() {
            if y >= vocab || x.iter().any(|&t| t >= vocab) {
                return Err(CtlabError::OutOfRange(format!("token outside vocabulary of size {vocab}")));
            }
            c.add(x, y, 1.0);
        }
        Ok(c)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn add(&mut self, x: &[usize], y: usize, w: f64) {
        let r = encode(x, self.vocab);
        self.weights[r * self.vocab + y] += w;
    }

    pub fn merge(&mut self, other: &Counts) -> Result<()> {
        if other.arity != self.arity || other.vocab != self.vocab {
            return Err(CtlabError::DimensionMismatch(format!(
                "merging counts of arity {} with arity {}",
                other.arity, self.arity
            )));
        }
        self.weights.iter_mut().zip(&other.weights).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Number of conditioning rows with positive weight.
    pub fn supported_rows(&self) -> usize {
        self.weights.chunks_exact(self.vocab).filter(|r| r.iter().sum::<f64>() > 0.0).count()
    }

    /// Reorders the conditioning arguments: new argument `k` is old argument
    /// `perm[k]`.
    pub fn permute_args(&self, perm: &[usize]) -> Counts {
        let mut out = Counts::new(self.arity, self.vocab);
        let mut old = vec![0usize; self.arity];
        let mut new = vec![0usize; self.arity];
        for (r, row) in self.weights.chunks_exact(self.vocab).enumerate() {
            decode_into(r, self.vocab, &mut old);
            for (k, &p) in perm.iter().enumerate() {
                new[k] = old[p];
            }
            let nr = encode(&new, self.vocab);
            out.weights[nr * self.vocab..(nr + 1) * self.vocab].copy_from_slice(row);
        }
        out
    }

    /// Weighted NLL total `-Σ w(x,y) log cpt(y|x)`.
    pub fn cross_entropy(&self, cpt: &Cpt) -> f64 {
        self.weights
            .iter()
            .zip(cpt.probs())
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| if *p > 0.0 { -w * p.ln() } else { f64::INFINITY })
            .sum()
    }
}

/// `|V|^c` rows of `|V|` probabilities; row index is the mixed-radix code of
/// the conditioning arguments, first argument most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "CptFile", try_from = "CptFile")]
pub struct Cpt {
    arity: usize,
    vocab: usize,
    probs: Vec<f64>,
    alpha: f64,
    flagged: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CptFile {
    arity: usize,
    vocab: usize,
    rows: Vec<Vec<f64>>,
    alpha: f64,
    flagged: Vec<usize>,
}

impl From<Cpt> for CptFile {
    fn from(c: Cpt) -> Self {
        let rows = c.probs.chunks_exact(c.vocab).map(<[f64]>::to_vec).collect();
        CptFile { arity: c.arity, vocab: c.vocab, rows, alpha: c.alpha, flagged: c.flagged }
    }
}

impl TryFrom<CptFile> for Cpt {
    type Error = CtlabError;

    fn try_from(f: CptFile) -> Result<Self> {
        if f.rows.iter().any(|r| r.len() != f.vocab) {
            return Err(CtlabError::DimensionMismatch("ragged CPT rows".into()));
        }
        Cpt::from_probs(f.arity, f.vocab, f.rows.concat(), f.alpha, f.flagged)
    }
}

impl Cpt {
    pub fn from_probs(arity: usize, vocab: usize, probs: Vec<f64>, alpha: f64, mut flagged: Vec<usize>) -> Result<Self> {
        let n_rows = vocab.pow(arity as u32);
        if probs.len() != n_rows * vocab {
            return Err(CtlabError::DimensionMismatch(format!(
                "{} entries for a {n_rows}x{vocab} table",
                probs.len()
            )));
        }
        for (r, row) in probs.chunks_exact(vocab).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) || (s - 1.0).abs() > 1e-9 {
                return Err(CtlabError::OutOfRange(format!("row {r} is not a distribution (sum {s})")));
            }
        }
        flagged.sort_unstable();
        flagged.dedup();
        Ok(Self { arity, vocab, probs, alpha, flagged })
    }

    /// `(count(x,y) + alpha) / (count(x) + alpha |V|)`; rows without support
    /// are uniform and flagged.
    pub fn from_counts(counts: &Counts, alpha: f64) -> Cpt {
        let v = counts.vocab;
        let mut probs = counts.weights.clone();
        let mut flagged = Vec::new();
        for (r, row) in probs.chunks_exact_mut(v).enumerate() {
            let n: f64 = row.iter().sum();
            if n <= 0.0 {
                flagged.push(r);
                row.iter_mut().for_each(|p| *p = 1.0 / v as f64);
            } else {
                let denom = n + alpha * v as f64;
                row.iter_mut().for_each(|p| *p = (*p + alpha) / denom);
            }
        }
        Cpt { arity: counts.arity, vocab: v, probs, alpha, flagged }
    }

    pub fn uniform(arity: usize, vocab: usize) -> Cpt {
        Cpt::from_counts(&Counts::new(arity, vocab), 0.0)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn flagged(&self) -> &[usize] {
        &self.flagged
    }

    pub fn n_rows(&self) -> usize {
        self.probs.len() / self.vocab
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row_index(&self, x: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.arity);
        encode(x, self.vocab)
    }

    pub fn row(&self, x: &[usize]) -> &[f64] {
        self.row_at(self.row_index(x))
    }

    pub fn row_at(&self, r: usize) -> &[f64] {
        &self.probs[r * self.vocab..(r + 1) * self.vocab]
    }

    pub fn prob(&self, y: usize, x: &[usize]) -> f64 {
        self.row(x)[y]
    }

    pub fn argmax(&self, x: &[usize]) -> usize {
        argmax(self.row(x))
    }

    /// Table with arguments reordered: new argument `k` is old argument
    /// `perm[k]`.
    pub fn permute_args(&self, perm: &[usize]) -> Cpt {
        assert_eq!(perm.len(), self.arity);
        let mut probs = vec![0.0; self.probs.len()];
        let mut old = vec![0usize; self.arity];
        let mut new = vec![0usize; self.arity];
        let mut flagged = Vec::new();
        for r in 0..self.n_rows() {
            decode_into(r, self.vocab, &mut old);
            for (k, &p) in perm.iter().enumerate() {
                new[k] = old[p];
            }
            let nr = encode(&new, self.vocab);
            probs[nr * self.vocab..(nr + 1) * self.vocab].copy_from_slice(self.row_at(r));
            if self.flagged.binary_search(&r).is_ok() {
                flagged.push(nr);
            }
        }
        flagged.sort_unstable();
        Cpt { arity: self.arity, vocab: self.vocab, probs, alpha: self.alpha, flagged }
    }

    pub fn max_abs_diff(&self, other: &Cpt) -> f64 {
        assert_eq!(self.probs.len(), other.probs.len());
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Smoothed empirical conditional of `rows`.
pub fn fit_cpt(rows: &RowSet, vocab: usize, alpha: f64) -> Result<Cpt> {
    Ok(Cpt::from_counts(&Counts::from_rows(rows, vocab)?, alpha))
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}
