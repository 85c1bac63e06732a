use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::model::{Mechanism, Scm};
use crate::error::{CtlabError, Result};

/// Domain index: a source `0..K` or the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainId {
    Source(usize),
    Target,
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainId::Source(j) => write!(f, "source-{j}"),
            DomainId::Target => f.write_str("target"),
        }
    }
}

impl FromStr for DomainId {
    type Err = CtlabError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "target" {
            return Ok(DomainId::Target);
        }
        s.strip_prefix("source-")
            .and_then(|j| j.parse().ok())
            .map(DomainId::Source)
            .ok_or_else(|| CtlabError::InvalidConfig(format!("bad domain id `{s}`")))
    }
}

impl Serialize for DomainId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DomainId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Row-major token matrix drawn from one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    domain: DomainId,
    seed: u64,
    n_vars: usize,
    data: Vec<usize>,
}

impl Dataset {
    pub fn new(domain: DomainId, seed: u64, n_vars: usize, data: Vec<usize>) -> Result<Self> {
        if n_vars == 0 {
            return Err(CtlabError::DimensionMismatch("dataset with zero columns".into()));
        }
        if data.len() % n_vars != 0 {
            return Err(CtlabError::DimensionMismatch(format!(
                "{} tokens is not a multiple of row length {n_vars}",
                data.len()
            )));
        }
        Ok(Self { domain, seed, n_vars, data })
    }

    pub fn empty(domain: DomainId, n_vars: usize) -> Self {
        Self { domain, seed: 0, n_vars, data: Vec::new() }
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_vars
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.data[r * self.n_vars..(r + 1) * self.n_vars]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.data.chunks_exact(self.n_vars)
    }

    pub fn with_domain(mut self, domain: DomainId) -> Self {
        self.domain = domain;
        self
    }

    pub fn max_token(&self) -> Option<usize> {
        self.data.iter().copied().max()
    }

    pub fn check_vocab(&self, vocab: usize) -> Result<()> {
        match self.max_token() {
            Some(t) if t >= vocab => Err(CtlabError::OutOfRange(format!("token {t} outside vocabulary of size {vocab}"))),
            _ => Ok(()),
        }
    }

    /// Keeps the listed columns in the given order.
    pub fn project(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n_vars) {
            return Err(CtlabError::OutOfRange(format!("column {c} of {}", self.n_vars)));
        }
        let mut data = Vec::with_capacity(self.len() * cols.len());
        for row in self.rows() {
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Dataset::new(self.domain, self.seed, cols.len(), data)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut data = Vec::with_capacity(indices.len() * self.n_vars);
        for &r in indices {
            data.extend_from_slice(self.row(r));
        }
        Dataset { domain: self.domain, seed: self.seed, n_vars: self.n_vars, data }
    }

    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset { domain: self.domain, seed: self.seed, n_vars: self.n_vars, data: self.data[..n * self.n_vars].to_vec() }
    }

    /// Shuffles rows with `seed` and cuts them into `parts` contiguous pieces
    /// of near-equal size (earlier pieces take the remainder).
    pub fn split(&self, parts: usize, seed: u64) -> Vec<Dataset> {
        assert!(parts > 0);
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let base = idx.len() / parts;
        let extra = idx.len() % parts;
        let mut out = Vec::with_capacity(parts);
        let mut start = 0;
        for p in 0..parts {
            let size = base + usize::from(p < extra);
            out.push(self.subset(&idx[start..start + size]));
            start += size;
        }
        out
    }
}

/// Draws `n` rows ancestrally. Each row first draws every explicit exogenous
/// variable, then the positions in causal order.
pub fn sample_dataset(scm: &Scm, n: usize, seed: u64, domain: DomainId) -> Dataset {
    let t = scm.len();
    let v = scm.vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * t);
    let mut exo = vec![0usize; scm.exogenous().len()];
    let mut row = vec![0usize; t];
    let mut args = Vec::with_capacity(2);
    let mut exo_args = Vec::with_capacity(2);
    for _ in 0..n {
        for (slot, law) in exo.iter_mut().zip(scm.exogenous()) {
            *slot = draw_categorical(&law.probs, &mut rng);
        }
        for i in 0..t {
            let var = scm.variable(i);
            args.clear();
            args.extend(var.parents.iter().map(|&p| row[p]));
            row[i] = match &var.mechanism {
                Mechanism::Noisy(op) => op.sample(&args, v, &mut rng),
                Mechanism::Table { exogenous, table } => {
                    exo_args.clear();
                    exo_args.extend(exogenous.iter().map(|&u| exo[u]));
                    table[scm.table_index(i, &args, &exo_args)]
                }
            };
        }
        data.extend_from_slice(&row);
    }
    Dataset { domain, seed, n_vars: t, data }
}

fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::operator::{NoisyOperator, OpKind};

    fn single_unif(vocab: usize) -> Scm {
        Scm::from_operators(vocab, vec![(vec![], NoisyOperator::new(OpKind::Unif, 0.0).unwrap())]).unwrap()
    }

    #[test]
    fn zero_rows() {
        let d = sample_dataset(&single_unif(4), 0, 1, DomainId::Target);
        assert!(d.is_empty());
        assert_eq!(d.n_vars(), 1);
    }

    #[test]
    fn uniform_root_frequencies() {
        let d = sample_dataset(&single_unif(4), 40_000, 3, DomainId::Target);
        let mut counts = [0usize; 4];
        d.rows().for_each(|r| counts[r[0]] += 1);
        for c in counts {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let scm = single_unif(7);
        assert_eq!(sample_dataset(&scm, 100, 9, DomainId::Source(0)), sample_dataset(&scm, 100, 9, DomainId::Source(0)));
        assert_ne!(sample_dataset(&scm, 100, 9, DomainId::Source(0)), sample_dataset(&scm, 100, 10, DomainId::Source(0)));
    }

    #[test]
    fn split_partitions_rows() {
        let d = sample_dataset(&single_unif(7), 101, 9, DomainId::Target);
        let parts = d.split(3, 5);
        assert_eq!(parts.iter().map(Dataset::len).collect::<Vec<_>>(), vec![34, 34, 33]);
        let mut all: Vec<usize> = parts.iter().flat_map(|p| p.rows().map(|r| r[0]).collect::<Vec<_>>()).collect();
        let mut orig: Vec<usize> = d.rows().map(|r| r[0]).collect();
        all.sort_unstable();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }

    #[test]
    fn domain_id_roundtrip() {
        for d in [DomainId::Target, DomainId::Source(0), DomainId::Source(12)] {
            assert_eq!(d.to_string().parse::<DomainId>().unwrap(), d);
        }
        assert!("src".parse::<DomainId>().is_err());
    }

    #[test]
    fn project_reorders_columns() {
        let d = Dataset::new(DomainId::Target, 0, 3, vec![0, 1, 2, 3, 4, 5]).unwrap();
        let p = d.project(&[2, 0]).unwrap();
        assert_eq!(p.row(1), &[5, 3]);
        assert!(d.project(&[3]).is_err());
    }
}
