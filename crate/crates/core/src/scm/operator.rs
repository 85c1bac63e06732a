//! Noisy token operators.
//!
//! With probability `1 - noise_p` an operator emits its deterministic skeleton
//! value (reduced mod |V|); otherwise it emits a uniformly drawn token. The
//! null-ary `unif` operator always emits a uniform token.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CtlabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Unif,
    Copy,
    Plus1,
    Minus1,
    Times2,
    Sum,
    Min,
    Max,
    Subtract,
    Mult,
    Mod,
}

impl OpKind {
    pub const ALL: [OpKind; 11] = [
        OpKind::Unif,
        OpKind::Copy,
        OpKind::Plus1,
        OpKind::Minus1,
        OpKind::Times2,
        OpKind::Sum,
        OpKind::Min,
        OpKind::Max,
        OpKind::Subtract,
        OpKind::Mult,
        OpKind::Mod,
    ];

    pub fn arity(self) -> usize {
        match self {
            OpKind::Unif => 0,
            OpKind::Copy | OpKind::Plus1 | OpKind::Minus1 | OpKind::Times2 => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Unif => "unif",
            OpKind::Copy => "copy",
            OpKind::Plus1 => "plus1",
            OpKind::Minus1 => "minus1",
            OpKind::Times2 => "times2",
            OpKind::Sum => "sum",
            OpKind::Min => "min",
            OpKind::Max => "max",
            OpKind::Subtract => "subtract",
            OpKind::Mult => "mult",
            OpKind::Mod => "mod",
        }
    }

    /// Operators of a given arity, in declaration order.
    pub fn with_arity(arity: usize) -> Vec<OpKind> {
        OpKind::ALL.iter().copied().filter(|k| k.arity() == arity).collect()
    }

    /// Deterministic skeleton value, or `None` for `unif`.
    ///
    /// Arguments must already lie in `0..vocab`.
    pub fn skeleton(self, args: &[usize], vocab: usize) -> Option<usize> {
        debug_assert_eq!(args.len(), self.arity());
        let v = match self {
            OpKind::Unif => return None,
            OpKind::Copy => args[0],
            OpKind::Plus1 => (args[0] + 1) % vocab,
            OpKind::Minus1 => (args[0] + vocab - 1) % vocab,
            OpKind::Times2 => (2 * args[0]) % vocab,
            OpKind::Sum => (args[0] + args[1]) % vocab,
            OpKind::Min => args[0].min(args[1]),
            OpKind::Max => args[0].max(args[1]),
            OpKind::Subtract => (args[0] + vocab - args[1]) % vocab,
            OpKind::Mult => (args[0] * args[1]) % vocab,
            OpKind::Mod => {
                if args[1] == 0 {
                    args[0]
                } else {
                    args[0] % args[1]
                }
            }
        };
        Some(v)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = CtlabError;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| CtlabError::InvalidScm(format!("unknown operator `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyOperator {
    pub kind: OpKind,
    pub noise_p: f64,
}

impl NoisyOperator {
    pub fn new(kind: OpKind, noise_p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise_p) {
            return Err(CtlabError::OutOfRange(format!("noise_p {noise_p} not in [0,1]")));
        }
        Ok(Self { kind, noise_p })
    }

    pub fn arity(&self) -> usize {
        self.kind.arity()
    }

    /// Probability that the output equals the skeleton value.
    pub fn skeleton_mass(&self, vocab: usize) -> f64 {
        1.0 - self.noise_p + self.noise_p / vocab as f64
    }

    /// Applies the operator given an explicit noise draw: `flip` is a uniform
    /// value in `[0,1)` and `token` a uniform token used when corruption fires.
    pub fn apply(&self, args: &[usize], vocab: usize, flip: f64, token: usize) -> usize {
        assert_eq!(args.len(), self.arity(), "arity mismatch for {}", self.kind);
        assert!(args.iter().all(|&a| a < vocab), "token out of range");
        match self.kind.skeleton(args, vocab) {
            Some(s) if flip >= self.noise_p => s,
            _ => token,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, args: &[usize], vocab: usize, rng: &mut R) -> usize {
        let flip: f64 = rng.gen();
        let token = rng.gen_range(0..vocab);
        self.apply(args, vocab, flip, token)
    }

    /// Writes the output distribution for fixed arguments into `out`.
    pub fn distribution_into(&self, args: &[usize], vocab: usize, out: &mut [f64]) {
        match self.kind.skeleton(args, vocab) {
            None => out.iter_mut().for_each(|p| *p = 1.0 / vocab as f64),
            Some(s) => {
                let base = self.noise_p / vocab as f64;
                out.iter_mut().for_each(|p| *p = base);
                out[s] += 1.0 - self.noise_p;
            }
        }
    }

    pub fn distribution(&self, args: &[usize], vocab: usize) -> Vec<f64> {
        let mut out = vec![0.0; vocab];
        self.distribution_into(args, vocab, &mut out);
        out
    }
}
