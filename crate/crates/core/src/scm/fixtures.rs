//! Named fixtures and random SCM generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::domains::DomainCollection;
use super::model::{ExogenousVar, Mechanism, Scm, Variable};
use super::operator::{NoisyOperator, OpKind};
use crate::error::{CtlabError, Result};

/// Corruption level reproducing a 0.91 / 0.01 additive noise law at |V| = 10.
pub const DEFAULT_NOISE: f64 = 0.1;

fn op(kind: OpKind, p: f64) -> NoisyOperator {
    NoisyOperator::new(kind, p).expect("fixture noise in range")
}

fn named(vocab: usize, nodes: Vec<(&str, Vec<usize>, NoisyOperator)>) -> Result<Scm> {
    let variables = nodes
        .into_iter()
        .map(|(name, parents, op)| Variable { name: name.to_string(), parents, mechanism: Mechanism::Noisy(op) })
        .collect();
    Scm::new(vocab, variables, Vec::new())
}

/// Two-domain labelling example over `(x1, x2, x3, y)` with |V| = 10.
///
/// `y` is the first parent minus the second plus additive noise putting 0.91
/// on zero and 0.01 on every other shift, which is exactly a noisy
/// `subtract` at corruption 0.1. The source reads `(x1, x2)`, the target
/// `(x3, x2)`.
pub fn build_example_2_1() -> DomainCollection {
    let p = DEFAULT_NOISE;
    let mk = |parents: Vec<usize>| {
        named(
            10,
            vec![
                ("x1", vec![], op(OpKind::Unif, 0.0)),
                ("x2", vec![], op(OpKind::Unif, 0.0)),
                ("x3", vec![], op(OpKind::Unif, 0.0)),
                ("y", parents, op(OpKind::Subtract, p)),
            ],
        )
        .expect("valid fixture")
    };
    DomainCollection::new(vec![mk(vec![0, 1])], mk(vec![2, 1])).expect("valid fixture")
}

/// Binary `(x, y)` pair where the source label ignores `x` and the target
/// label copies `x` with a 0.1 flip.
pub fn build_example_a1() -> DomainCollection {
    let source = named(2, vec![("x", vec![], op(OpKind::Unif, 0.0)), ("y", vec![], op(OpKind::Unif, 0.0))]);
    let target = named(2, vec![("x", vec![], op(OpKind::Unif, 0.0)), ("y", vec![0], op(OpKind::Copy, 0.2))]);
    DomainCollection::new(vec![source.expect("valid fixture")], target.expect("valid fixture")).expect("valid fixture")
}

/// Subtraction-Euclid unrolled |V| times over `3|V| + 2` positions.
///
/// Positions 0 and 1 are uniform roots; every round appends `max`, `min` and
/// their difference of the previous two values. The query node is the last
/// position.
pub fn build_gcd_chain(vocab: usize, noise_p: f64) -> Result<Scm> {
    if vocab < 3 {
        return Err(CtlabError::InvalidScm("gcd chain needs |V| >= 3".into()));
    }
    let mut nodes = vec![(vec![], op(OpKind::Unif, 0.0)), (vec![], op(OpKind::Unif, 0.0))];
    for round in 1..=vocab {
        // 1-based indices 3r-2, 3r-1 become 0-based 3r-3, 3r-2
        let (a, b) = (3 * round - 2, 3 * round - 3);
        let hi = 3 * round - 1;
        nodes.push((vec![a, b], NoisyOperator::new(OpKind::Max, noise_p)?));
        nodes.push((vec![a, b], NoisyOperator::new(OpKind::Min, noise_p)?));
        nodes.push((vec![hi, hi + 1], NoisyOperator::new(OpKind::Subtract, noise_p)?));
    }
    Scm::from_operators(vocab, nodes)
}

/// Deterministic skeleton of the gcd chain: the query value for `(a, b)`.
pub fn gcd_chain_skeleton(vocab: usize, a: usize, b: usize) -> usize {
    let (mut x, mut y) = (a, b);
    let mut last = 0;
    for _ in 0..vocab {
        let hi = x.max(y);
        let lo = x.min(y);
        last = (hi + vocab - lo) % vocab;
        // next round reads (previous difference, previous min)
        x = lo;
        y = last;
    }
    last
}

/// Subtraction-Euclid reference: gcd(a, 0) = a, gcd(0, 0) = 0.
pub fn euclid_gcd(a: usize, b: usize) -> usize {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        let r = x % y;
        x = y;
        y = r;
    }
    x
}

/// Three single-operator sources over `(x1, x2, y)` with `y` equal to
/// `max`, `min` and `subtract` of `(x2, x1)`, matching the chain's argument
/// order.
pub fn build_gcd_sources(vocab: usize, noise_p: f64) -> Result<Vec<Scm>> {
    [OpKind::Max, OpKind::Min, OpKind::Subtract]
        .into_iter()
        .map(|k| {
            Scm::from_operators(
                vocab,
                vec![(vec![], op(OpKind::Unif, 0.0)), (vec![], op(OpKind::Unif, 0.0)), (vec![1, 0], NoisyOperator::new(k, noise_p)?)],
            )
        })
        .collect()
}

pub fn build_gcd_collection(vocab: usize, noise_p: f64) -> Result<DomainCollection> {
    DomainCollection::new(build_gcd_sources(vocab, noise_p)?, build_gcd_chain(vocab, noise_p)?)
}

/// The ten-position source/target pair with |V| = 10 whose target query
/// `v10 | v1..v5` is circuit-transportable from the source.
pub fn build_fig_e_pair(noise_p: f64) -> Result<DomainCollection> {
    use OpKind::*;
    let spec = |rows: [(OpKind, &[usize]); 10]| -> Result<Scm> {
        let nodes = rows
            .iter()
            .map(|(k, pa)| Ok((pa.to_vec(), NoisyOperator::new(*k, if *k == Unif { 0.0 } else { noise_p })?)))
            .collect::<Result<Vec<_>>>()?;
        Scm::from_operators(10, nodes)
    };
    let source = spec([
        (Unif, &[]),
        (Times2, &[0]),
        (Min, &[0, 1]),
        (Sum, &[0, 1]),
        (Min, &[0, 3]),
        (Subtract, &[0, 4]),
        (Min, &[0, 4]),
        (Sum, &[3, 4]),
        (Min, &[3, 5]),
        (Sum, &[2, 3]),
    ])?;
    let target = spec([
        (Unif, &[]),
        (Times2, &[0]),
        (Subtract, &[0, 1]),
        (Sum, &[1, 2]),
        (Subtract, &[0, 3]),
        (Sum, &[0, 4]),
        (Subtract, &[3, 4]),
        (Sum, &[1, 5]),
        (Sum, &[3, 6]),
        (Min, &[6, 8]),
    ])?;
    DomainCollection::new(vec![source], target)
}

/// Binary bow graph `x <-> y, x -> y` with two sources and a target.
///
/// `x = u_x xor u_xy`; `y = (x xor u_xy) xor u_y` except in the second source
/// where the outer operation is `or`. Exogenous laws: `u_y ~ Bern(0.05)`,
/// `u_xy ~ Bern(0.95)`, `u_x ~ Bern(0.2)` in the first source and
/// `Bern(0.9)` elsewhere.
pub fn build_bow_examples() -> DomainCollection {
    let (x_table, xor, or) = (vec![0, 1, 1, 0], bow_y_table(|a, b| a ^ b), bow_y_table(|a, b| a | b));
    let law = |p_ux| BowLaw { p_ux, p_uy: 0.05, p_uxy: 0.95 };
    let sources = vec![bow_scm(&x_table, &xor, law(0.2)), bow_scm(&x_table, &or, law(0.9))];
    DomainCollection::new(sources, bow_scm(&x_table, &xor, law(0.9))).expect("valid bow fixture")
}

/// `y = g(x xor u_xy, u_y)` laid out over `(x, u_y, u_xy)`.
fn bow_y_table(g: impl Fn(usize, usize) -> usize) -> Vec<usize> {
    let mut t = Vec::with_capacity(8);
    for x in 0..2usize {
        for uy in 0..2usize {
            for uxy in 0..2usize {
                t.push(g(x ^ uxy, uy));
            }
        }
    }
    t
}

#[derive(Clone, Copy)]
struct BowLaw {
    p_ux: f64,
    p_uy: f64,
    p_uxy: f64,
}

/// Binary `x -> y` SCM with exogenous `(u_x, u_y, u_xy)`; `x_table` is
/// indexed by `(u_x, u_xy)`, `y_table` by `(x, u_y, u_xy)`.
fn bow_scm(x_table: &[usize], y_table: &[usize], law: BowLaw) -> Scm {
    let variables = vec![
        Variable { name: "x".into(), parents: vec![], mechanism: Mechanism::Table { exogenous: vec![0, 2], table: x_table.to_vec() } },
        Variable { name: "y".into(), parents: vec![0], mechanism: Mechanism::Table { exogenous: vec![1, 2], table: y_table.to_vec() } },
    ];
    let exo = vec![
        ExogenousVar::bernoulli("u_x", law.p_ux),
        ExogenousVar::bernoulli("u_y", law.p_uy),
        ExogenousVar::bernoulli("u_xy", law.p_uxy),
    ];
    Scm::new(2, variables, exo).expect("valid bow SCM")
}

/// Random bow triple with the same sharing pattern as the named one: the
/// first source keeps the target's `y` mechanism and changes `x` (table and
/// `u_x` law), the second keeps `x` and changes `y`. Laws are drawn in
/// `[0.05, 0.95]`; the first source's `u_x` law always differs.
pub fn random_bow_collection(seed: u64) -> DomainCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = |len: usize| -> Vec<usize> { (0..len).map(|_| rng.gen_range(0..2)).collect() };
    let (x_target, x_first, y_target, y_second) = (table(4), table(4), table(8), table(8));
    let law = BowLaw { p_ux: rng.gen_range(0.05..0.95), p_uy: rng.gen_range(0.05..0.95), p_uxy: rng.gen_range(0.05..0.95) };
    let mut p_first = rng.gen_range(0.05..0.95);
    if (p_first - law.p_ux).abs() < 1e-3 {
        p_first = 1.0 - p_first;
    }
    let first = bow_scm(&x_first, &y_target, BowLaw { p_ux: p_first, ..law });
    let second = bow_scm(&x_target, &y_second, law);
    DomainCollection::new(vec![first, second], bow_scm(&x_target, &y_target, law)).expect("valid bow triple")
}

/// Four-position, |V| = 3, single-source fixture: every target mechanism
/// appears in the source at a different position with different parents.
pub fn build_t4_fixture(noise_p: f64) -> Result<DomainCollection> {
    let source = Scm::from_operators(
        3,
        vec![
            (vec![], op(OpKind::Unif, 0.0)),
            (vec![0], NoisyOperator::new(OpKind::Plus1, noise_p)?),
            (vec![1, 0], NoisyOperator::new(OpKind::Subtract, noise_p)?),
            (vec![2, 1], NoisyOperator::new(OpKind::Mult, noise_p)?),
        ],
    )?;
    let target = Scm::from_operators(
        3,
        vec![
            (vec![], op(OpKind::Unif, 0.0)),
            (vec![], op(OpKind::Unif, 0.0)),
            (vec![1], NoisyOperator::new(OpKind::Plus1, noise_p)?),
            (vec![2, 0], NoisyOperator::new(OpKind::Subtract, noise_p)?),
        ],
    )?;
    DomainCollection::new(vec![source], target)
}

/// Five-position, |V| = 3 fixture mixing a transportable position (3, a
/// `plus1` of position 0) with a novel one (4, a `times2` the source never
/// uses).
pub fn build_mixed_fixture(noise_p: f64) -> Result<DomainCollection> {
    let source = build_t4_fixture(noise_p)?.sources.remove(0);
    let target = Scm::from_operators(
        3,
        vec![
            (vec![], op(OpKind::Unif, 0.0)),
            (vec![], op(OpKind::Unif, 0.0)),
            (vec![], op(OpKind::Unif, 0.0)),
            (vec![0], NoisyOperator::new(OpKind::Plus1, noise_p)?),
            (vec![3], NoisyOperator::new(OpKind::Times2, noise_p)?),
        ],
    )?;
    DomainCollection::new(vec![source], target)
}

/// Random operator SCM: position 0 is a uniform root, later positions pick a
/// random arity up to `max_parents`, distinct random parents and a random
/// operator of that arity from `pool`.
pub fn random_scm<R: Rng + ?Sized>(
    rng: &mut R,
    n_vars: usize,
    vocab: usize,
    max_parents: usize,
    pool: &[OpKind],
    noise: (f64, f64),
) -> Result<Scm> {
    let mut nodes = Vec::with_capacity(n_vars);
    for i in 0..n_vars {
        let arity = rng.gen_range(0..=max_parents.min(i).min(2));
        let kinds: Vec<OpKind> = pool.iter().copied().filter(|k| k.arity() == arity).collect();
        let kind = if kinds.is_empty() { OpKind::Unif } else { *kinds.choose(rng).expect("non-empty") };
        let arity = kind.arity();
        let mut candidates: Vec<usize> = (0..i).collect();
        candidates.shuffle(rng);
        let parents = candidates[..arity].to_vec();
        let p = if kind == OpKind::Unif { 0.0 } else { rng.gen_range(noise.0..noise.1) };
        nodes.push((parents, NoisyOperator::new(kind, p)?));
    }
    Scm::from_operators(vocab, nodes)
}

/// Random circuit-transportable collection for a `seed`: the target is a
/// random SCM and each source re-uses a random subset of the target's
/// mechanisms (so every target mechanism appears in some source), placed at
/// random positions with random parents.
pub fn random_transportable_collection(seed: u64, n_vars: usize, vocab: usize, n_sources: usize) -> Result<DomainCollection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = OpKind::ALL;
    let target = random_scm(&mut rng, n_vars, vocab, 2, &pool, (0.05, 0.5))?;
    let mechs: Vec<NoisyOperator> = (0..n_vars).filter_map(|i| target.operator(i).copied()).collect();
    let mut sources: Vec<Vec<(Vec<usize>, NoisyOperator)>> = vec![Vec::new(); n_sources];
    // deal every target mechanism to some source, then pad with random picks
    let mut deck: Vec<NoisyOperator> = mechs.clone();
    deck.shuffle(&mut rng);
    let mut hands: Vec<Vec<NoisyOperator>> = vec![Vec::new(); n_sources];
    for (k, m) in deck.into_iter().enumerate() {
        hands[k % n_sources].push(m);
    }
    for (j, hand) in hands.iter_mut().enumerate() {
        while hand.len() < n_vars {
            hand.push(*mechs.choose(&mut rng).expect("non-empty"));
        }
        // mechanisms need enough earlier positions for their arity
        hand.sort_by_key(|m| m.arity());
        let mut placed = Vec::with_capacity(n_vars);
        for (i, m) in hand.iter().enumerate() {
            let m = if m.arity() > i { op(OpKind::Unif, 0.0) } else { *m };
            let mut cands: Vec<usize> = (0..i).collect();
            cands.shuffle(&mut rng);
            placed.push((cands[..m.arity()].to_vec(), m));
        }
        sources[j] = placed;
    }
    let sources = sources.into_iter().map(|nodes| Scm::from_operators(vocab, nodes)).collect::<Result<Vec<_>>>()?;
    DomainCollection::new(sources, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::domains::DiscrepancyOracle;
    use crate::scm::joint::exact_joint;
    use crate::scm::sample::{sample_dataset, DomainId};

    #[test]
    fn example_2_1_parent_orders() {
        let dc = build_example_2_1();
        assert_eq!(dc.sources[0].parents(3), &[0, 1]);
        assert_eq!(dc.target.parents(3), &[2, 1]);
        let o = DiscrepancyOracle::induced(&dc);
        assert!(!o.delta((DomainId::Source(0), 3), (DomainId::Target, 3)));
    }

    #[test]
    fn example_2_1_noise_law() {
        let dc = build_example_2_1();
        let j = exact_joint(&dc.sources[0], 1_000_000).unwrap();
        let c = j.conditional(3, &[0, 1]).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let y = (a + 10 - b) % 10;
                assert!((c.prob(y, &[a, b]) - 0.91).abs() < 1e-12);
                assert!((c.prob((y + 1) % 10, &[a, b]) - 0.01).abs() < 1e-12);
            }
        }
        let d = sample_dataset(&dc.sources[0], 100_000, 0, DomainId::Source(0));
        let hits = d.rows().filter(|r| r[3] == (r[0] + 10 - r[1]) % 10).count();
        assert!((hits as f64 / 1e5 - 0.91).abs() < 0.01);
    }

    #[test]
    fn gcd_skeleton_matches_euclid() {
        for vocab in 3..=12 {
            for a in 0..vocab {
                for b in 0..vocab {
                    assert_eq!(gcd_chain_skeleton(vocab, a, b), euclid_gcd(a, b), "|V|={vocab} ({a},{b})");
                }
            }
        }
        assert_eq!(gcd_chain_skeleton(7, 6, 4), 2);
        assert_eq!(gcd_chain_skeleton(7, 5, 3), 1);
        assert_eq!(gcd_chain_skeleton(7, 0, 0), 0);
    }

    #[test]
    fn gcd_chain_shape_and_skeleton_trace() {
        let scm = build_gcd_chain(7, 0.0).unwrap();
        assert_eq!(scm.len(), 23);
        assert_eq!(scm.op_kind(2), Some(OpKind::Max));
        assert_eq!(scm.parents(2), &[1, 0]);
        assert_eq!(scm.parents(4), &[2, 3]);
        assert_eq!(scm.op_kind(22), Some(OpKind::Subtract));
        // noiseless sampling follows the skeleton for every root pair
        let d = sample_dataset(&scm, 500, 1, DomainId::Target);
        for r in d.rows() {
            assert_eq!(r[22], gcd_chain_skeleton(7, r[0], r[1]));
        }
    }

    #[test]
    fn gcd_sources_match_chain_mechanisms() {
        let dc = build_gcd_collection(6, 0.05).unwrap();
        let o = DiscrepancyOracle::induced(&dc);
        let t = DomainId::Target;
        // max source matches every max position, min every min position
        for round in 1..=6 {
            assert!(!o.delta((DomainId::Source(0), 2), (t, 3 * round - 1)));
            assert!(!o.delta((DomainId::Source(1), 2), (t, 3 * round)));
            assert!(!o.delta((DomainId::Source(2), 2), (t, 3 * round + 1)));
            assert!(o.delta((DomainId::Source(1), 2), (t, 3 * round + 1)));
        }
    }

    #[test]
    fn fig_e_pair_shape() {
        let dc = build_fig_e_pair(DEFAULT_NOISE).unwrap();
        assert_eq!(dc.sources[0].parents(9), &[2, 3]);
        assert_eq!(dc.target.parents(9), &[6, 8]);
        let src: Vec<OpKind> = (0..10).map(|i| dc.sources[0].op_kind(i).unwrap()).collect();
        for i in 0..10 {
            assert!(src.contains(&dc.target.op_kind(i).unwrap()));
        }
        let o = DiscrepancyOracle::induced(&dc);
        for i in 0..10 {
            assert!(o.matching((DomainId::Target, i)).iter().any(|s| s.0 == DomainId::Source(0)));
        }
    }

    #[test]
    fn bow_anchor_probabilities() {
        let dc = build_bow_examples();
        let p1 = exact_joint(&dc.sources[0], 16).unwrap();
        let ps = exact_joint(&dc.target, 16).unwrap();
        let c1 = p1.conditional(1, &[0]).unwrap();
        let cs = ps.conditional(1, &[0]).unwrap();
        assert!((c1.prob(1, &[1]) - 0.0475 / 0.77).abs() < 1e-12);
        assert!((cs.prob(1, &[1]) - 0.0475 / 0.14).abs() < 1e-12);
        let o = DiscrepancyOracle::induced(&dc);
        assert_eq!(o.delta_set(0).into_iter().collect::<Vec<_>>(), vec![0]);
        assert_eq!(o.delta_set(1).into_iter().collect::<Vec<_>>(), vec![1]);
        assert!(dc.target.is_confounded(0) && dc.target.is_confounded(1));
    }

    #[test]
    fn random_collections_are_transportable() {
        for seed in 0..20 {
            let dc = random_transportable_collection(seed, 6, 3, 2).unwrap();
            let o = DiscrepancyOracle::induced(&dc);
            for i in 0..6 {
                let m = o.matching((DomainId::Target, i));
                assert!(m.iter().any(|s| matches!(s.0, DomainId::Source(_))), "seed {seed} position {i}");
            }
        }
    }
}
