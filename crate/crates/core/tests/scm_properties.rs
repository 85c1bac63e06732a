use ctlab_core::scm::fixtures::{
    build_bow_examples, build_example_2_1, build_example_a1, build_gcd_chain, build_mixed_fixture, build_t4_fixture,
    euclid_gcd, gcd_chain_skeleton, random_transportable_collection,
};
use ctlab_core::scm::{exact_joint, sample_dataset, DiscrepancyOracle, DomainCollection, DomainId, JointTable, NoisyOperator, OpKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every domain of the small named fixtures, all with |V|^T at most 10^6.
fn small_fixtures() -> Vec<(String, DomainCollection)> {
    vec![
        ("ex2_1".into(), build_example_2_1()),
        ("a1".into(), build_example_a1()),
        ("bow".into(), build_bow_examples()),
        ("t4".into(), build_t4_fixture(0.1).unwrap()),
        ("mixed".into(), build_mixed_fixture(0.1).unwrap()),
        ("random".into(), random_transportable_collection(3, 6, 3, 2).unwrap()),
    ]
}

#[test]
fn sampling_frequencies_match_the_exact_joint() {
    for (name, dc) in small_fixtures() {
        for d in dc.domain_ids() {
            let scm = dc.scm(d);
            assert!((scm.vocab() as f64).powi(scm.len() as i32) <= 1e6);
            let exact = exact_joint(scm, 1 << 24).unwrap();
            let data = sample_dataset(scm, 100_000, 11, d);
            let empirical = JointTable::empirical(&data, scm.vocab(), 1 << 24).unwrap();
            let gap = exact.max_abs_diff(&empirical);
            assert!(gap <= 0.02, "{name}/{d}: L-inf {gap}");
        }
    }
}

#[test]
fn gcd_chain_samples_match_its_joint() {
    let scm = build_gcd_chain(3, 0.05).unwrap();
    let exact = exact_joint(&scm, 1 << 24).unwrap();
    let data = sample_dataset(&scm, 100_000, 5, DomainId::Target);
    assert!(exact.max_abs_diff(&JointTable::empirical(&data, 3, 1 << 24).unwrap()) <= 0.02);
}

fn gcd_by_remainders(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd_by_remainders(b, a % b)
    }
}

#[test]
fn gcd_skeleton_terminal_is_the_gcd_for_every_pair() {
    for vocab in 2..=12 {
        for a in 0..vocab {
            for b in 0..vocab {
                let want = if a == 0 { b } else { gcd_by_remainders(a, b) };
                assert_eq!(euclid_gcd(a, b), want, "euclid({a}, {b})");
                assert_eq!(gcd_chain_skeleton(vocab, a, b), want, "|V|={vocab} ({a}, {b})");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_noise_law(kind_idx in 0usize..OpKind::ALL.len(), vocab in 2usize..=12, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let kind = OpKind::ALL[kind_idx];
        prop_assume!(kind != OpKind::Unif);
        let op = NoisyOperator::new(kind, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let args: Vec<usize> = (0..kind.arity()).map(|_| rng.gen_range(0..vocab)).collect();
        let skeleton = kind.skeleton(&args, vocab).unwrap();
        let draws = 100_000;
        let hits = (0..draws).filter(|_| op.sample(&args, vocab, &mut rng) == skeleton).count();
        let want = (1.0 - p) + p / vocab as f64;
        prop_assert!((hits as f64 / draws as f64 - want).abs() <= 0.01);
    }

    #[test]
    fn zero_discrepancy_is_an_equivalence(seed in any::<u64>(), n_vars in 2usize..=6, vocab in 2usize..=4, k in 1usize..=3) {
        let dc = random_transportable_collection(seed, n_vars, vocab, k).unwrap();
        let oracle = DiscrepancyOracle::induced(&dc);
        let slots: Vec<_> = dc.domain_ids().into_iter().flat_map(|d| (0..dc.scm(d).len()).map(move |i| (d, i))).collect();
        let same = |a, b| !oracle.delta(a, b);
        for &a in &slots {
            prop_assert!(same(a, a));
            for &b in &slots {
                prop_assert_eq!(same(a, b), same(b, a));
                if !same(a, b) {
                    continue;
                }
                for &c in &slots {
                    if same(b, c) {
                        prop_assert!(same(a, c));
                    }
                }
            }
        }
    }
}
