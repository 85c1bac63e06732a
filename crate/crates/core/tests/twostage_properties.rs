use ctlab_core::inference::{query_truth, Evidence};
use ctlab_core::scm::fixtures::{random_scm, random_transportable_collection};
use ctlab_core::scm::{OpKind, Scm};
use ctlab_core::twostage::{exhaustive_pretrain, optimal_mixture, pretrain_tabular, PretrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXACT: PretrainConfig = PretrainConfig { lambda: 1e-3, max_parents: 1, alpha: 0.0 };

/// Whether every two slots with different mechanisms and equal arity have
/// tables at least `margin` apart under either argument order.
fn mechanisms_separated(scms: &[Scm], margin: f64) -> bool {
    let slots: Vec<(&Scm, usize)> = scms.iter().flat_map(|s| (0..s.len()).map(move |i| (s, i))).collect();
    slots.iter().enumerate().all(|(a, &(sa, i))| {
        slots[a + 1..].iter().all(|&(sb, k)| {
            if sa.mechanism_signature(i) == sb.mechanism_signature(k) || sa.parents(i).len() != sb.parents(k).len() {
                return true;
            }
            let (ta, tb) = (sa.mechanism_cpt(i).unwrap(), sb.mechanism_cpt(k).unwrap());
            let swapped = if tb.arity() == 2 { tb.permute_args(&[1, 0]) } else { tb.clone() };
            ta.max_abs_diff(&tb) >= margin && ta.max_abs_diff(&swapped) >= margin
        })
    })
}

fn mixture_nll(s: f64, p: &[f64], q: &[f64]) -> f64 {
    -p.iter().zip(q).map(|(a, b)| (s * a + (1.0 - s) * b).ln()).sum::<f64>() / p.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn two_phase_search_matches_exhaustive_on_single_parent_sources(seed in any::<u64>(), t in 2usize..=6, vocab in 2usize..=4, k in 1usize..=2) {
        prop_assume!(k * t <= 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unary = [OpKind::Copy, OpKind::Plus1, OpKind::Minus1, OpKind::Times2];
        let scms: Vec<_> = (0..k).map(|_| random_scm(&mut rng, t, vocab, 1, &unary, (0.05, 0.5)).unwrap()).collect();
        let ev: Vec<Evidence> = scms.iter().map(Evidence::exact).collect();
        let two_phase = pretrain_tabular(&ev, vocab, EXACT).unwrap();
        let exhaustive = exhaustive_pretrain(&ev, vocab, EXACT).unwrap();
        prop_assert!((two_phase.objective - exhaustive.objective).abs() <= 1e-9, "{} vs {}", two_phase.objective, exhaustive.objective);
        prop_assert_eq!(two_phase.parent_matrices(), exhaustive.parent_matrices());
    }

    /// Every slot of a merged class has, in the limit, exactly the class
    /// table as its conditional given its learned parents. Distinct
    /// mechanisms must be told apart by more than the class penalty: at
    /// |V| = 2, say, plus1 and minus1 coincide and differ only in noise, and
    /// merging them is then the optimum.
    #[test]
    fn merged_slots_share_their_exact_table(seed in any::<u64>(), t in 2usize..=5, vocab in 2usize..=3) {
        let dc = random_transportable_collection(seed, t, vocab, 2).unwrap();
        prop_assume!(mechanisms_separated(&dc.sources, 0.1));
        let ev: Vec<Evidence> = dc.sources.iter().map(Evidence::exact).collect();
        let r = pretrain_tabular(&ev, vocab, PretrainConfig { max_parents: 2, ..EXACT }).unwrap();
        for (j, scm) in dc.sources.iter().enumerate() {
            for i in 0..t {
                let pa = r.diagrams[j].parents(i);
                let exact = query_truth(scm, i, pa, 1 << 20).unwrap().conditional();
                prop_assert!(exact.max_abs_diff(&r.psi[r.phi[j][i]]) <= 1e-9, "slot ({}, {})", j, i);
            }
        }
    }

    #[test]
    fn optimal_mixture_beats_both_endpoints(
        pq in prop::collection::vec((0.001f64..=1.0, 0.001f64..=1.0), 1..200),
    ) {
        let (p, q): (Vec<f64>, Vec<f64>) = pq.into_iter().unzip();
        let s = optimal_mixture(&p, &q);
        prop_assert!((0.0..=1.0).contains(&s));
        let best_end = mixture_nll(0.0, &p, &q).min(mixture_nll(1.0, &p, &q));
        prop_assert!(mixture_nll(s, &p, &q) <= best_end + 1e-6);
    }
}
