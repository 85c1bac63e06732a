use std::collections::{BTreeMap, BTreeSet};

use ctlab_core::inference::{query_truth, true_risk, Evidence, DEFAULT_ALPHA};
use ctlab_core::scm::fixtures::{build_example_2_1, build_fig_e_pair, build_mixed_fixture, random_transportable_collection};
use ctlab_core::scm::{sample_dataset, Dataset, DiscrepancyOracle, DomainId};
use ctlab_core::transport::{circuit_tr, module_tr, true_diagrams, BoundModule, ParentLists, TransportOptions};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// A circuit over the single query position pools exactly what the
    /// single-module estimator pools.
    #[test]
    fn one_node_circuit_is_module_transport(seed in any::<u64>(), n_vars in 2usize..=6, vocab in 2usize..=4, k in 1usize..=3) {
        let dc = random_transportable_collection(seed, n_vars, vocab, k).unwrap();
        let oracle = DiscrepancyOracle::induced(&dc);
        let q = n_vars - 1;
        let matches = oracle.matching((DomainId::Target, q));
        prop_assume!(matches.iter().all(|(d, i)| *d != DomainId::Target || *i == q));
        let per_source: Vec<Vec<usize>> =
            (0..k).map(|j| matches.iter().filter(|(d, _)| *d == DomainId::Source(j)).map(|s| s.1).collect()).collect();
        prop_assume!(per_source.iter().all(|m| m.len() <= 1));

        let data: Vec<Dataset> = (0..k).map(|j| sample_dataset(&dc.sources[j], 400, seed ^ j as u64, DomainId::Source(j))).collect();
        let tgt = sample_dataset(&dc.target, 40, seed.wrapping_add(99), DomainId::Target);
        let mut evidence: BTreeMap<DomainId, Evidence> = data.iter().enumerate().map(|(j, d)| (DomainId::Source(j), Evidence::Samples(d))).collect();
        evidence.insert(DomainId::Target, Evidence::Samples(&tgt));
        let circuit = circuit_tr(&evidence, &oracle, &true_diagrams(&dc), q, vocab, TransportOptions::default()).unwrap();

        let target_module = BoundModule::new(q, dc.target.parents(q).to_vec());
        let (delta, sources): (Vec<BTreeSet<usize>>, Vec<BoundModule>) = per_source
            .iter()
            .enumerate()
            .map(|(j, m)| match m.first() {
                Some(&i) => (BTreeSet::new(), BoundModule::new(i, dc.sources[j].parents(i).to_vec())),
                None => (BTreeSet::from([q]), target_module.clone()),
            })
            .unzip();
        let ev: Vec<Evidence> = data.iter().map(Evidence::Samples).collect();
        let single = module_tr(&ev, &Evidence::Samples(&tgt), &delta, &ParentLists { sources, target: target_module }, vocab, DEFAULT_ALPHA).unwrap();
        prop_assert_eq!(&circuit.predictor.nodes()[0].cpt, &single);
    }

    /// Permuting the target's parent order permutes the table's arguments
    /// and nothing else.
    #[test]
    fn parent_order_moves_arguments(seed in any::<u64>()) {
        let dc = build_example_2_1();
        let src = sample_dataset(&dc.sources[0], 2000, seed, DomainId::Source(0));
        let tgt = sample_dataset(&dc.target, 50, seed ^ 1, DomainId::Target);
        let ev = [Evidence::Samples(&src)];
        let fit = |src_pa: Vec<usize>, tgt_pa: Vec<usize>| {
            let parents = ParentLists { sources: vec![BoundModule::new(3, src_pa)], target: BoundModule::new(3, tgt_pa) };
            module_tr(&ev, &Evidence::Samples(&tgt), &[BTreeSet::new()], &parents, 10, DEFAULT_ALPHA).unwrap()
        };
        let straight = fit(vec![0, 1], vec![2, 1]);
        let swapped = fit(vec![1, 0], vec![1, 2]);
        for a in 0..10 {
            for b in 0..10 {
                prop_assert_eq!(straight.row(&[a, b]), swapped.row(&[b, a]));
            }
        }
    }
}

#[test]
fn unmatched_position_never_borrows_source_rows() {
    let dc = build_mixed_fixture(0.1).unwrap();
    let oracle = DiscrepancyOracle::induced(&dc);
    let src = sample_dataset(&dc.sources[0], 5000, 1, DomainId::Source(0));
    let diagrams = true_diagrams(&dc);
    for n in [0usize, 25] {
        let tgt = sample_dataset(&dc.target, n, 2, DomainId::Target);
        let evidence = BTreeMap::from([(DomainId::Source(0), Evidence::Samples(&src)), (DomainId::Target, Evidence::Samples(&tgt))]);
        let res = circuit_tr(&evidence, &oracle, &diagrams, 3, 3, TransportOptions::default()).unwrap();
        let novel = res.status.iter().find(|s| s.position == 4).unwrap();
        assert!(novel.pooled.is_empty() && !novel.transported);
        assert_eq!(novel.weight, n as f64);
        let cpt = &res.predictor.nodes().iter().find(|c| c.position == 4).unwrap().cpt;
        if n == 0 {
            assert_eq!(cpt.flagged().len(), cpt.n_rows());
            assert!(cpt.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        }
        assert!(res.status.iter().find(|s| s.position == 3).unwrap().transported);
    }
}

#[test]
fn fig_e_source_only_excess_falls_with_source_size() {
    let dc = build_fig_e_pair(0.1).unwrap();
    let oracle = DiscrepancyOracle::induced(&dc);
    let diagrams = true_diagrams(&dc);
    let truth = query_truth(&dc.target, 9, &[0], 1 << 24).unwrap();
    let means: Vec<f64> = [1_000usize, 10_000, 100_000]
        .iter()
        .map(|&n_src| {
            let total: f64 = (0..3u64)
                .map(|seed| {
                    let src = sample_dataset(&dc.sources[0], n_src, seed, DomainId::Source(0));
                    let evidence = BTreeMap::from([(DomainId::Source(0), Evidence::Samples(&src))]);
                    let res = circuit_tr(&evidence, &oracle, &diagrams, 1, 10, TransportOptions::default()).unwrap();
                    assert_eq!(res.n_transported(), 9);
                    true_risk(&res.predictor, &truth).unwrap().excess
                })
                .sum();
            total / 3.0
        })
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}
