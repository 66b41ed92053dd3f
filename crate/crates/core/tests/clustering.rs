// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeSet;

use lens_core::circuitlens::{
    dbscan, jaccard_matrix, neighbours, sample_activations, ActivationRecord, CircuitLens, ClusterParams,
    ClusterReport, ClusterStatus, SamplingParams, NOISE,
};
use lens_core::corpus;
use lens_core::explainer::Explainer;
use lens_core::fixtures;
use lens_testkit::naive_dbscan;
use proptest::prelude::*;

fn sets_strategy() -> impl Strategy<Value = Vec<BTreeSet<u8>>> {
    prop::collection::vec(prop::collection::btree_set(0u8..8, 0..4), 1..40)
}

proptest! {
    #[test]
    fn dbscan_agrees_with_reference(sets in sets_strategy(), eps_i in 0usize..3, min_i in 0usize..3) {
        let eps = [0.3, 0.6, 0.9][eps_i];
        let min_samples = [2, 3, 5][min_i];
        let sim = jaccard_matrix(&sets);
        prop_assert_eq!(dbscan(&sim, eps, min_samples).unwrap(), naive_dbscan(&sim, eps, min_samples));
    }

    #[test]
    fn every_cluster_has_a_core_point(sets in sets_strategy()) {
        let sim = jaccard_matrix(&sets);
        let labels = dbscan(&sim, 0.6, 3).unwrap();
        let core: Vec<bool> = (0..sets.len()).map(|p| neighbours(&sim, p, 0.6).len() >= 3).collect();
        let k = labels.iter().copied().max().unwrap_or(NOISE);
        for c in 0..=k {
            prop_assert!((0..sets.len()).any(|p| labels[p] == c && core[p]));
        }
        for p in 0..sets.len() {
            if labels[p] == NOISE {
                prop_assert!(!core[p]);
                prop_assert!(neighbours(&sim, p, 0.6).iter().all(|&q| !core[q]));
            }
        }
    }

    #[test]
    fn samples_are_distinct_and_seeded(values in prop::collection::vec(0.01f32..10.0, 1..400), seed in 0u64..50) {
        let records: Vec<ActivationRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| ActivationRecord { doc: i as u32, pos: 0, value: v })
            .collect();
        let params = SamplingParams { seed, ..SamplingParams::default() };
        let a = sample_activations(&records, &params).unwrap();
        prop_assert_eq!(a.len(), records.len().min(params.sample_size));
        let unique: BTreeSet<u32> = a.iter().map(|r| r.doc).collect();
        prop_assert_eq!(unique.len(), a.len());
        prop_assert_eq!(&a, &sample_activations(&records, &params).unwrap());
        if records.len() <= params.sample_size {
            prop_assert_eq!(&a, &records);
        }
    }
}

#[test]
fn empty_records_report_no_activations() {
    let w = fixtures::wired(0).unwrap();
    let docs = fixtures::wired_documents(&w.wiring, 0, 4);
    let lens = CircuitLens::new(&w.fixture.model, &w.fixture.transcoders, &docs);
    let fc = lens.cluster_feature(w.wiring.two_circuit, &[], &ClusterParams::default()).unwrap();
    assert_eq!(fc.status, ClusterStatus::NoActivations);
    assert!(fc.samples.is_empty());
}

#[test]
fn cluster_reports_are_reproducible_and_described() {
    let w = fixtures::wired(2).unwrap();
    let fx = &w.fixture;
    let docs = fixtures::wired_documents(&w.wiring, 2, 60);
    let store = corpus::scan_range(&fx.model, &fx.transcoders, &docs, 0, docs.len(), 0.0).unwrap();
    let lens = CircuitLens::new(&fx.model, &fx.transcoders, &docs);
    let params = ClusterParams::default();
    let records = store.activation_records(w.wiring.two_circuit);
    let a = lens.cluster_feature(w.wiring.two_circuit, &records, &params).unwrap();
    let b = lens.cluster_feature(w.wiring.two_circuit, &records, &params).unwrap();
    assert_eq!(a, b);
    let mut report = ClusterReport::new(&a, &params);
    report.describe(&Explainer::stub(), Some(&["cat", "dog"][..])).unwrap();
    assert_eq!(report.clusters.len(), 2);
    assert!(report.clusters.iter().all(|c| c.description.is_some()));
    assert!(report.description.is_some());
    for s in &a.samples {
        assert!(s.pattern.contains("<<<"), "{}", s.pattern);
    }
}
