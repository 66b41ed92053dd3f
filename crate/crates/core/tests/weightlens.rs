// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use lens_core::explainer::Explainer;
use lens_core::fixtures;
use lens_core::weightlens::{self, Provenance, WeightLensParams, WeightLensRecord};

#[test]
fn layerwise_matches_single_feature_description() {
    let w = fixtures::wired(3).unwrap();
    let fx = &w.fixture;
    let params = WeightLensParams::default();
    let all = weightlens::describe_feature_layerwise(&fx.model, &fx.transcoders, &params).unwrap();
    let f = w.wiring.layer0[2].0;
    let one = weightlens::describe_feature(&fx.model, &fx.transcoders, f, &BTreeMap::new(), &params).unwrap();
    assert_eq!(one, all[&f]);
    assert!(one.activating_tokens.iter().all(|c| c.provenance == Provenance::Vocab));
}

#[test]
fn lemmas_come_from_activating_tokens() {
    let w = fixtures::wired(0).unwrap();
    let fx = &w.fixture;
    let all = weightlens::describe_feature_layerwise(&fx.model, &fx.transcoders, &WeightLensParams::default()).unwrap();
    let d = &all[&w.wiring.layer0[0].0];
    assert!(d.lemmas.contains("cat"), "{:?}", d.lemmas);
}

#[test]
fn stricter_threshold_never_adds_tokens() {
    let w = fixtures::wired(1).unwrap();
    let fx = &w.fixture;
    let loose = WeightLensParams::default();
    let mut strict = WeightLensParams::default();
    strict.vocab_outliers.z_threshold = 6.0;
    let a = weightlens::describe_feature_layerwise(&fx.model, &fx.transcoders, &loose).unwrap();
    let b = weightlens::describe_feature_layerwise(&fx.model, &fx.transcoders, &strict).unwrap();
    for (f, d) in &b {
        let ids = |x: &weightlens::WeightLensDescription| -> Vec<_> {
            let mut v: Vec<_> = x.activating_tokens.iter().filter(|c| c.provenance == Provenance::Vocab).flat_map(|c| c.ids.clone()).collect();
            v.sort();
            v
        };
        let (strict_ids, loose_ids) = (ids(d), ids(&a[f]));
        assert!(strict_ids.iter().all(|t| loose_ids.contains(t)), "{f}");
    }
}

#[test]
fn records_round_trip_with_stub_summary() {
    let w = fixtures::wired(0).unwrap();
    let fx = &w.fixture;
    let params = WeightLensParams::default();
    let all = weightlens::describe_feature_layerwise(&fx.model, &fx.transcoders, &params).unwrap();
    let d = all[&w.wiring.inheritor].clone();
    let summary = weightlens::refine_with_llm(&d, &Explainer::stub()).unwrap();
    assert!(summary.contains("cat"), "{summary}");
    let rec = WeightLensRecord { description: d, params, summary: Some(summary) };
    let json = serde_json::to_string(&rec).unwrap();
    assert_eq!(serde_json::from_str::<WeightLensRecord>(&json).unwrap(), rec);
}
