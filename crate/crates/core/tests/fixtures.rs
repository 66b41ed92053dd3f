// SPDX-License-Identifier: MIT OR Apache-2.0

use lens_core::fixtures::{self, Fixture};
use lens_core::{ForwardMode, TokenId};

#[test]
fn wired_features_fire_on_their_tokens_only() {
    let w = fixtures::wired(0).unwrap();
    let fx = &w.fixture;
    for (f, toks) in w.wiring.expected_tokens() {
        let tc = fx.transcoders.layer(f.layer).unwrap();
        for j in 0..fx.model.config.vocab_size as TokenId {
            let run = fx
                .model
                .forward(&[j], ForwardMode::Transcoder, Some(&fx.transcoders))
                .unwrap();
            let a = tc.feature_activations(&run).unwrap()[[0, f.feature]];
            assert_eq!(a > 0.0, toks.contains(&j), "{f} on token {j}");
        }
    }
}

#[test]
fn toy_transcoders_track_the_mlp() {
    let fx = fixtures::toy(2, 7).unwrap();
    let err = fx.model.meta["transcoder_logit_max_abs_err"].as_f64().unwrap();
    eprintln!("toy logit error {err}");
    let logits = fx
        .model
        .forward(&[1, 2, 3], ForwardMode::Mlp, None)
        .unwrap()
        .logits;
    let scale = logits.iter().fold(0.0f32, |m, x| m.max(x.abs())) as f64;
    assert!(err < 0.5 * scale, "error {err} vs logit scale {scale}");
}

#[test]
fn fixtures_round_trip_through_disk() {
    let fx = fixtures::toy(2, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fx.save(dir.path(), "toy_2L").unwrap();
    let back = Fixture::load(&dir.path().join("toy_2L")).unwrap();
    let toks = fx.model.vocab.encode("The cat saw the dog.");
    let a = fx.model.forward(&toks, ForwardMode::Transcoder, Some(&fx.transcoders)).unwrap();
    let b = back.model.forward(&toks, ForwardMode::Transcoder, Some(&back.transcoders)).unwrap();
    assert_eq!(a.logits, b.logits);
    assert_eq!(back.model.meta, fx.model.meta);
}

#[test]
fn toy_is_deterministic() {
    let a = fixtures::toy(2, 11).unwrap();
    let b = fixtures::toy(2, 11).unwrap();
    assert_eq!(a.model.w_emb, b.model.w_emb);
    assert_eq!(a.transcoders.layer(1).unwrap().w_dec, b.transcoders.layer(1).unwrap().w_dec);
}
