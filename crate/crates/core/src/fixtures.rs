// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded toy models and corpora for tests, benches and demos.
//!
//! * [`toy`]: random GPT-2-style model with ReLU (layer 0) and JumpReLU
//!   transcoders fitted to its MLPs by ridge regression.
//! * [`toy_identity`]: the same with every `W_O` zeroed and unit LN2
//!   gains, so the frozen Jacobian between layers is the identity.
//! * [`wired`]: hand-wired two-layer model whose features respond to known
//!   tokens (see [`Wiring`]).

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForwardMode, LayerWeights, Model, ModelConfig, Positional, TokenId, Vocabulary};
use crate::transcoder::{FeatureId, Gate, Transcoder, TranscoderSet};

const NOUNS: &[&str] = &[
    "cat", "dog", "bird", "fish", "horse", "cow", "king", "queen", "child", "teacher", "doctor",
    "farmer", "city", "river", "mountain", "house", "garden", "school", "market", "road", "book",
    "letter", "song", "story", "game", "car", "train", "boat", "ship", "tree", "flower", "apple",
    "bread", "water", "fire", "stone",
];
const PAST: &[&str] = &[
    "saw", "found", "liked", "heard", "followed", "painted", "visited", "built", "carried",
    "wanted", "helped", "watched",
];
const PRESENT: &[&str] = &[
    "runs", "walks", "sleeps", "sings", "reads", "writes", "eats", "swims", "jumps", "waits",
];
const ADJECTIVES: &[&str] = &[
    "red", "blue", "green", "small", "big", "old", "young", "happy", "sad", "quiet", "loud",
    "bright", "dark", "warm", "cold",
];
const FUNCTION: &[&str] = &[
    "the", "a", "an", "and", "but", "or", "of", "to", "in", "on", "at", "with", "from", "by",
    "for", "is", "was", "are", "were", "this", "that", "it", "he", "she", "they", "we", "one",
    "two", "three",
];
const CAPITALIZED: &[&str] = &["The", "A", "He", "She", "They", "We", "It", "This", "That", "Is"];
const PUNCTUATION: &[&str] = &[".", ",", "!", "?"];

/// Regular tokens of the fixture vocabulary: every word bare and with a
/// leading space, capitalized sentence starters, punctuation.
pub fn fixture_words() -> Vec<String> {
    let mut out = Vec::new();
    for w in NOUNS.iter().chain(PAST).chain(PRESENT).chain(ADJECTIVES).chain(FUNCTION) {
        out.push(format!(" {w}"));
        out.push((*w).to_string());
    }
    for w in CAPITALIZED {
        out.push((*w).to_string());
        out.push(format!(" {w}"));
    }
    out.extend(PUNCTUATION.iter().map(|p| p.to_string()));
    out.sort();
    out.dedup();
    out
}

pub fn fixture_vocab() -> Vocabulary {
    Vocabulary::from_regular(fixture_words()).expect("fixture vocabulary is well formed")
}

/// `n` template sentences over the fixture vocabulary.
pub fn corpus_sentences(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |xs: &[&'static str]| *xs.choose(&mut rng).expect("non-empty");
    (0..n)
        .map(|k| match k % 9 {
            0 => format!("The {} {} {} the {}.", pick(ADJECTIVES), pick(NOUNS), pick(PAST), pick(NOUNS)),
            1 => format!("The {} {} in the {}.", pick(NOUNS), pick(PRESENT), pick(NOUNS)),
            2 => format!("He {} a {} {} and a {}.", pick(PAST), pick(ADJECTIVES), pick(NOUNS), pick(NOUNS)),
            3 => format!("They {} the {} at the {}.", pick(PAST), pick(NOUNS), pick(NOUNS)),
            4 => format!("This {} is {}.", pick(NOUNS), pick(ADJECTIVES)),
            5 => format!("We {} {} {} by the {}.", pick(PAST), pick(&["one", "two", "three"]), pick(NOUNS), pick(NOUNS)),
            6 => format!("She {} that the {} was {}.", pick(PAST), pick(NOUNS), pick(ADJECTIVES)),
            7 => format!("Is the {} {}?", pick(NOUNS), pick(ADJECTIVES)),
            _ => format!("The {} {} with the {} {}!", pick(NOUNS), pick(PRESENT), pick(ADJECTIVES), pick(NOUNS)),
        })
        .collect()
}

/// Corpus text: sentences in paragraphs of five, plus a numbers-only line
/// and a repeated sentence for the ingest filters to remove.
pub fn corpus_text(seed: u64, n: usize) -> String {
    let sentences = corpus_sentences(seed, n);
    let mut paras: Vec<String> = sentences.chunks(5).map(|c| c.join(" ")).collect();
    paras.push("123 456.".into());
    if let Some(first) = sentences.first() {
        paras.push(first.clone());
    }
    paras.join("\n\n") + "\n"
}

/// Model plus transcoders.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub model: Model,
    pub transcoders: TranscoderSet,
}

impl Fixture {
    /// Writes the model and its transcoders under `dir/stem`; returns the
    /// model manifest path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let path = self.model.save(dir, stem)?;
        self.transcoders.save(dir, stem)?;
        Ok(path)
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let model = Model::load(stem)?;
        let transcoders = TranscoderSet::load(stem, model.n_layers())?;
        Ok(Self { model, transcoders })
    }
}

fn gaussian(rng: &mut ChaCha8Rng, shape: (usize, usize), std: f32) -> Array2<f32> {
    let n = Normal::new(0.0f32, std).expect("valid std");
    Array2::from_shape_simple_fn(shape, || n.sample(rng))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize, mean: f32, std: f32) -> Array1<f32> {
    let n = Normal::new(mean, std).expect("valid std");
    Array1::from_shape_simple_fn(len, || n.sample(rng))
}

fn toy_config(n_layers: usize, vocab_size: usize) -> ModelConfig {
    ModelConfig {
        n_layers,
        d_model: 64,
        n_heads: 4,
        d_head: 16,
        d_mlp: 256,
        vocab_size,
        max_seq: 64,
        ln_eps: 1e-5,
        positional: Positional::LearnedAbsolute,
        bos_token: None,
    }
}

fn random_layer(rng: &mut ChaCha8Rng, cfg: &ModelConfig, zero_w_o: bool) -> LayerWeights {
    let (d, m) = (cfg.d_model, cfg.d_mlp);
    let s = 1.0 / (d as f32).sqrt();
    LayerWeights {
        ln1_w: gaussian_vec(rng, d, 1.0, 0.1),
        ln1_b: gaussian_vec(rng, d, 0.0, 0.05),
        w_q: gaussian(rng, (d, d), s),
        b_q: gaussian_vec(rng, d, 0.0, 0.02),
        w_k: gaussian(rng, (d, d), s),
        b_k: gaussian_vec(rng, d, 0.0, 0.02),
        w_v: gaussian(rng, (d, d), s),
        b_v: gaussian_vec(rng, d, 0.0, 0.02),
        w_o: if zero_w_o {
            Array2::zeros((d, d))
        } else {
            gaussian(rng, (d, d), 0.5 * s)
        },
        b_o: gaussian_vec(rng, d, 0.0, 0.02),
        ln2_w: if zero_w_o {
            Array1::ones(d)
        } else {
            gaussian_vec(rng, d, 1.0, 0.1)
        },
        ln2_b: gaussian_vec(rng, d, 0.0, 0.05),
        mlp_w_in: gaussian(rng, (d, m), s),
        mlp_b_in: gaussian_vec(rng, m, -1.2, 0.1),
        mlp_w_out: gaussian(rng, (m, d), 1.0 / (m as f32).sqrt()),
        mlp_b_out: gaussian_vec(rng, d, 0.0, 0.02),
    }
}

/// Ridge solution of `[A 1] [W; b] ≈ Y`.
fn fit_decoder(a: &Array2<f32>, y: &Array2<f32>) -> Result<(Array2<f32>, Array1<f32>)> {
    let (n, f) = a.dim();
    let d = y.ncols();
    let x = DMatrix::<f64>::from_fn(n, f + 1, |i, j| if j < f { a[[i, j]] as f64 } else { 1.0 });
    let yy = DMatrix::<f64>::from_fn(n, d, |i, j| y[[i, j]] as f64);
    let mut gram = x.transpose() * &x;
    let lambda = 1e-4 * gram.trace() / (f + 1) as f64 + 1e-9;
    for i in 0..f {
        gram[(i, i)] += lambda;
    }
    let rhs = x.transpose() * yy;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Format("decoder fit is singular".into()))?;
    let sol = chol.solve(&rhs);
    let w = Array2::from_shape_fn((f, d), |(i, j)| sol[(i, j)] as f32);
    let b = Array1::from_shape_fn(d, |j| sol[(f, j)] as f32);
    Ok((w, b))
}

fn random_sequences(rng: &mut ChaCha8Rng, model: &Model, n: usize, len: usize) -> Vec<Vec<TokenId>> {
    let regular = model.vocab.n_regular() as TokenId;
    (0..n)
        .map(|_| (0..len).map(|_| rng.random_range(0..regular)).collect())
        .collect()
}

/// Fits transcoders to the MLPs of `model`: encoders copied from the MLP
/// input weights, decoders regressed on MLP outputs.
fn fit_transcoders(rng: &mut ChaCha8Rng, model: &Model) -> Result<TranscoderSet> {
    let seqs = random_sequences(rng, model, 48, 32);
    let runs = seqs
        .iter()
        .map(|s| model.forward(s, ForwardMode::Mlp, None))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::new();
    for (l, lw) in model.layers.iter().enumerate() {
        let x = ndarray::concatenate(
            Axis(0),
            &runs.iter().map(|r| r.layers[l].ln2_out.view()).collect::<Vec<_>>(),
        )
        .expect("same width");
        let y = ndarray::concatenate(
            Axis(0),
            &runs.iter().map(|r| r.layers[l].mlp_out.view()).collect::<Vec<_>>(),
        )
        .expect("same width");
        let gate = if l == 0 {
            Gate::Relu
        } else {
            Gate::JumpRelu {
                threshold: Array1::from_elem(lw.mlp_b_in.len(), 0.05),
            }
        };
        let d = model.d_model();
        let f = lw.mlp_b_in.len();
        let probe = Transcoder::new(
            l,
            lw.mlp_w_in.clone(),
            lw.mlp_b_in.clone(),
            Array2::zeros((f, d)),
            Array1::zeros(d),
            gate.clone(),
            None,
        )?;
        let acts = probe.encode(&x);
        let (w_dec, b_dec) = fit_decoder(&acts, &y)?;
        layers.push(Transcoder::new(
            l,
            lw.mlp_w_in.clone(),
            lw.mlp_b_in.clone(),
            w_dec,
            b_dec,
            gate,
            None,
        )?);
    }
    TranscoderSet::new(layers)
}

fn random_model(seed: u64, n_layers: usize, zero_w_o: bool) -> Model {
    let vocab = fixture_vocab();
    let cfg = toy_config(n_layers, vocab.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, v) = (cfg.d_model, cfg.vocab_size);
    let w_emb = gaussian(&mut rng, (v, d), 1.0);
    let w_pos = gaussian(&mut rng, (cfg.max_seq, d), 0.3);
    let layers = (0..n_layers)
        .map(|_| random_layer(&mut rng, &cfg, zero_w_o))
        .collect();
    let ln_f_w = gaussian_vec(&mut rng, d, 1.0, 0.1);
    let ln_f_b = gaussian_vec(&mut rng, d, 0.0, 0.05);
    let w_u = gaussian(&mut rng, (d, v), 1.0 / (d as f32).sqrt());
    Model {
        config: cfg,
        vocab,
        w_emb,
        w_pos,
        layers,
        ln_f_w,
        ln_f_b,
        w_u,
        meta: serde_json::Value::Null,
    }
}

/// Largest logit difference between MLP and transcoder forward passes over
/// a few random prompts.
pub fn transcoder_logit_error(fx: &Fixture, seed: u64) -> Result<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f32;
    for s in random_sequences(&mut rng, &fx.model, 8, 24) {
        let a = fx.model.forward(&s, ForwardMode::Mlp, None)?;
        let b = fx.model.forward(&s, ForwardMode::Transcoder, Some(&fx.transcoders))?;
        let e = (&a.logits - &b.logits).iter().fold(0.0f32, |m, x| m.max(x.abs()));
        worst = worst.max(e);
    }
    Ok(worst)
}

fn build_toy(n_layers: usize, seed: u64, zero_w_o: bool) -> Result<Fixture> {
    if n_layers == 0 {
        return Err(Error::InvalidParam("fixture needs at least one layer".into()));
    }
    let mut model = random_model(seed, n_layers, zero_w_o);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let transcoders = fit_transcoders(&mut rng, &model)?;
    let mut fx = Fixture {
        model: model.clone(),
        transcoders,
    };
    let err = transcoder_logit_error(&fx, seed ^ 0x10)?;
    model.meta = serde_json::json!({
        "fixture": if zero_w_o { "toy_identity" } else { "toy" },
        "seed": seed,
        "transcoder_logit_max_abs_err": err,
    });
    fx.model = model;
    Ok(fx)
}

pub fn toy(n_layers: usize, seed: u64) -> Result<Fixture> {
    build_toy(n_layers, seed, false)
}

pub fn toy_identity(n_layers: usize, seed: u64) -> Result<Fixture> {
    build_toy(n_layers, seed, true)
}

/// What the [`wired`] fixture's features respond to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wiring {
    /// Layer-0 features and the tokens each one fires on.
    pub layer0: Vec<(FeatureId, Vec<TokenId>)>,
    /// Layer-1 feature reading exactly the decoder of `layer0[0]`.
    pub inheritor: FeatureId,
    /// Layer-1 feature fed by `layer0[0]` or `layer0[1]`: two separable
    /// circuits.
    pub two_circuit: FeatureId,
    /// `inheritor` promotes this token at the next position.
    pub promoted: TokenId,
}

impl Wiring {
    /// Tokens each wired feature should validate on.
    pub fn expected_tokens(&self) -> Vec<(FeatureId, Vec<TokenId>)> {
        let mut out = self.layer0.clone();
        out.push((self.inheritor, self.layer0[0].1.clone()));
        let mut both = self.layer0[0].1.clone();
        both.extend(&self.layer0[1].1);
        both.sort();
        out.push((self.two_circuit, both));
        out
    }
}

#[derive(Debug, Clone)]
pub struct WiredFixture {
    pub fixture: Fixture,
    pub wiring: Wiring,
}

const WIRED_FEATURES: usize = 128;
const MIN_MARGIN: f32 = 1.0;

/// Orthonormal directions orthogonal to the all-ones vector.
fn centered_orthonormal(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<Array1<f32>> {
    let mut basis: Vec<Array1<f64>> = vec![Array1::from_elem(d, 1.0 / (d as f64).sqrt())];
    while basis.len() < k + 1 {
        let mut v = Array1::from_shape_simple_fn(d, || StandardNormal.sample(&mut *rng));
        for b in &basis {
            let p = v.dot(b);
            v.scaled_add(-p, b);
        }
        let n = v.dot(&v).sqrt();
        if n > 1e-6 {
            basis.push(v / n);
        }
    }
    basis[1..].iter().map(|v| v.mapv(|x| x as f32)).collect()
}

fn standardized_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Array2<f32> {
    let mut m = gaussian(rng, (rows, d), 1.0);
    for mut r in m.outer_iter_mut() {
        let mean = r.mean().unwrap_or(0.0);
        r -= mean;
        let std = (r.dot(&r) / d as f32).sqrt();
        r /= std;
    }
    m
}

fn pick_tokens(vocab: &Vocabulary, words: &[&str]) -> Vec<TokenId> {
    words
        .iter()
        .map(|w| vocab.id_of(w).expect("fixture word in vocabulary"))
        .collect()
}

/// Pre-activations of every feature in `layer` on every single-token
/// context, `[vocab, features]`.
fn single_token_pre(fx: &Fixture, layer: usize) -> Result<Array2<f32>> {
    let v = fx.model.config.vocab_size;
    let tc = fx.transcoders.layer(layer)?;
    let mut out = Array2::zeros((v, tc.d_features()));
    for j in 0..v {
        let run = fx
            .model
            .forward(&[j as TokenId], ForwardMode::Transcoder, Some(&fx.transcoders))?;
        let pre = tc.pre_activations(&run.layers[layer].ln2_out);
        out.row_mut(j).assign(&pre.row(0));
    }
    Ok(out)
}

/// Sets the bias of each listed feature midway between its weakest wanted
/// token and its strongest unwanted one (pre-activations taken with zero
/// bias).
fn place_biases(fx: &mut Fixture, layer: usize, wanted: &[(usize, Vec<TokenId>)]) -> Result<bool> {
    let mut tc = fx.transcoders.layer(layer)?.clone();
    for &(i, _) in wanted {
        tc.b_enc[i] = 0.0;
    }
    replace_layer(fx, tc.clone())?;
    let pre = single_token_pre(fx, layer)?;
    for (i, toks) in wanted {
        let col = pre.column(*i);
        let lo = toks.iter().map(|&t| col[t as usize]).fold(f32::INFINITY, f32::min);
        let hi = (0..col.len())
            .filter(|j| !toks.contains(&(*j as TokenId)))
            .map(|j| col[j])
            .fold(f32::NEG_INFINITY, f32::max);
        if lo - hi < MIN_MARGIN {
            return Ok(false);
        }
        tc.b_enc[*i] = -(lo + hi) / 2.0;
    }
    replace_layer(fx, tc)?;
    Ok(true)
}

fn replace_layer(fx: &mut Fixture, tc: Transcoder) -> Result<()> {
    let mut layers: Vec<Transcoder> = fx.transcoders.iter().cloned().collect();
    let l = tc.layer;
    layers[l] = tc;
    fx.transcoders = TranscoderSet::new(layers)?;
    Ok(())
}

fn try_wired(seed: u64) -> Result<Option<WiredFixture>> {
    let vocab = fixture_vocab();
    let mut cfg = toy_config(2, vocab.len());
    cfg.d_mlp = WIRED_FEATURES;
    let (d, v, f) = (cfg.d_model, cfg.vocab_size, WIRED_FEATURES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let k0 = pick_tokens(&vocab, &[" cat"]);
    let k1 = pick_tokens(&vocab, &[" dog"]);
    let k2 = pick_tokens(&vocab, &[" red", " blue"]);
    let promoted = vocab.id_of(" runs").expect("fixture word");

    let w_emb = standardized_rows(&mut rng, v, d);
    let dirs = centered_orthonormal(&mut rng, d, 5);

    let mut enc0 = Array2::<f32>::zeros((d, f));
    let mut dec0 = Array2::<f32>::zeros((f, d));
    for (i, toks) in [&k0, &k1, &k2].into_iter().enumerate() {
        let mut col = enc0.column_mut(i);
        for &t in toks {
            col += &w_emb.row(t as usize);
        }
        dec0.row_mut(i).assign(&dirs[i]);
    }
    let mut enc1 = Array2::<f32>::zeros((d, f));
    let mut dec1 = Array2::<f32>::zeros((f, d));
    enc1.column_mut(0).assign(&dirs[0]);
    enc1.column_mut(1).assign(&(&dirs[0] + &dirs[1]));
    dec1.row_mut(0).assign(&(&dirs[3] * 10.0));
    dec1.row_mut(1).assign(&(&dirs[4] * 10.0));

    let mut w_u = gaussian(&mut rng, (d, v), 0.125);
    w_u.column_mut(promoted as usize).assign(&(&dirs[3] * 2.0));

    let off = Array1::<f32>::from_elem(f, -1.0);
    let tc0 = Transcoder::new(0, enc0.clone(), off.clone(), dec0.clone(), Array1::zeros(d), Gate::Relu, None)?;
    let tc1 = Transcoder::new(1, enc1.clone(), off.clone(), dec1.clone(), Array1::zeros(d), Gate::Relu, None)?;

    let layer = |enc: &Array2<f32>, dec: &Array2<f32>| LayerWeights {
        ln1_w: Array1::ones(d),
        ln1_b: Array1::zeros(d),
        w_q: Array2::zeros((d, d)),
        b_q: Array1::zeros(d),
        w_k: Array2::zeros((d, d)),
        b_k: Array1::zeros(d),
        w_v: Array2::eye(d),
        b_v: Array1::zeros(d),
        w_o: Array2::zeros((d, d)),
        b_o: Array1::zeros(d),
        ln2_w: Array1::ones(d),
        ln2_b: Array1::zeros(d),
        mlp_w_in: enc.clone(),
        mlp_b_in: off.clone(),
        mlp_w_out: dec.clone(),
        mlp_b_out: Array1::zeros(d),
    };
    let model = Model {
        config: cfg,
        vocab,
        w_emb,
        w_pos: Array2::zeros((64, d)),
        layers: vec![layer(&enc0, &dec0), layer(&enc1, &dec1)],
        ln_f_w: Array1::ones(d),
        ln_f_b: Array1::zeros(d),
        w_u,
        meta: serde_json::Value::Null,
    };
    let mut fx = Fixture {
        model,
        transcoders: TranscoderSet::new(vec![tc0, tc1])?,
    };

    let wanted0 = vec![(0, k0.clone()), (1, k1.clone()), (2, k2.clone())];
    if !place_biases(&mut fx, 0, &wanted0)? {
        return Ok(None);
    }
    let mut both = [k0.clone(), k1.clone()].concat();
    both.sort();
    if !place_biases(&mut fx, 1, &[(0, k0.clone()), (1, both)])? {
        return Ok(None);
    }
    for l in 0..2 {
        let tc = fx.transcoders.layer(l)?;
        fx.model.layers[l].mlp_b_in = tc.b_enc.clone();
    }

    // wired tokens must stand out in the encoder's vocabulary projection
    let z4 = crate::stats::OutlierParams::new(4.0)?;
    for (i, toks) in wanted0.iter() {
        let scores = crate::attribution::embedding_projection(fx.transcoders.layer(0)?, &fx.model, *i);
        let out = crate::stats::zscore_outliers(scores.as_slice().expect("contiguous"), &z4)?;
        if !toks.iter().all(|t| out.contains(&(*t as usize))) {
            return Ok(None);
        }
    }
    let (next, _) = fx
        .model
        .generate(&k0, 1, ForwardMode::Transcoder, Some(&fx.transcoders))?;
    if next[1] != promoted {
        return Ok(None);
    }

    let wiring = Wiring {
        layer0: wanted0
            .into_iter()
            .map(|(i, t)| (FeatureId::new(0, i), t))
            .collect(),
        inheritor: FeatureId::new(1, 0),
        two_circuit: FeatureId::new(1, 1),
        promoted,
    };
    fx.model.meta = serde_json::json!({
        "fixture": "wired",
        "seed": seed,
        "wiring": wiring,
    });
    Ok(Some(WiredFixture { fixture: fx, wiring }))
}

/// Hand-wired two-layer fixture. Attention writes nothing (`W_O = 0`) and
/// positions are not embedded, so every feature depends on the current
/// token alone. Draws are repeated with derived seeds until all margins
/// hold.
pub fn wired(seed: u64) -> Result<WiredFixture> {
    for attempt in 0..32u64 {
        if let Some(w) = try_wired(seed.wrapping_mul(1000).wrapping_add(attempt))? {
            return Ok(w);
        }
    }
    Err(Error::Format(format!("no wired fixture satisfied its margins for seed {seed}")))
}

/// Random documents over regular tokens, each containing one token from
/// either of the two circuits feeding [`Wiring::two_circuit`].
pub fn wired_documents(w: &Wiring, seed: u64, n_docs: usize) -> Vec<Vec<TokenId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triggers: Vec<TokenId> = w.layer0[0].1.iter().chain(&w.layer0[1].1).copied().collect();
    let wired: Vec<TokenId> = w.layer0.iter().flat_map(|(_, t)| t.clone()).collect();
    let fillers: Vec<TokenId> = (0..fixture_words().len() as TokenId)
        .filter(|t| !wired.contains(t))
        .collect();
    (0..n_docs)
        .map(|k| {
            let len = rng.random_range(4..12);
            let mut doc: Vec<TokenId> = (0..len)
                .map(|_| *fillers.choose(&mut rng).expect("fillers"))
                .collect();
            let at = rng.random_range(0..len);
            doc[at] = triggers[k % triggers.len()];
            doc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_covers_corpus() {
        let vocab = fixture_vocab();
        for s in corpus_sentences(1, 50) {
            let ids = vocab.encode(&s);
            assert!(ids.iter().all(|&i| !vocab.is_byte_fallback(i)), "{s}");
        }
    }

    #[test]
    fn corpus_is_seeded() {
        assert_eq!(corpus_sentences(3, 20), corpus_sentences(3, 20));
        assert_ne!(corpus_sentences(3, 20), corpus_sentences(4, 20));
    }
}
