// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weight-only feature descriptions, built layer by layer.
//!
//! For each feature: vocabulary tokens whose embeddings strongly project
//! onto the encoder are candidates, and so are the tokens of earlier-layer
//! features whose decoders strongly feed the encoder. Every candidate is
//! then checked with a forward pass on a minimal context; the survivors are
//! the feature's activating tokens. Decoder projections onto the
//! unembedding give the promoted (and suppressed) tokens.

mod lemma;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use lemma::lemmatize;

use crate::attribution::{embedding_projection, unembedding_projection};
use crate::error::{Error, Result};
use crate::explainer::Explainer;
use crate::model::{ForwardMode, Model, TokenId};
use crate::par;
use crate::stats::{negative_outliers, zscore_outliers, OutlierParams};
use crate::transcoder::{FeatureId, TranscoderSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightLensParams {
    /// Applied to vocabulary-length score vectors.
    pub vocab_outliers: OutlierParams,
    /// Applied to feature-count score vectors.
    pub feature_outliers: OutlierParams,
    /// Prefix validation contexts with the model's BOS token.
    #[serde(default)]
    pub use_bos: bool,
}

impl Default for WeightLensParams {
    fn default() -> Self {
        Self {
            vocab_outliers: OutlierParams::new(4.0).expect("valid"),
            feature_outliers: OutlierParams::new(3.0).expect("valid"),
            use_bos: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Vocab,
    Inherited { from: FeatureId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCandidate {
    pub token: String,
    pub ids: Vec<TokenId>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLensDescription {
    pub feature: FeatureId,
    pub activating_tokens: Vec<TokenCandidate>,
    pub promoted_tokens: BTreeSet<String>,
    pub suppressed_tokens: BTreeSet<String>,
    pub validated: bool,
    pub lemmas: BTreeSet<String>,
}

impl WeightLensDescription {
    /// Activating tokens as display strings, sorted and deduplicated.
    pub fn important_tokens(&self) -> Vec<String> {
        let set: BTreeSet<String> = self
            .activating_tokens
            .iter()
            .map(|c| c.token.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        set.into_iter().collect()
    }
}

/// Candidate tokens for `feature`, with provenance. One entry per token
/// string; vocabulary provenance wins over inheritance, then the lowest
/// upstream feature.
pub fn candidate_tokens(
    model: &Model,
    tcs: &TranscoderSet,
    feature: FeatureId,
    prior: &BTreeMap<FeatureId, WeightLensDescription>,
    params: &WeightLensParams,
) -> Result<Vec<TokenCandidate>> {
    let tc = tcs.check_feature(feature)?;
    let mut by_token: BTreeMap<String, TokenCandidate> = BTreeMap::new();
    let mut offer = |c: TokenCandidate| match by_token.get(&c.token) {
        Some(existing) if existing.provenance <= c.provenance => {}
        _ => {
            by_token.insert(c.token.clone(), c);
        }
    };

    let scores = embedding_projection(tc, model, feature.feature);
    for i in zscore_outliers(scores.as_slice().expect("contiguous"), &params.vocab_outliers)? {
        offer(TokenCandidate {
            token: model.vocab.token_str(i as TokenId).to_string(),
            ids: vec![i as TokenId],
            provenance: Provenance::Vocab,
        });
    }

    let enc = tc.encoder_vector(feature.feature);
    for l in 0..feature.layer {
        let upstream = tcs.layer(l)?;
        let scores: Array1<f32> = upstream.w_dec.dot(&enc);
        for i in zscore_outliers(scores.as_slice().expect("contiguous"), &params.feature_outliers)? {
            let src = FeatureId::new(l, i);
            let desc = prior.get(&src).ok_or_else(|| {
                Error::InvalidParam(format!(
                    "no prior description for upstream feature {src}; layers must be processed in order"
                ))
            })?;
            if !desc.validated {
                continue;
            }
            for c in &desc.activating_tokens {
                offer(TokenCandidate {
                    token: c.token.clone(),
                    ids: c.ids.clone(),
                    provenance: Provenance::Inherited { from: src },
                });
            }
        }
    }
    Ok(by_token.into_values().collect())
}

fn validation_context(model: &Model, ids: &[TokenId], use_bos: bool) -> Vec<TokenId> {
    let mut ctx = Vec::with_capacity(ids.len() + 1);
    if use_bos {
        if let Some(bos) = model.config.bos_token {
            ctx.push(bos);
        }
    }
    ctx.extend_from_slice(ids);
    ctx
}

/// Activation of `feature` at the last position of the minimal context.
fn context_activation(
    model: &Model,
    tcs: &TranscoderSet,
    feature: FeatureId,
    ids: &[TokenId],
    use_bos: bool,
) -> Result<f32> {
    let tc = tcs.check_feature(feature)?;
    let ctx = validation_context(model, ids, use_bos);
    let run = model.forward(&ctx, ForwardMode::Transcoder, Some(tcs))?;
    let acts = tc.feature_activations(&run)?;
    Ok(acts[[ctx.len() - 1, feature.feature]])
}

/// True when the feature fires on `ids` (at the final position) with no
/// surrounding context.
pub fn validate_ids(
    model: &Model,
    tcs: &TranscoderSet,
    feature: FeatureId,
    ids: &[TokenId],
    use_bos: bool,
) -> Result<bool> {
    if ids.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(context_activation(model, tcs, feature, ids, use_bos)? > 0.0)
}

pub fn validate_token(
    model: &Model,
    tcs: &TranscoderSet,
    feature: FeatureId,
    token: &str,
    use_bos: bool,
) -> Result<bool> {
    validate_ids(model, tcs, feature, &model.vocab.encode(token), use_bos)
}

/// Promoted (positive outlier) and suppressed (negative outlier) tokens of
/// the decoder's vocabulary projection.
pub fn output_tokens(
    model: &Model,
    tcs: &TranscoderSet,
    feature: FeatureId,
    params: &WeightLensParams,
) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    let tc = tcs.check_feature(feature)?;
    let logits = unembedding_projection(tc, model, feature.feature);
    let slice = logits.as_slice().expect("contiguous");
    let name = |i: usize| model.vocab.token_str(i as TokenId).to_string();
    let promoted = zscore_outliers(slice, &params.vocab_outliers)?
        .into_iter()
        .map(name)
        .collect();
    let suppressed = negative_outliers(slice, &params.vocab_outliers)?
        .into_iter()
        .map(name)
        .collect();
    Ok((promoted, suppressed))
}

/// Memoizes minimal-context forward passes; every feature of every layer
/// can be read off one run.
struct Validator<'a> {
    model: &'a Model,
    tcs: &'a TranscoderSet,
    use_bos: bool,
    memo: Mutex<HashMap<Vec<TokenId>, Vec<Array1<f32>>>>,
}

impl<'a> Validator<'a> {
    fn activation(&self, feature: FeatureId, ids: &[TokenId]) -> Result<f32> {
        if ids.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(rows) = self.memo.lock().expect("memo lock").get(ids) {
            return Ok(rows[feature.layer][feature.feature]);
        }
        let ctx = validation_context(self.model, ids, self.use_bos);
        let run = self
            .model
            .forward(&ctx, ForwardMode::Transcoder, Some(self.tcs))?;
        let last = ctx.len() - 1;
        let rows = self
            .tcs
            .iter()
            .map(|tc| Ok(tc.feature_activations(&run)?.row(last).to_owned()))
            .collect::<Result<Vec<_>>>()?;
        let a = rows[feature.layer][feature.feature];
        self.memo
            .lock()
            .expect("memo lock")
            .insert(ids.to_vec(), rows);
        Ok(a)
    }
}

fn assemble(
    feature: FeatureId,
    candidates: Vec<TokenCandidate>,
    keep: impl Fn(&TokenCandidate) -> Result<bool>,
    promoted: BTreeSet<String>,
    suppressed: BTreeSet<String>,
) -> Result<WeightLensDescription> {
    let mut activating = Vec::new();
    for c in candidates {
        if keep(&c)? {
            activating.push(c);
        }
    }
    let lemmas = activating
        .iter()
        .map(|c| c.token.as_str())
        .chain(promoted.iter().map(String::as_str))
        .map(lemmatize)
        .filter(|s| !s.is_empty())
        .collect();
    Ok(WeightLensDescription {
        feature,
        validated: !activating.is_empty(),
        activating_tokens: activating,
        promoted_tokens: promoted,
        suppressed_tokens: suppressed,
        lemmas,
    })
}

/// Candidate extraction, validation and output analysis for one feature.
pub fn describe_feature(
    model: &Model,
    tcs: &TranscoderSet,
    feature: FeatureId,
    prior: &BTreeMap<FeatureId, WeightLensDescription>,
    params: &WeightLensParams,
) -> Result<WeightLensDescription> {
    let candidates = candidate_tokens(model, tcs, feature, prior, params)?;
    let (promoted, suppressed) = output_tokens(model, tcs, feature, params)?;
    assemble(
        feature,
        candidates,
        |c| validate_ids(model, tcs, feature, &c.ids, params.use_bos),
        promoted,
        suppressed,
    )
}

/// Describes every feature, processing layers in ascending order. Features
/// within a layer are independent and run in parallel.
pub fn describe_feature_layerwise(
    model: &Model,
    tcs: &TranscoderSet,
    params: &WeightLensParams,
) -> Result<BTreeMap<FeatureId, WeightLensDescription>> {
    params.vocab_outliers.validate()?;
    params.feature_outliers.validate()?;
    let validator = Validator {
        model,
        tcs,
        use_bos: params.use_bos,
        memo: Mutex::new(HashMap::new()),
    };
    let mut out = BTreeMap::new();
    for tc in tcs.iter() {
        let features: Vec<FeatureId> = (0..tc.d_features())
            .map(|i| FeatureId::new(tc.layer, i))
            .collect();
        let layer_desc = par::try_map(&features, |&f| {
            let candidates = candidate_tokens(model, tcs, f, &out, params)?;
            let (promoted, suppressed) = output_tokens(model, tcs, f, params)?;
            assemble(
                f,
                candidates,
                |c| Ok(validator.activation(f, &c.ids)? > 0.0),
                promoted,
                suppressed,
            )
        })?;
        for d in layer_desc {
            out.insert(d.feature, d);
        }
    }
    Ok(out)
}

/// One-line explainer summary of a weight-based description.
pub fn refine_with_llm(desc: &WeightLensDescription, explainer: &Explainer) -> Result<String> {
    let strip = |s: &BTreeSet<String>| -> Vec<String> {
        s.iter().map(|t| t.trim().to_string()).collect()
    };
    Ok(explainer.refine(
        &desc.important_tokens(),
        &strip(&desc.promoted_tokens),
        &strip(&desc.suppressed_tokens),
    )?)
}

/// Output record: description plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLensRecord {
    #[serde(flatten)]
    pub description: WeightLensDescription,
    pub params: WeightLensParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}
