// SPDX-License-Identifier: MIT OR Apache-2.0

//! Corpus scanning: every positive feature activation into a store.

use crate::error::Result;
use crate::model::{ForwardMode, Model, TokenId};
use crate::par;
use crate::transcoder::{FeatureId, TranscoderSet};

use super::store::{ActivationStore, StoreRecord};

/// Tokenizes each sentence, truncating to the model context.
pub fn tokenize_documents<S: AsRef<str>>(model: &Model, sentences: &[S], use_bos: bool) -> Vec<Vec<TokenId>> {
    sentences
        .iter()
        .map(|s| {
            let mut ids = model.encode(s.as_ref(), use_bos);
            ids.truncate(model.config.max_seq);
            ids
        })
        .collect()
}

fn scan_document(
    model: &Model,
    tcs: &TranscoderSet,
    doc: u32,
    tokens: &[TokenId],
    min_activation: f32,
) -> Result<Vec<StoreRecord>> {
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let run = model.forward(tokens, ForwardMode::Transcoder, Some(tcs))?;
    let mut out = Vec::new();
    for tc in tcs.iter() {
        let acts = tc.feature_activations(&run)?;
        for ((pos, i), &v) in acts.indexed_iter() {
            if v > 0.0 && v > min_activation {
                out.push(StoreRecord {
                    feature: FeatureId::new(tc.layer, i),
                    doc,
                    pos: pos as u16,
                    value: v,
                });
            }
        }
    }
    Ok(out)
}

/// Scans `docs[start..end]`, one shard per document, merged by sorting.
pub fn scan_range(
    model: &Model,
    tcs: &TranscoderSet,
    docs: &[Vec<TokenId>],
    start: usize,
    end: usize,
    min_activation: f32,
) -> Result<ActivationStore> {
    let shards = par::try_map_range(end - start, |k| {
        let d = start + k;
        scan_document(model, tcs, d as u32, &docs[d], min_activation)
    })?;
    ActivationStore::new(shards.into_iter().flatten().collect(), end as u32)
}

/// Scans every document not yet covered by `resume`, continuing from its
/// document count.
pub fn scan(
    model: &Model,
    tcs: &TranscoderSet,
    docs: &[Vec<TokenId>],
    min_activation: f32,
    resume: Option<ActivationStore>,
) -> Result<ActivationStore> {
    let start = resume.as_ref().map_or(0, |s| s.n_documents() as usize).min(docs.len());
    let fresh = scan_range(model, tcs, docs, start, docs.len(), min_activation)?;
    match resume {
        Some(prev) => ActivationStore::merge(vec![prev, fresh]),
        None => Ok(fresh),
    }
}
