// SPDX-License-Identifier: MIT OR Apache-2.0

//! Circuit-based feature analysis.
//!
//! Each sampled activation is reduced to the set of upstream features and
//! attention heads that significantly drive it. Samples are clustered by
//! Jaccard similarity of those sets, and each cluster is summarized by the
//! masked token patterns of its members.

mod contrib;
mod dbscan;
mod pattern;
mod report;
mod sampling;

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use contrib::{
    contribution_set, frequency_filter, jaccard, jaccard_matrix, scoped_head_edges,
    significant_head_edges, ContributionSet, ContributorKey, HeadScope,
};
pub use dbscan::{check_similarity, dbscan, neighbours, ClusterResult, NOISE};
pub use pattern::{
    parse_pattern, render_pattern, render_segments, segments, GapClass, Pattern, Segment, LONG_GAP,
    SHORT_GAP,
};
pub use report::{ClusterReport, ReportCluster, ReportSample};
pub use sampling::{
    assign_bins, bin_index, quantile_edges, sample_activations, sampling_weights, ActivationRecord,
    SamplingParams,
};

pub use crate::prompts::{build_cluster_prompt, merge_prompt};

use crate::attribution::Attributor;
use crate::error::{Error, Result};
use crate::model::{ForwardMode, Model, RunCache, TokenId};
use crate::par;
use crate::stats::{outliers_or_empty, OutlierParams};
use crate::transcoder::{FeatureId, TranscoderSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisMode {
    /// Input patterns only.
    #[default]
    Input,
    /// Input patterns extended with the generated tokens the feature
    /// influenced.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub sampling: SamplingParams,
    /// Threshold for "significant" feature and head contributors.
    pub contributor_outliers: OutlierParams,
    /// Threshold for tokens kept in input patterns.
    pub pattern_outliers: OutlierParams,
    /// Threshold for influenced output tokens.
    pub influence_outliers: OutlierParams,
    pub rho: f64,
    pub eps: f64,
    pub min_samples: usize,
    pub mode: AnalysisMode,
    pub n_generate: usize,
    pub head_scope: HeadScope,
}

impl Default for ClusterParams {
    fn default() -> Self {
        let z3 = OutlierParams::new(3.0).expect("valid");
        Self {
            sampling: SamplingParams::default(),
            contributor_outliers: z3,
            pattern_outliers: z3,
            influence_outliers: z3,
            rho: 0.1,
            eps: 0.6,
            min_samples: 3,
            mode: AnalysisMode::Input,
            n_generate: 15,
            head_scope: HeadScope::Pullback,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.contributor_outliers.validate()?;
        self.pattern_outliers.validate()?;
        self.influence_outliers.validate()?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParam(format!("rho {} outside [0, 1]", self.rho)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParam(format!("eps {} must be non-negative", self.eps)));
        }
        if self.min_samples == 0 {
            return Err(Error::InvalidParam("min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEntry {
    /// Offset of the generated token from the activating token.
    pub delta: usize,
    pub token: String,
    pub token_id: TokenId,
    pub value: f32,
}

/// Positions kept in the input pattern: the activating token plus the
/// sources of outlier head contributions.
pub fn input_pattern_positions(
    attr: &Attributor<'_>,
    feature: FeatureId,
    t: usize,
    scope: HeadScope,
    params: &OutlierParams,
) -> Result<BTreeSet<usize>> {
    contrib::check_active(attr, feature, t)?;
    let mut kept: BTreeSet<usize> = significant_head_edges(attr, feature, t, scope, params)?
        .into_iter()
        .map(|e| e.src_token)
        .collect();
    kept.insert(t);
    Ok(kept)
}

fn display_tokens(model: &Model, tokens: &[TokenId]) -> Vec<String> {
    tokens.iter().map(|&id| model.vocab.display(id)).collect()
}

pub fn extract_input_pattern(
    attr: &Attributor<'_>,
    feature: FeatureId,
    t: usize,
    scope: HeadScope,
    params: &OutlierParams,
) -> Result<Pattern> {
    let kept = input_pattern_positions(attr, feature, t, scope, params)?;
    let shown = display_tokens(attr.model, &attr.run.tokens[..=t]);
    render_pattern(&shown, &kept, t)
}

/// Influence of `feature` at `t` on the tokens generated after it, read
/// from a run over the extended sequence; `n` tokens follow `t`.
fn influence_in_run(
    attr: &Attributor<'_>,
    feature: FeatureId,
    t: usize,
    n: usize,
    params: &OutlierParams,
) -> Result<Vec<InfluenceEntry>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let tokens = &attr.run.tokens;
    let targets: Vec<(usize, TokenId)> = (1..=n).map(|d| (t + d - 1, tokens[t + d])).collect();
    let edges = attr.logit_edges(feature, t, &targets)?;
    let values: Vec<f32> = edges.iter().map(|e| e.value).collect();
    Ok(outliers_or_empty(&values, params)?
        .into_iter()
        .map(|i| InfluenceEntry {
            delta: i + 1,
            token: attr.model.vocab.display(targets[i].1),
            token_id: targets[i].1,
            value: values[i],
        })
        .collect())
}

/// Greedily generates `n_generate` tokens after `tokens[..=t]` and returns
/// the generated positions whose realized token the feature significantly
/// promoted.
pub fn output_influence(
    model: &Model,
    tcs: &TranscoderSet,
    tokens: &[TokenId],
    feature: FeatureId,
    t: usize,
    n_generate: usize,
    params: &OutlierParams,
) -> Result<Vec<InfluenceEntry>> {
    if t >= tokens.len() {
        return Err(Error::Index(format!("token {t} outside input of length {}", tokens.len())));
    }
    if n_generate == 0 {
        return Ok(Vec::new());
    }
    let (_, run) = model.generate(&tokens[..=t], n_generate, ForwardMode::Transcoder, Some(tcs))?;
    let attr = Attributor::new(model, tcs, &run)?;
    contrib::check_active(&attr, feature, t)?;
    influence_in_run(&attr, feature, t, n_generate, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAnalysis {
    pub doc: u32,
    pub pos: u32,
    pub activation: f32,
    pub pattern: String,
    pub output_influences: Vec<InfluenceEntry>,
    pub contributors: BTreeSet<ContributorKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatus {
    Ok,
    NoActivations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureClusters {
    pub feature: FeatureId,
    pub status: ClusterStatus,
    pub samples: Vec<SampleAnalysis>,
    pub result: ClusterResult,
}

/// Analysis context over a tokenized corpus. Greedy continuations depend
/// only on the prefix, so they are shared across features.
pub struct CircuitLens<'a> {
    pub model: &'a Model,
    pub transcoders: &'a TranscoderSet,
    pub docs: &'a [Vec<TokenId>],
    continuations: Mutex<HashMap<(u32, usize), Vec<TokenId>>>,
}

impl<'a> CircuitLens<'a> {
    pub fn new(model: &'a Model, transcoders: &'a TranscoderSet, docs: &'a [Vec<TokenId>]) -> Self {
        Self {
            model,
            transcoders,
            docs,
            continuations: Mutex::new(HashMap::new()),
        }
    }

    fn prefix(&self, doc: u32, t: usize) -> Result<&'a [TokenId]> {
        let tokens = self
            .docs
            .get(doc as usize)
            .ok_or_else(|| Error::Index(format!("document {doc} not in corpus")))?;
        if t >= tokens.len() {
            return Err(Error::Index(format!(
                "position {t} outside document {doc} of length {}",
                tokens.len()
            )));
        }
        Ok(&tokens[..=t])
    }

    /// Run over the prefix extended by up to `n` greedy tokens (fewer if
    /// the context would overflow). Returns the run and the number of
    /// generated tokens.
    fn extended_run(&self, doc: u32, t: usize, n: usize) -> Result<(RunCache, usize)> {
        let prefix = self.prefix(doc, t)?;
        let n = n.min(self.model.config.max_seq.saturating_sub(prefix.len()));
        let cached = self
            .continuations
            .lock()
            .expect("continuation lock")
            .get(&(doc, t))
            .cloned();
        let run = match cached {
            Some(seq) if seq.len() == prefix.len() + n => {
                self.model
                    .forward(&seq, ForwardMode::Transcoder, Some(self.transcoders))?
            }
            _ => {
                let (seq, run) =
                    self.model
                        .generate(prefix, n, ForwardMode::Transcoder, Some(self.transcoders))?;
                self.continuations
                    .lock()
                    .expect("continuation lock")
                    .insert((doc, t), seq);
                run
            }
        };
        Ok((run, n))
    }

    pub fn analyze_sample(
        &self,
        feature: FeatureId,
        record: &ActivationRecord,
        params: &ClusterParams,
    ) -> Result<SampleAnalysis> {
        let t = record.pos as usize;
        let (run, n) = match params.mode {
            AnalysisMode::Input => {
                let prefix = self.prefix(record.doc, t)?;
                let run = self
                    .model
                    .forward(prefix, ForwardMode::Transcoder, Some(self.transcoders))?;
                (run, 0)
            }
            AnalysisMode::Full => self.extended_run(record.doc, t, params.n_generate)?,
        };
        let attr = Attributor::new(self.model, self.transcoders, &run)?;
        let mut kept = input_pattern_positions(
            &attr,
            feature,
            t,
            params.head_scope,
            &params.pattern_outliers,
        )?;
        let contributors = contribution_set(
            &attr,
            feature,
            t,
            params.head_scope,
            &params.contributor_outliers,
        )?;
        let output_influences = influence_in_run(&attr, feature, t, n, &params.influence_outliers)?;
        kept.extend(output_influences.iter().map(|e| t + e.delta));
        let last = kept.last().copied().unwrap_or(t);
        let shown = display_tokens(self.model, &run.tokens[..=last]);
        let pattern = render_pattern(&shown, &kept, t)?;
        Ok(SampleAnalysis {
            doc: record.doc,
            pos: record.pos,
            activation: attr.activation(feature, t),
            pattern: pattern.rendered,
            output_influences,
            contributors,
        })
    }

    /// Sample, analyze, filter, compare and cluster the activations of one
    /// feature.
    pub fn cluster_feature(
        &self,
        feature: FeatureId,
        records: &[ActivationRecord],
        params: &ClusterParams,
    ) -> Result<FeatureClusters> {
        params.validate()?;
        self.transcoders.check_feature(feature)?;
        let empty = |status| FeatureClusters {
            feature,
            status,
            samples: Vec::new(),
            result: ClusterResult {
                labels: Vec::new(),
                eps: params.eps,
                min_samples: params.min_samples,
                rho: params.rho,
            },
        };
        if records.is_empty() {
            return Ok(empty(ClusterStatus::NoActivations));
        }
        let selected = sample_activations(records, &params.sampling)?;
        let samples = par::try_map(&selected, |r| self.analyze_sample(feature, r, params))?;
        let sets: Vec<BTreeSet<ContributorKey>> =
            samples.iter().map(|s| s.contributors.clone()).collect();
        let filtered = frequency_filter(&sets, params.rho)?;
        let sim = jaccard_matrix(&filtered);
        let labels = dbscan(&sim, params.eps, params.min_samples)?;
        Ok(FeatureClusters {
            feature,
            status: ClusterStatus::Ok,
            samples,
            result: ClusterResult {
                labels,
                eps: params.eps,
                min_samples: params.min_samples,
                rho: params.rho,
            },
        })
    }
}
