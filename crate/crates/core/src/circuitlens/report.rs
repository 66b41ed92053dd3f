// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-feature cluster reports and their natural-language descriptions.

use serde::{Deserialize, Serialize};

use super::{ClusterParams, ClusterStatus, FeatureClusters, InfluenceEntry, NOISE};
use crate::error::Result;
use crate::explainer::Explainer;
use crate::transcoder::FeatureId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSample {
    pub doc: u32,
    pub pos: u32,
    pub activation: f32,
    pub pattern: String,
    pub output_influences: Vec<InfluenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCluster {
    pub label: i32,
    pub samples: Vec<ReportSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub feature: FeatureId,
    pub status: ClusterStatus,
    pub clusters: Vec<ReportCluster>,
    pub noise: Vec<ReportSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub params: ClusterParams,
}

impl ClusterReport {
    pub fn new(fc: &FeatureClusters, params: &ClusterParams) -> Self {
        let sample = |i: usize| {
            let s = &fc.samples[i];
            ReportSample {
                doc: s.doc,
                pos: s.pos,
                activation: s.activation,
                pattern: s.pattern.clone(),
                output_influences: s.output_influences.clone(),
            }
        };
        let clusters = fc
            .result
            .members()
            .into_iter()
            .enumerate()
            .map(|(label, idx)| ReportCluster {
                label: label as i32,
                samples: idx.into_iter().map(sample).collect(),
                description: None,
            })
            .collect();
        let noise = fc
            .result
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == NOISE)
            .map(|(i, _)| sample(i))
            .collect();
        Self {
            feature: fc.feature,
            status: fc.status,
            clusters,
            noise,
            description: None,
            params: *params,
        }
    }

    /// Describes each cluster from its patterns, then merges the cluster
    /// descriptions. When every sample is noise, all patterns are described
    /// as a single group.
    pub fn describe<T: AsRef<str>>(
        &mut self,
        explainer: &Explainer,
        important_tokens: Option<&[T]>,
    ) -> Result<()> {
        if self.status == ClusterStatus::NoActivations {
            return Ok(());
        }
        let mut descriptions = Vec::new();
        for c in &mut self.clusters {
            let patterns: Vec<&str> = c.samples.iter().map(|s| s.pattern.as_str()).collect();
            let d = explainer.describe_cluster(&patterns)?;
            descriptions.push(d.clone());
            c.description = Some(d);
        }
        if descriptions.is_empty() {
            let patterns: Vec<&str> = self.noise.iter().map(|s| s.pattern.as_str()).collect();
            if patterns.is_empty() {
                return Ok(());
            }
            descriptions.push(explainer.describe_cluster(&patterns)?);
        }
        self.description = Some(explainer.merge_descriptions(&descriptions, important_tokens)?);
        Ok(())
    }
}
