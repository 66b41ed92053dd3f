// SPDX-License-Identifier: MIT OR Apache-2.0

//! Inverse-frequency quantile sampling of activation records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub bins: usize,
    pub alpha: f64,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            bins: 20,
            alpha: 0.9,
            sample_size: 100,
            seed: 0,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidParam("bins must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParam(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.sample_size == 0 {
            return Err(Error::InvalidParam("sample size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One positive activation of a feature in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationRecord {
    pub doc: u32,
    pub pos: u32,
    pub value: f32,
}

/// Interior quantile edges `sorted[floor(k n / B)]` for `k = 1..B`.
pub fn quantile_edges(values: &[f32], bins: usize) -> Vec<f32> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f32::total_cmp);
    let n = sorted.len();
    (1..bins).map(|k| sorted[(k * n / bins).min(n - 1)]).collect()
}

/// Bin of `v`: the number of edges strictly below it. Equal values always
/// share a bin.
pub fn bin_index(edges: &[f32], v: f32) -> usize {
    edges.iter().filter(|&&e| e < v).count()
}

/// Bin of every value.
pub fn assign_bins(values: &[f32], bins: usize) -> Vec<usize> {
    let edges = quantile_edges(values, bins);
    values.iter().map(|&v| bin_index(&edges, v)).collect()
}

/// Unnormalized per-record weights `1 / n_b^α`.
pub fn sampling_weights(values: &[f32], bins: usize, alpha: f64) -> Vec<f64> {
    let assignment = assign_bins(values, bins);
    let mut counts = vec![0usize; bins];
    for &b in &assignment {
        counts[b] += 1;
    }
    assignment
        .iter()
        .map(|&b| (counts[b] as f64).powf(-alpha))
        .collect()
}

/// Draws `sample_size` records without replacement with probability
/// proportional to `1 / n_b^α`. The result is in draw order. With no more
/// records than requested, all of them are returned in input order.
pub fn sample_activations(
    records: &[ActivationRecord],
    params: &SamplingParams,
) -> Result<Vec<ActivationRecord>> {
    params.validate()?;
    if records.is_empty() {
        return Err(Error::InvalidParam("no activation records to sample".into()));
    }
    if let Some(r) = records.iter().find(|r| !(r.value > 0.0) || !r.value.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "activation {} at doc {} pos {} is not positive",
            r.value, r.doc, r.pos
        )));
    }
    if records.len() <= params.sample_size {
        return Ok(records.to_vec());
    }
    let values: Vec<f32> = records.iter().map(|r| r.value).collect();
    let weights = sampling_weights(&values, params.bins, params.alpha);
    // Efraimidis-Spirakis: key ln(u)/w, largest keys first
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keyed
        .into_iter()
        .take(params.sample_size)
        .map(|(_, i)| records[i])
        .collect())
}
