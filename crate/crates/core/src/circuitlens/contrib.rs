// SPDX-License-Identifier: MIT OR Apache-2.0

//! Contribution sets and their pairwise similarity.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::attribution::{Attributor, HeadEdge};
use crate::error::{Error, Result};
use crate::stats::{outliers_or_empty, OutlierParams};
use crate::transcoder::FeatureId;

/// Which attention heads are considered when attributing through heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadScope {
    /// Heads at every layer up to the feature's, pulled back through the
    /// frozen Jacobian.
    #[default]
    Pullback,
    /// Heads at the feature's own layer only.
    SameLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContributorKey {
    Feature { layer: usize, feature: usize },
    /// `delta` is the source position minus the activating position.
    Head { layer: usize, head: usize, delta: i64 },
}

impl From<FeatureId> for ContributorKey {
    fn from(f: FeatureId) -> Self {
        Self::Feature {
            layer: f.layer,
            feature: f.feature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributionSet {
    pub sample: usize,
    pub contributors: BTreeSet<ContributorKey>,
}

pub(crate) fn check_active(attr: &Attributor<'_>, feature: FeatureId, t: usize) -> Result<()> {
    attr.transcoders.check_feature(feature)?;
    if t >= attr.run.len() {
        return Err(Error::Index(format!("token {t} outside run of length {}", attr.run.len())));
    }
    if attr.activation(feature, t) > 0.0 {
        Ok(())
    } else {
        Err(Error::InactiveFeature(feature, t))
    }
}

/// Head edges into `feature` at `t`, restricted to `scope`.
pub fn scoped_head_edges(
    attr: &Attributor<'_>,
    feature: FeatureId,
    t: usize,
    scope: HeadScope,
) -> Result<Vec<HeadEdge>> {
    let mut edges = attr.head_edges(feature, t)?;
    if scope == HeadScope::SameLayer {
        edges.retain(|e| e.layer == feature.layer);
    }
    Ok(edges)
}

/// Head edges whose values are outliers among all head edges.
pub fn significant_head_edges(
    attr: &Attributor<'_>,
    feature: FeatureId,
    t: usize,
    scope: HeadScope,
    params: &OutlierParams,
) -> Result<Vec<HeadEdge>> {
    let edges = scoped_head_edges(attr, feature, t, scope)?;
    let values: Vec<f32> = edges.iter().map(|e| e.value).collect();
    Ok(outliers_or_empty(&values, params)?
        .into_iter()
        .map(|i| edges[i].clone())
        .collect())
}

/// Significant upstream features and attention heads for one activation.
/// The two kinds are selected by separate outlier tests.
pub fn contribution_set(
    attr: &Attributor<'_>,
    feature: FeatureId,
    t: usize,
    scope: HeadScope,
    params: &OutlierParams,
) -> Result<BTreeSet<ContributorKey>> {
    check_active(attr, feature, t)?;
    let mut keys = BTreeSet::new();
    let fedges = attr.upstream_feature_edges(feature, t)?;
    let values: Vec<f32> = fedges.iter().map(|e| e.value).collect();
    for i in outliers_or_empty(&values, params)? {
        keys.insert(ContributorKey::from(fedges[i].source));
    }
    for e in significant_head_edges(attr, feature, t, scope, params)? {
        keys.insert(ContributorKey::Head {
            layer: e.layer,
            head: e.head,
            delta: e.src_token as i64 - t as i64,
        });
    }
    Ok(keys)
}

/// Drops keys present in fewer than a `rho` fraction of the sets.
pub fn frequency_filter<K: Ord + Hash + Clone>(sets: &[BTreeSet<K>], rho: f64) -> Result<Vec<BTreeSet<K>>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParam(format!("rho {rho} outside [0, 1]")));
    }
    if sets.is_empty() {
        return Ok(Vec::new());
    }
    let mut counts: HashMap<&K, usize> = HashMap::new();
    for s in sets {
        for k in s {
            *counts.entry(k).or_default() += 1;
        }
    }
    let n = sets.len() as f64;
    Ok(sets
        .iter()
        .map(|s| {
            s.iter()
                .filter(|k| counts[k] as f64 / n >= rho)
                .cloned()
                .collect()
        })
        .collect())
}

pub fn jaccard<K: Ord>(a: &BTreeSet<K>, b: &BTreeSet<K>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Pairwise Jaccard similarities; two empty sets have similarity 0.
pub fn jaccard_matrix<K: Ord>(sets: &[BTreeSet<K>]) -> Array2<f64> {
    let n = sets.len();
    let mut m = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        for b in a..n {
            let v = jaccard(&sets[a], &sets[b]);
            m[[a, b]] = v;
            m[[b, a]] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(v: &[u8]) -> BTreeSet<u8> {
        v.iter().copied().collect()
    }

    #[test]
    fn jaccard_examples() {
        assert!((jaccard(&set(b"ab"), &set(b"bc")) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&set(b"ab"), &set(b"ab")), 1.0);
        assert_eq!(jaccard(&set(b"ab"), &set(b"cd")), 0.0);
        assert_eq!(jaccard(&set(b""), &set(b"")), 0.0);
    }

    #[test]
    fn filter_examples() {
        let mut sets = vec![set(b"x"); 2];
        sets.extend(vec![set(b"y"); 8]);
        let out = frequency_filter(&sets, 0.25).unwrap();
        assert!(out[0].is_empty());
        assert_eq!(out[5], set(b"y"));
        assert_eq!(frequency_filter(&sets, 0.0).unwrap(), sets);
        let all = frequency_filter(&[set(b"ab"), set(b"bc")], 1.0).unwrap();
        assert_eq!(all, vec![set(b"b"), set(b"b")]);
        assert!(frequency_filter(&sets, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn filter_only_removes(
            sets in proptest::collection::vec(proptest::collection::btree_set(0u8..12, 0..6), 1..12),
            rho in 0.0f64..=1.0,
        ) {
            let out = frequency_filter(&sets, rho).unwrap();
            for (a, b) in out.iter().zip(&sets) {
                prop_assert!(a.is_subset(b));
            }
        }

        #[test]
        fn matrix_symmetric_bounded(
            sets in proptest::collection::vec(proptest::collection::btree_set(0u8..12, 0..6), 1..12),
        ) {
            let m = jaccard_matrix(&sets);
            for a in 0..sets.len() {
                if !sets[a].is_empty() {
                    prop_assert_eq!(m[[a, a]], 1.0);
                }
                for b in 0..sets.len() {
                    prop_assert_eq!(m[[a, b]], m[[b, a]]);
                    prop_assert!((0.0..=1.0).contains(&m[[a, b]]));
                }
            }
        }
    }
}
