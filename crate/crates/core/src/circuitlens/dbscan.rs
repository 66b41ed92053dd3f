// SPDX-License-Identifier: MIT OR Apache-2.0

//! DBSCAN over a precomputed similarity matrix.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NOISE: i32 = -1;
const UNVISITED: i32 = -2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub labels: Vec<i32>,
    pub eps: f64,
    pub min_samples: usize,
    pub rho: f64,
}

impl ClusterResult {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Member indices of each cluster, by label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

/// Points within distance `eps` of `p` (itself included); distance is
/// `1 - similarity`.
pub fn neighbours(sim: &Array2<f64>, p: usize, eps: f64) -> Vec<usize> {
    (0..sim.nrows()).filter(|&q| 1.0 - sim[[p, q]] <= eps).collect()
}

pub fn check_similarity(sim: &Array2<f64>) -> Result<()> {
    let n = sim.nrows();
    if sim.ncols() != n {
        return Err(Error::ShapeMismatch {
            name: "similarity".into(),
            expected: vec![n, n],
            found: sim.shape().to_vec(),
        });
    }
    for a in 0..n {
        for b in a + 1..n {
            let (x, y) = (sim[[a, b]], sim[[b, a]]);
            if x != y {
                return Err(Error::NonSymmetric(a, b));
            }
        }
    }
    Ok(())
}

/// Labels per point; clusters are numbered in order of their lowest-index
/// core point, and a border point joins the first cluster that reaches it.
pub fn dbscan(sim: &Array2<f64>, eps: f64, min_samples: usize) -> Result<Vec<i32>> {
    check_similarity(sim)?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidParam(format!("eps {eps} must be non-negative")));
    }
    if min_samples == 0 {
        return Err(Error::InvalidParam("min_samples must be at least 1".into()));
    }
    let n = sim.nrows();
    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0;
    for p in 0..n {
        if labels[p] != UNVISITED {
            continue;
        }
        let nb = neighbours(sim, p, eps);
        if nb.len() < min_samples {
            labels[p] = NOISE;
            continue;
        }
        labels[p] = cluster;
        let mut queue: VecDeque<usize> = nb.into();
        while let Some(q) = queue.pop_front() {
            if labels[q] == NOISE {
                labels[q] = cluster;
            }
            if labels[q] != UNVISITED {
                continue;
            }
            labels[q] = cluster;
            let nq = neighbours(sim, q, eps);
            if nq.len() >= min_samples {
                queue.extend(nq);
            }
        }
        cluster += 1;
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_similar_is_one_cluster() {
        let sim = Array2::<f64>::ones((6, 6));
        assert_eq!(dbscan(&sim, 0.6, 3).unwrap(), vec![0; 6]);
    }

    #[test]
    fn identity_is_noise() {
        let sim = Array2::<f64>::eye(5);
        assert_eq!(dbscan(&sim, 0.6, 2).unwrap(), vec![NOISE; 5]);
    }

    #[test]
    fn asymmetric_rejected() {
        let mut sim = Array2::<f64>::eye(3);
        sim[[0, 1]] = 0.5;
        assert!(matches!(dbscan(&sim, 0.6, 2), Err(Error::NonSymmetric(0, 1))));
    }

    #[test]
    fn border_joins_first_cluster() {
        // 0-1-2 dense, 4-5-6 dense, 3 touches 2 and 4 only
        let mut sim = Array2::<f64>::eye(7);
        let mut link = |a: usize, b: usize| {
            sim[[a, b]] = 1.0;
            sim[[b, a]] = 1.0;
        };
        for (a, b) in [(0, 1), (1, 2), (0, 2), (4, 5), (5, 6), (4, 6), (2, 3), (3, 4)] {
            link(a, b);
        }
        let labels = dbscan(&sim, 0.1, 4).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 0, 1, 1, 1]);
    }
}
