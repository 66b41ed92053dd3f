// SPDX-License-Identifier: MIT OR Apache-2.0

//! z-score outlier selection shared by every "significant contributor" test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierParams {
    pub z_threshold: f64,
    #[serde(default)]
    pub side: Side,
}

impl OutlierParams {
    pub fn new(z_threshold: f64) -> Result<Self> {
        let p = Self {
            z_threshold,
            side: Side::Positive,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_threshold > 0.0 && self.z_threshold.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "z_threshold must be positive, got {}",
                self.z_threshold
            )));
        }
        Ok(())
    }
}

/// Indices whose population z-score is at least the threshold.
/// A constant vector has no outliers.
pub fn zscore_outliers(scores: &[f32], params: &OutlierParams) -> Result<Vec<usize>> {
    params.validate()?;
    if scores.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "z-scores need at least 2 values, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("z-scores need finite values".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = scores
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    // Spread at the level of rounding noise counts as constant.
    let scale = scores.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
    if std == 0.0 || std <= scale * 1e-12 {
        return Ok(Vec::new());
    }
    Ok(scores
        .iter()
        .enumerate()
        .filter(|(_, &v)| (v as f64 - mean) / std >= params.z_threshold)
        .map(|(i, _)| i)
        .collect())
}

/// Like [`zscore_outliers`] but treats fewer than two scores as "no outliers".
pub fn outliers_or_empty(scores: &[f32], params: &OutlierParams) -> Result<Vec<usize>> {
    if scores.len() < 2 {
        params.validate()?;
        return Ok(Vec::new());
    }
    zscore_outliers(scores, params)
}

/// Outliers on the negative side (strongly suppressed entries).
pub fn negative_outliers(scores: &[f32], params: &OutlierParams) -> Result<Vec<usize>> {
    let neg: Vec<f32> = scores.iter().map(|v| -v).collect();
    zscore_outliers(&neg, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(z: f64) -> OutlierParams {
        OutlierParams::new(z).unwrap()
    }

    #[test]
    fn constant_vector_has_no_outliers() {
        assert!(zscore_outliers(&[2.0; 10], &p(1.0)).unwrap().is_empty());
    }

    #[test]
    fn hand_computed_example() {
        // mean 2.5, population std sqrt(18.75); z(10) = 7.5 / 4.330 = 1.732
        let out = zscore_outliers(&[0.0, 0.0, 0.0, 10.0], &p(1.5)).unwrap();
        assert_eq!(out, vec![3]);
        let z = 7.5 / 18.75f64.sqrt();
        assert!((z - 1.7320508).abs() < 1e-6);
        assert!(zscore_outliers(&[0.0, 0.0, 0.0, 10.0], &p(1.8)).unwrap().is_empty());
    }

    #[test]
    fn too_short_is_error() {
        assert!(zscore_outliers(&[1.0], &p(1.0)).is_err());
        assert!(outliers_or_empty(&[1.0], &p(1.0)).unwrap().is_empty());
    }

    #[test]
    fn negative_side() {
        let out = negative_outliers(&[0.0, 0.0, 0.0, -10.0], &p(1.5)).unwrap();
        assert_eq!(out, vec![3]);
    }

    #[test]
    fn threshold_must_be_positive() {
        assert!(OutlierParams::new(0.0).is_err());
        assert!(OutlierParams::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn positive_affine_rescaling_preserves_outliers(
            xs in prop::collection::vec(-100i32..100, 2..60),
            a in 1u32..50,
            b in -100i32..100,
        ) {
            // integer-valued inputs keep z-scores away from rounding ties
            let x: Vec<f32> = xs.iter().map(|&v| v as f32).collect();
            let y: Vec<f32> = x.iter().map(|&v| v * a as f32 + b as f32).collect();
            let params = p(1.7);
            let zx = zscore_outliers(&x, &params).unwrap();
            let zy = zscore_outliers(&y, &params).unwrap();
            prop_assert_eq!(zx, zy);
        }
    }
}
