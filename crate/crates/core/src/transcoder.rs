// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-layer transcoders: sparse dictionaries standing in for MLP blocks.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RunCache;
use crate::tensor_io::{manifest_path_for, WeightStore};

/// A transcoder feature: `(layer, feature index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId {
    pub layer: usize,
    pub feature: usize,
}

impl FeatureId {
    pub fn new(layer: usize, feature: usize) -> Self {
        Self { layer, feature }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.layer, self.feature)
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    /// Parses `"layer:feature"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("feature id {s:?} is not of the form L:I"));
        let (l, i) = s.split_once(':').ok_or_else(bad)?;
        Ok(Self {
            layer: l.trim().parse().map_err(|_| bad())?,
            feature: i.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Relu,
    /// Passes the pre-activation only where it exceeds the per-feature threshold.
    JumpRelu { threshold: Array1<f32> },
}

#[derive(Debug, Clone)]
pub struct Transcoder {
    pub layer: usize,
    /// `[d_model, d_features]`; column `i` is the encoder vector of feature `i`.
    pub w_enc: Array2<f32>,
    pub b_enc: Array1<f32>,
    /// `[d_features, d_model]`; row `i` is the decoder vector of feature `i`.
    pub w_dec: Array2<f32>,
    pub b_dec: Array1<f32>,
    pub gate: Gate,
    /// Optional linear skip path `[d_model, d_model]`.
    pub skip: Option<Array2<f32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TranscoderMeta {
    layer: usize,
    gate: String,
}

fn tc_name(l: usize, rest: &str) -> String {
    format!("tc.{l}.{rest}")
}

impl Transcoder {
    pub fn new(
        layer: usize,
        w_enc: Array2<f32>,
        b_enc: Array1<f32>,
        w_dec: Array2<f32>,
        b_dec: Array1<f32>,
        gate: Gate,
        skip: Option<Array2<f32>>,
    ) -> Result<Self> {
        let (d, f) = w_enc.dim();
        let check = |name: &str, ok: bool, expected: Vec<usize>, found: Vec<usize>| {
            if ok {
                Ok(())
            } else {
                Err(Error::ShapeMismatch {
                    name: tc_name(layer, name),
                    expected,
                    found,
                })
            }
        };
        check("b_enc", b_enc.len() == f, vec![f], vec![b_enc.len()])?;
        check(
            "W_dec",
            w_dec.dim() == (f, d),
            vec![f, d],
            vec![w_dec.nrows(), w_dec.ncols()],
        )?;
        check("b_dec", b_dec.len() == d, vec![d], vec![b_dec.len()])?;
        if let Gate::JumpRelu { threshold } = &gate {
            check("threshold", threshold.len() == f, vec![f], vec![threshold.len()])?;
            if threshold.iter().any(|&v| v < 0.0) {
                return Err(Error::Format(format!(
                    "transcoder {layer} has a negative JumpReLU threshold"
                )));
            }
        }
        if let Some(sk) = &skip {
            check("W_skip", sk.dim() == (d, d), vec![d, d], vec![sk.nrows(), sk.ncols()])?;
        }
        if f <= d {
            return Err(Error::Format(format!(
                "transcoder {layer} has d_features {f} <= d_model {d}"
            )));
        }
        Ok(Self {
            layer,
            w_enc,
            b_enc,
            w_dec,
            b_dec,
            gate,
            skip,
        })
    }

    pub fn d_model(&self) -> usize {
        self.w_enc.nrows()
    }

    pub fn d_features(&self) -> usize {
        self.w_enc.ncols()
    }

    pub fn encoder_vector(&self, i: usize) -> ArrayView1<'_, f32> {
        self.w_enc.column(i)
    }

    pub fn decoder_vector(&self, i: usize) -> ArrayView1<'_, f32> {
        self.w_dec.row(i)
    }

    /// `x @ W_enc + b_enc` for transcoder inputs `x: [T, d_model]`.
    pub fn pre_activations(&self, x: &Array2<f32>) -> Array2<f32> {
        let mut pre = x.dot(&self.w_enc);
        for mut row in pre.outer_iter_mut() {
            row += &self.b_enc;
        }
        pre
    }

    pub fn apply_gate(&self, mut pre: Array2<f32>) -> Array2<f32> {
        match &self.gate {
            Gate::Relu => pre.mapv_inplace(|v| v.max(0.0)),
            Gate::JumpRelu { threshold } => {
                for mut row in pre.outer_iter_mut() {
                    for (v, &th) in row.iter_mut().zip(threshold.iter()) {
                        if *v <= th || *v <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
        }
        pre
    }

    pub fn encode(&self, x: &Array2<f32>) -> Array2<f32> {
        self.apply_gate(self.pre_activations(x))
    }

    /// Transcoder output: `acts @ W_dec + b_dec (+ x @ W_skip)`.
    pub fn decode(&self, acts: &Array2<f32>, x: &Array2<f32>) -> Array2<f32> {
        let mut out = acts.dot(&self.w_dec);
        for mut row in out.outer_iter_mut() {
            row += &self.b_dec;
        }
        if let Some(sk) = &self.skip {
            out += &x.dot(sk);
        }
        out
    }

    fn check_run(&self, run: &RunCache) -> Result<()> {
        if self.layer >= run.layers.len() {
            return Err(Error::LayerMismatch {
                transcoder: self.layer,
                expected: run.layers.len(),
            });
        }
        if run.layers[self.layer].ln2_out.ncols() != self.d_model() {
            return Err(Error::Format(format!(
                "transcoder {} has d_model {}, run has {}",
                self.layer,
                self.d_model(),
                run.layers[self.layer].ln2_out.ncols()
            )));
        }
        Ok(())
    }

    /// Feature activations `[T, d_features]` at this transcoder's layer.
    /// Transcoder-mode runs reuse the cached values; otherwise they are
    /// recomputed from the cached transcoder input.
    pub fn feature_activations(&self, run: &RunCache) -> Result<Array2<f32>> {
        self.check_run(run)?;
        let lc = &run.layers[self.layer];
        match &lc.tc_acts {
            Some(a) if a.ncols() == self.d_features() => Ok(a.clone()),
            _ => Ok(self.encode(&lc.ln2_out)),
        }
    }

    /// Frozen gate: `true` where the activation is positive.
    pub fn gate_mask(&self, run: &RunCache) -> Result<Array2<bool>> {
        Ok(self.feature_activations(run)?.mapv(|v| v > 0.0))
    }

    pub fn to_store(&self) -> WeightStore {
        let l = self.layer;
        let mut st = WeightStore::new();
        st.insert_matrix(tc_name(l, "W_enc"), &self.w_enc);
        st.insert_vector(tc_name(l, "b_enc"), &self.b_enc);
        st.insert_matrix(tc_name(l, "W_dec"), &self.w_dec);
        st.insert_vector(tc_name(l, "b_dec"), &self.b_dec);
        if let Gate::JumpRelu { threshold } = &self.gate {
            st.insert_vector(tc_name(l, "threshold"), threshold);
        }
        if let Some(sk) = &self.skip {
            st.insert_matrix(tc_name(l, "W_skip"), sk);
        }
        st
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let meta = TranscoderMeta {
            layer: self.layer,
            gate: match self.gate {
                Gate::Relu => "relu".into(),
                Gate::JumpRelu { .. } => "jumprelu".into(),
            },
        };
        self.to_store().save(
            dir,
            &format!("{stem}.tc.{}", self.layer),
            None,
            None,
            serde_json::to_value(meta).expect("meta serializes"),
        )
    }

    pub fn load(manifest: &Path) -> Result<Self> {
        let (m, st) = WeightStore::load(manifest)?;
        let meta: TranscoderMeta =
            serde_json::from_value(m.meta.clone()).map_err(|e| Error::json(manifest, e))?;
        let l = meta.layer;
        let enc = st
            .get(&tc_name(l, "W_enc"))
            .ok_or_else(|| Error::MissingTensor(tc_name(l, "W_enc")))?;
        if enc.ndim() != 2 {
            return Err(Error::ShapeMismatch {
                name: tc_name(l, "W_enc"),
                expected: vec![0, 0],
                found: enc.shape().to_vec(),
            });
        }
        let (d, f) = (enc.shape()[0], enc.shape()[1]);
        let gate = match meta.gate.as_str() {
            "relu" => Gate::Relu,
            "jumprelu" => Gate::JumpRelu {
                threshold: st.vector(&tc_name(l, "threshold"), f)?,
            },
            other => return Err(Error::Format(format!("unknown gate type {other:?}"))),
        };
        let skip = if st.contains(&tc_name(l, "W_skip")) {
            Some(st.matrix(&tc_name(l, "W_skip"), d, d)?)
        } else {
            None
        };
        Transcoder::new(
            l,
            st.matrix(&tc_name(l, "W_enc"), d, f)?,
            st.vector(&tc_name(l, "b_enc"), f)?,
            st.matrix(&tc_name(l, "W_dec"), f, d)?,
            st.vector(&tc_name(l, "b_dec"), d)?,
            gate,
            skip,
        )
    }
}

/// One transcoder per layer, indexed by layer.
#[derive(Debug, Clone, Default)]
pub struct TranscoderSet {
    layers: Vec<Transcoder>,
}

impl TranscoderSet {
    pub fn new(mut layers: Vec<Transcoder>) -> Result<Self> {
        layers.sort_by_key(|t| t.layer);
        for (i, t) in layers.iter().enumerate() {
            if t.layer != i {
                return Err(Error::MissingTranscoder(i));
            }
        }
        Ok(Self { layers })
    }

    pub fn get(&self, layer: usize) -> Option<&Transcoder> {
        self.layers.get(layer)
    }

    pub fn layer(&self, layer: usize) -> Result<&Transcoder> {
        self.get(layer).ok_or(Error::MissingTranscoder(layer))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transcoder> {
        self.layers.iter()
    }

    /// Every feature id, layer by layer.
    pub fn features(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.layers
            .iter()
            .flat_map(|t| (0..t.d_features()).map(move |i| FeatureId::new(t.layer, i)))
    }

    pub fn check_feature(&self, f: FeatureId) -> Result<&Transcoder> {
        let tc = self.layer(f.layer)?;
        if f.feature >= tc.d_features() {
            return Err(Error::Index(format!(
                "feature {f} outside transcoder with {} features",
                tc.d_features()
            )));
        }
        Ok(tc)
    }

    /// Loads `<stem>.tc.<l>.manifest.json` for `l in 0..n_layers`.
    pub fn load(stem: &Path, n_layers: usize) -> Result<Self> {
        let base = manifest_path_for(stem);
        let base = base.to_string_lossy();
        let stem = base.trim_end_matches(".manifest.json");
        let layers = (0..n_layers)
            .map(|l| Transcoder::load(Path::new(&format!("{stem}.tc.{l}.manifest.json"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        for t in &self.layers {
            t.save(dir, stem)?;
        }
        Ok(())
    }

    /// Activations of one feature over a run, `[T]`.
    pub fn activation_column(&self, run: &RunCache, f: FeatureId) -> Result<Array1<f32>> {
        let tc = self.check_feature(f)?;
        Ok(tc
            .feature_activations(run)?
            .index_axis(Axis(1), f.feature)
            .to_owned())
    }
}
