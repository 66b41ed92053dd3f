// SPDX-License-Identifier: MIT OR Apache-2.0

//! Toy GPT-2-style transformer: weights, tokenizer and cached forward passes.

mod config;
mod forward;
mod vocab;

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

pub use config::{ModelConfig, Positional};
pub use forward::{argmax_lowest, ForwardMode, LayerCache, LnStats, RunCache};
pub use vocab::{TokenId, Vocabulary};

use crate::error::{Error, Result};
use crate::tensor_io::{manifest_path_for, sibling, WeightStore};

/// Weights of one transformer block. Matrices act on row vectors
/// (`x @ W`); Q/K/V columns and O rows are grouped by head.
#[derive(Debug, Clone)]
pub struct LayerWeights {
    pub ln1_w: Array1<f32>,
    pub ln1_b: Array1<f32>,
    pub w_q: Array2<f32>,
    pub b_q: Array1<f32>,
    pub w_k: Array2<f32>,
    pub b_k: Array1<f32>,
    pub w_v: Array2<f32>,
    pub b_v: Array1<f32>,
    pub w_o: Array2<f32>,
    pub b_o: Array1<f32>,
    pub ln2_w: Array1<f32>,
    pub ln2_b: Array1<f32>,
    pub mlp_w_in: Array2<f32>,
    pub mlp_b_in: Array1<f32>,
    pub mlp_w_out: Array2<f32>,
    pub mlp_b_out: Array1<f32>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    /// Token embedding `[vocab_size, d_model]`.
    pub w_emb: Array2<f32>,
    /// Positional embedding `[max_seq, d_model]`.
    pub w_pos: Array2<f32>,
    pub layers: Vec<LayerWeights>,
    pub ln_f_w: Array1<f32>,
    pub ln_f_b: Array1<f32>,
    /// Unembedding `[d_model, vocab_size]`.
    pub w_u: Array2<f32>,
    /// Free-form metadata carried in the manifest (fixture tolerances etc).
    pub meta: serde_json::Value,
}

fn layer_name(l: usize, rest: &str) -> String {
    format!("blocks.{l}.{rest}")
}

impl Model {
    /// Loads `<stem>.manifest.json`, its binary and the vocabulary it names.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest_path = manifest_path_for(path);
        let (manifest, store) = WeightStore::load(&manifest_path)?;
        let config_value = manifest
            .config
            .clone()
            .ok_or_else(|| Error::Format("model manifest has no config".into()))?;
        let config: ModelConfig = serde_json::from_value(config_value)
            .map_err(|e| Error::json(&manifest_path, e))?;
        let vocab_file = manifest
            .vocab
            .as_deref()
            .ok_or_else(|| Error::Format("model manifest names no vocabulary".into()))?;
        let vocab = Vocabulary::load(&sibling(&manifest_path, vocab_file))?;
        Self::from_store(config, vocab, &store, manifest.meta)
    }

    pub fn from_store(
        config: ModelConfig,
        vocab: Vocabulary,
        store: &WeightStore,
        meta: serde_json::Value,
    ) -> Result<Self> {
        config.validate()?;
        if vocab.len() != config.vocab_size {
            return Err(Error::Format(format!(
                "vocabulary has {} entries, config declares {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        let (v, d, m, s) = (
            config.vocab_size,
            config.d_model,
            config.d_mlp,
            config.max_seq,
        );
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let n = |rest: &str| layer_name(l, rest);
            layers.push(LayerWeights {
                ln1_w: store.vector(&n("ln1.w"), d)?,
                ln1_b: store.vector(&n("ln1.b"), d)?,
                w_q: store.matrix(&n("attn.W_Q"), d, d)?,
                b_q: store.vector(&n("attn.b_Q"), d)?,
                w_k: store.matrix(&n("attn.W_K"), d, d)?,
                b_k: store.vector(&n("attn.b_K"), d)?,
                w_v: store.matrix(&n("attn.W_V"), d, d)?,
                b_v: store.vector(&n("attn.b_V"), d)?,
                w_o: store.matrix(&n("attn.W_O"), d, d)?,
                b_o: store.vector(&n("attn.b_O"), d)?,
                ln2_w: store.vector(&n("ln2.w"), d)?,
                ln2_b: store.vector(&n("ln2.b"), d)?,
                mlp_w_in: store.matrix(&n("mlp.W_in"), d, m)?,
                mlp_b_in: store.vector(&n("mlp.b_in"), m)?,
                mlp_w_out: store.matrix(&n("mlp.W_out"), m, d)?,
                mlp_b_out: store.vector(&n("mlp.b_out"), d)?,
            });
        }
        Ok(Self {
            w_emb: store.matrix("W_emb", v, d)?,
            w_pos: store.matrix("W_pos", s, d)?,
            ln_f_w: store.vector("ln_final.w", d)?,
            ln_f_b: store.vector("ln_final.b", d)?,
            w_u: store.matrix("W_U", d, v)?,
            layers,
            config,
            vocab,
            meta,
        })
    }

    pub fn to_store(&self) -> WeightStore {
        let mut st = WeightStore::new();
        st.insert_matrix("W_emb", &self.w_emb);
        st.insert_matrix("W_pos", &self.w_pos);
        st.insert_vector("ln_final.w", &self.ln_f_w);
        st.insert_vector("ln_final.b", &self.ln_f_b);
        st.insert_matrix("W_U", &self.w_u);
        for (l, lw) in self.layers.iter().enumerate() {
            let n = |rest: &str| layer_name(l, rest);
            st.insert_vector(n("ln1.w"), &lw.ln1_w);
            st.insert_vector(n("ln1.b"), &lw.ln1_b);
            st.insert_matrix(n("attn.W_Q"), &lw.w_q);
            st.insert_vector(n("attn.b_Q"), &lw.b_q);
            st.insert_matrix(n("attn.W_K"), &lw.w_k);
            st.insert_vector(n("attn.b_K"), &lw.b_k);
            st.insert_matrix(n("attn.W_V"), &lw.w_v);
            st.insert_vector(n("attn.b_V"), &lw.b_v);
            st.insert_matrix(n("attn.W_O"), &lw.w_o);
            st.insert_vector(n("attn.b_O"), &lw.b_o);
            st.insert_vector(n("ln2.w"), &lw.ln2_w);
            st.insert_vector(n("ln2.b"), &lw.ln2_b);
            st.insert_matrix(n("mlp.W_in"), &lw.mlp_w_in);
            st.insert_vector(n("mlp.b_in"), &lw.mlp_b_in);
            st.insert_matrix(n("mlp.W_out"), &lw.mlp_w_out);
            st.insert_vector(n("mlp.b_out"), &lw.mlp_b_out);
        }
        st
    }

    /// Writes `<dir>/<stem>.manifest.json`, `<stem>.bin` and `<stem>.vocab.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let vocab_file = format!("{stem}.vocab.json");
        self.vocab.save(&dir.join(&vocab_file))?;
        let config = serde_json::to_value(&self.config).expect("config serializes");
        self.to_store()
            .save(dir, stem, Some(config), Some(vocab_file), self.meta.clone())
    }

    pub fn n_layers(&self) -> usize {
        self.config.n_layers
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    /// Value projection of head `h` at layer `l`, `[d_model, d_head]`.
    pub fn w_v_head(&self, l: usize, h: usize) -> ArrayView2<'_, f32> {
        let dh = self.config.d_head;
        self.layers[l].w_v.slice(s![.., h * dh..(h + 1) * dh])
    }

    /// Output projection of head `h` at layer `l`, `[d_head, d_model]`.
    pub fn w_o_head(&self, l: usize, h: usize) -> ArrayView2<'_, f32> {
        let dh = self.config.d_head;
        self.layers[l].w_o.slice(s![h * dh..(h + 1) * dh, ..])
    }

    pub fn b_v_head(&self, l: usize, h: usize) -> ArrayView1<'_, f32> {
        let dh = self.config.d_head;
        self.layers[l].b_v.slice(s![h * dh..(h + 1) * dh])
    }

    /// Output-value circuit `W_V^h W_O^h`, `[d_model, d_model]`.
    pub fn w_ov(&self, l: usize, h: usize) -> Array2<f32> {
        self.w_v_head(l, h).dot(&self.w_o_head(l, h))
    }

    /// Tokenizes `text`, prefixing the configured BOS token when asked.
    pub fn encode(&self, text: &str, with_bos: bool) -> Vec<TokenId> {
        let mut ids = Vec::new();
        if with_bos {
            if let Some(bos) = self.config.bos_token {
                ids.push(bos);
            }
        }
        ids.extend(self.vocab.encode(text));
        ids
    }
}
