// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{Model, TokenId};
use crate::error::{Error, Result};
use crate::transcoder::TranscoderSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardMode {
    /// Original MLP blocks.
    Mlp,
    /// MLP output replaced by the layer's transcoder output.
    Transcoder,
}

/// Per-token LayerNorm statistics captured at forward time. Linearized
/// analyses reuse them so the frozen network matches the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LnStats {
    pub mean: Vec<f32>,
    /// Reciprocal standard deviation `1 / sqrt(var + eps)`.
    pub rstd: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Residual before attention, `[T, d_model]`.
    pub r_pre: Array2<f32>,
    pub ln1: LnStats,
    /// LN1 output (the attention input), `[T, d_model]`.
    pub ln1_out: Array2<f32>,
    /// Attention pattern per head, `[T (dst), T (src)]`.
    pub attn: Vec<Array2<f32>>,
    /// Attention-weighted values per head (bias included), `[T, d_head]`.
    pub head_z: Vec<Array2<f32>>,
    /// Attention block output including `b_O`.
    pub attn_out: Array2<f32>,
    /// Residual between attention and MLP/transcoder.
    pub r_mid: Array2<f32>,
    pub ln2: LnStats,
    /// LN2 output: the MLP input and the transcoder input.
    pub ln2_out: Array2<f32>,
    /// MLP or transcoder output added to the residual.
    pub mlp_out: Array2<f32>,
    /// Residual after the MLP/transcoder.
    pub r_post: Array2<f32>,
    /// Transcoder activations `[T, d_features]` (transcoder mode only).
    pub tc_acts: Option<Array2<f32>>,
}

#[derive(Debug, Clone)]
pub struct RunCache {
    pub tokens: Vec<TokenId>,
    pub mode: ForwardMode,
    pub layers: Vec<LayerCache>,
    pub ln_final: LnStats,
    pub ln_final_out: Array2<f32>,
    /// `[T, vocab_size]`.
    pub logits: Array2<f32>,
}

impl RunCache {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Final residual (input to the final LayerNorm).
    pub fn r_final(&self) -> &Array2<f32> {
        &self.layers.last().expect("at least one layer").r_post
    }
}

pub(crate) fn layer_norm(
    x: &Array2<f32>,
    w: &Array1<f32>,
    b: &Array1<f32>,
    eps: f32,
) -> (Array2<f32>, LnStats) {
    let (t, d) = x.dim();
    let mut out = Array2::<f32>::zeros((t, d));
    let mut mean = Vec::with_capacity(t);
    let mut rstd = Vec::with_capacity(t);
    for (i, row) in x.outer_iter().enumerate() {
        let mu = row.sum() / d as f32;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f32>() / d as f32;
        let r = 1.0 / (var + eps).sqrt();
        let mut o = out.row_mut(i);
        for j in 0..d {
            o[j] = (row[j] - mu) * r * w[j] + b[j];
        }
        mean.push(mu);
        rstd.push(r);
    }
    (out, LnStats { mean, rstd })
}

fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

fn softmax_causal(scores: &mut Array2<f32>) {
    for (t, mut row) in scores.outer_iter_mut().enumerate() {
        let max = row
            .slice(s![..=t])
            .iter()
            .fold(f32::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for (s_idx, v) in row.iter_mut().enumerate() {
            if s_idx > t {
                *v = 0.0;
            } else {
                *v = (*v - max).exp();
                sum += *v;
            }
        }
        row.mapv_inplace(|v| v / sum);
    }
}

fn add_row(m: &mut Array2<f32>, bias: ArrayView1<f32>) {
    for mut row in m.outer_iter_mut() {
        row += &bias;
    }
}

impl Model {
    /// Runs the model over `tokens`, recording every intermediate the
    /// attribution code needs.
    pub fn forward(
        &self,
        tokens: &[TokenId],
        mode: ForwardMode,
        transcoders: Option<&TranscoderSet>,
    ) -> Result<RunCache> {
        let cfg = &self.config;
        let t_len = tokens.len();
        if t_len == 0 {
            return Err(Error::EmptySequence);
        }
        if t_len > cfg.max_seq {
            return Err(Error::SequenceTooLong {
                len: t_len,
                max: cfg.max_seq,
            });
        }
        if let Some(&bad) = tokens.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(Error::Index(format!("token id {bad} outside vocabulary")));
        }
        let tcs = match mode {
            ForwardMode::Mlp => None,
            ForwardMode::Transcoder => {
                let set = transcoders.ok_or(Error::MissingTranscoder(0))?;
                for l in 0..cfg.n_layers {
                    let tc = set.get(l).ok_or(Error::MissingTranscoder(l))?;
                    if tc.d_model() != cfg.d_model {
                        return Err(Error::Format(format!(
                            "transcoder {l} has d_model {}, model has {}",
                            tc.d_model(),
                            cfg.d_model
                        )));
                    }
                }
                Some(set)
            }
        };

        let mut x = Array2::<f32>::zeros((t_len, cfg.d_model));
        for (t, &id) in tokens.iter().enumerate() {
            let mut row = x.row_mut(t);
            row.assign(&self.w_emb.row(id as usize));
            row += &self.w_pos.row(t);
        }

        let scale = 1.0 / (cfg.d_head as f32).sqrt();
        let dh = cfg.d_head;
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for (l, lw) in self.layers.iter().enumerate() {
            let r_pre = x;
            let (ln1_out, ln1) = layer_norm(&r_pre, &lw.ln1_w, &lw.ln1_b, cfg.ln_eps);
            let mut q = ln1_out.dot(&lw.w_q);
            add_row(&mut q, lw.b_q.view());
            let mut k = ln1_out.dot(&lw.w_k);
            add_row(&mut k, lw.b_k.view());
            let mut v = ln1_out.dot(&lw.w_v);
            add_row(&mut v, lw.b_v.view());

            let mut attn = Vec::with_capacity(cfg.n_heads);
            let mut head_z = Vec::with_capacity(cfg.n_heads);
            let mut attn_out = Array2::<f32>::zeros((t_len, cfg.d_model));
            for h in 0..cfg.n_heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let qh = q.slice(cols);
                let kh = k.slice(cols);
                let vh = v.slice(cols);
                let mut scores = qh.dot(&kh.t()) * scale;
                softmax_causal(&mut scores);
                let z = scores.dot(&vh);
                attn_out += &z.dot(&self.w_o_head(l, h));
                attn.push(scores);
                head_z.push(z);
            }
            add_row(&mut attn_out, lw.b_o.view());
            let r_mid = &r_pre + &attn_out;

            let (ln2_out, ln2) = layer_norm(&r_mid, &lw.ln2_w, &lw.ln2_b, cfg.ln_eps);
            let (mlp_out, tc_acts) = match tcs {
                None => {
                    let mut hidden = ln2_out.dot(&lw.mlp_w_in);
                    add_row(&mut hidden, lw.mlp_b_in.view());
                    hidden.mapv_inplace(gelu);
                    let mut out = hidden.dot(&lw.mlp_w_out);
                    add_row(&mut out, lw.mlp_b_out.view());
                    (out, None)
                }
                Some(set) => {
                    let tc = set.get(l).ok_or(Error::MissingTranscoder(l))?;
                    let acts = tc.encode(&ln2_out);
                    let out = tc.decode(&acts, &ln2_out);
                    (out, Some(acts))
                }
            };
            let r_post = &r_mid + &mlp_out;
            x = r_post.clone();
            layers.push(LayerCache {
                r_pre,
                ln1,
                ln1_out,
                attn,
                head_z,
                attn_out,
                r_mid,
                ln2,
                ln2_out,
                mlp_out,
                r_post,
                tc_acts,
            });
        }

        let (ln_final_out, ln_final) = layer_norm(&x, &self.ln_f_w, &self.ln_f_b, cfg.ln_eps);
        let logits = ln_final_out.dot(&self.w_u);
        Ok(RunCache {
            tokens: tokens.to_vec(),
            mode,
            layers,
            ln_final,
            ln_final_out,
            logits,
        })
    }

    /// Greedy decoding of `n_new` tokens; ties go to the lowest token id.
    /// Returns the extended sequence and the cache over all of it.
    pub fn generate(
        &self,
        tokens: &[TokenId],
        n_new: usize,
        mode: ForwardMode,
        transcoders: Option<&TranscoderSet>,
    ) -> Result<(Vec<TokenId>, RunCache)> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let total = tokens.len() + n_new;
        if total > self.config.max_seq {
            return Err(Error::SequenceTooLong {
                len: total,
                max: self.config.max_seq,
            });
        }
        let mut seq = tokens.to_vec();
        let mut cache = self.forward(&seq, mode, transcoders)?;
        for _ in 0..n_new {
            let last = cache.logits.index_axis(Axis(0), seq.len() - 1);
            seq.push(argmax_lowest(last) as TokenId);
            cache = self.forward(&seq, mode, transcoders)?;
        }
        Ok((seq, cache))
    }
}

/// Index of the maximum; the first (lowest) index wins ties.
pub fn argmax_lowest(v: ArrayView1<f32>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
