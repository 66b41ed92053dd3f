// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attributions through the frozen (linearized) network.
//!
//! "Frozen" means every nonlinearity keeps its forward-pass value: attention
//! patterns, LayerNorm mean and reciprocal std, and transcoder gates. MLP and
//! transcoder paths between two layers are severed, so feature-to-feature
//! influence only ever appears as an explicit [`FeatureEdge`].
//!
//! Vectors are row vectors. A residual perturbation `d` at `r_post[l']`
//! reaches `r_mid[l]` as `d @ J`, so the read-out of an encoder direction is
//! `f_dec · J · f_enc`.

mod export;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

pub use export::{edges_to_dot, edges_to_jsonl, Edge};

use crate::error::{Error, Result};
use crate::model::{Model, RunCache, TokenId};
use crate::transcoder::{FeatureId, Transcoder, TranscoderSet};

/// Feature-to-feature edge at one token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEdge {
    pub source: FeatureId,
    pub target: FeatureId,
    pub token: usize,
    pub activation: f32,
    /// `f_dec(source) · J · f_enc(target)`, input-invariant apart from the
    /// frozen statistics.
    pub invariant_part: f32,
    pub value: f32,
}

/// Contribution of source token `src_token` through head `(layer, head)`
/// to a feature at `dst_token`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadEdge {
    pub layer: usize,
    pub head: usize,
    pub src_token: usize,
    pub dst_token: usize,
    pub dst_feature: FeatureId,
    pub score: f32,
    pub projection: f32,
    pub value: f32,
}

/// Contribution of a feature active at `token` to the logit of
/// `output_token` predicted at `logit_position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitEdge {
    pub feature: FeatureId,
    pub token: usize,
    pub logit_position: usize,
    pub output_token: TokenId,
    pub value: f32,
}

/// Plain sequential dot product, accumulated in f64. Every attribution
/// routes its inner products through here so identical inputs round
/// identically.
pub fn dot(a: ArrayView1<f32>, b: ArrayView1<f32>) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&x, &y)| acc + x as f64 * y as f64) as f32
}

fn dot64(a: ArrayView1<f32>, b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (&x, &y)| acc + x as f64 * y)
}

/// `f_dec(src) · f_enc(dst)`.
pub fn virtual_weight(tcs: &TranscoderSet, src: FeatureId, dst: FeatureId) -> Result<f32> {
    if src.layer >= dst.layer {
        return Err(Error::LayerOrder {
            source_layer: src.layer,
            target_layer: dst.layer,
        });
    }
    let s = tcs.check_feature(src)?;
    let d = tcs.check_feature(dst)?;
    Ok(dot(s.decoder_vector(src.feature), d.encoder_vector(dst.feature)))
}

/// Vocabulary scores `W_emb · f_enc`.
pub fn embedding_projection(tc: &Transcoder, model: &Model, feature: usize) -> Array1<f32> {
    model.w_emb.dot(&tc.encoder_vector(feature))
}

/// Vocabulary logits `f_dec · W_U`.
pub fn unembedding_projection(tc: &Transcoder, model: &Model, feature: usize) -> Array1<f32> {
    tc.decoder_vector(feature).dot(&model.w_u)
}

/// Attribution queries over one cached run.
pub struct Attributor<'a> {
    pub model: &'a Model,
    pub transcoders: &'a TranscoderSet,
    pub run: &'a RunCache,
    acts: Vec<Array2<f32>>,
}

impl<'a> Attributor<'a> {
    pub fn new(model: &'a Model, transcoders: &'a TranscoderSet, run: &'a RunCache) -> Result<Self> {
        if run.layers.len() != model.n_layers() {
            return Err(Error::Format(format!(
                "run has {} layers, model has {}",
                run.layers.len(),
                model.n_layers()
            )));
        }
        let acts = (0..model.n_layers())
            .map(|l| transcoders.layer(l)?.feature_activations(run))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            transcoders,
            run,
            acts,
        })
    }

    pub fn activations(&self, layer: usize) -> &Array2<f32> {
        &self.acts[layer]
    }

    pub fn activation(&self, f: FeatureId, t: usize) -> f32 {
        self.acts[f.layer][[t, f.feature]]
    }

    fn check_token(&self, t: usize) -> Result<()> {
        if t >= self.run.len() {
            return Err(Error::Index(format!(
                "token {t} outside run of length {}",
                self.run.len()
            )));
        }
        Ok(())
    }

    /// Linear part of the frozen attention block at layer `k`, token `t`,
    /// applied to a column vector: `v + s1 ∘ Σ_h A[t][t] W_V^h (W_O^h v)`.
    fn attn_block_pull(&self, k: usize, t: usize, v: &Array1<f32>) -> Array1<f32> {
        let lw = &self.model.layers[k];
        let lc = &self.run.layers[k];
        let mut acc = Array1::<f32>::zeros(v.len());
        for h in 0..self.model.config.n_heads {
            let a = lc.attn[h][[t, t]];
            if a == 0.0 {
                continue;
            }
            let o = self.model.w_o_head(k, h).dot(v);
            acc.scaled_add(a, &self.model.w_v_head(k, h).dot(&o));
        }
        let scale = lc.ln1.rstd[t];
        let mut out = v.clone();
        for j in 0..v.len() {
            out[j] += scale * lw.ln1_w[j] * acc[j];
        }
        out
    }

    /// `J(from → to) · v` for a column vector `v` living at `r_mid[to]`;
    /// the result lives at `r_post[from]`.
    pub fn pullback(&self, from: usize, to: usize, t: usize, v: &Array1<f32>) -> Result<Array1<f32>> {
        if from >= to {
            return Err(Error::LayerOrder {
                source_layer: from,
                target_layer: to,
            });
        }
        self.check_token(t)?;
        let mut out = v.clone();
        for k in (from + 1..=to).rev() {
            out = self.attn_block_pull(k, t, &out);
        }
        Ok(out)
    }

    /// Frozen Jacobian `∂ r_mid[to][t] / ∂ r_post[from][t]` as a
    /// `[d_model, d_model]` matrix (row-vector convention: `δ_out = δ_in · J`).
    pub fn frozen_jacobian(&self, from: usize, to: usize, t: usize) -> Result<Array2<f32>> {
        if from >= to {
            return Err(Error::LayerOrder {
                source_layer: from,
                target_layer: to,
            });
        }
        self.check_token(t)?;
        let d = self.model.d_model();
        let mut j = Array2::<f32>::eye(d);
        for k in from + 1..=to {
            let lw = &self.model.layers[k];
            let lc = &self.run.layers[k];
            let mut w = Array2::<f32>::zeros((d, d));
            for h in 0..self.model.config.n_heads {
                let a = lc.attn[h][[t, t]];
                if a != 0.0 {
                    w.scaled_add(a, &self.model.w_ov(k, h));
                }
            }
            // M_k = I + diag(rstd1 * ln1_w) W
            let mut m = w;
            for (r, mut row) in m.outer_iter_mut().enumerate() {
                row *= lc.ln1.rstd[t] * lw.ln1_w[r];
            }
            for i in 0..d {
                m[[i, i]] += 1.0;
            }
            j = j.dot(&m);
        }
        Ok(j)
    }

    /// Encoder direction of `f` as read from `r_mid[f.layer][t]`: the
    /// encoder vector scaled by the frozen LN2 scale and gain.
    pub fn effective_encoder(&self, f: FeatureId, t: usize) -> Result<Array1<f32>> {
        let tc = self.transcoders.check_feature(f)?;
        self.check_token(t)?;
        let lw = &self.model.layers[f.layer];
        let r = self.run.layers[f.layer].ln2.rstd[t];
        let enc = tc.encoder_vector(f.feature);
        Ok(Array1::from_shape_fn(enc.len(), |j| r * lw.ln2_w[j] * enc[j]))
    }

    /// Effective encoder of `dst` pulled back to `r_mid[layer]` (equal to
    /// `r_post[layer]` with MLPs severed). `layer == dst.layer` returns the
    /// effective encoder itself.
    pub fn read_direction(&self, dst: FeatureId, layer: usize, t: usize) -> Result<Array1<f32>> {
        if layer > dst.layer {
            return Err(Error::LayerOrder {
                source_layer: layer,
                target_layer: dst.layer,
            });
        }
        let enc = self.effective_encoder(dst, t)?;
        if layer == dst.layer {
            Ok(enc)
        } else {
            self.pullback(layer, dst.layer, t, &enc)
        }
    }

    pub fn feature_attribution(&self, src: FeatureId, dst: FeatureId, t: usize) -> Result<FeatureEdge> {
        if src.layer >= dst.layer {
            return Err(Error::LayerOrder {
                source_layer: src.layer,
                target_layer: dst.layer,
            });
        }
        let src_tc = self.transcoders.check_feature(src)?;
        let g = self.read_direction(dst, src.layer, t)?;
        let invariant_part = dot(src_tc.decoder_vector(src.feature), g.view());
        let activation = self.activation(src, t);
        Ok(FeatureEdge {
            source: src,
            target: dst,
            token: t,
            activation,
            invariant_part,
            value: activation * invariant_part,
        })
    }

    /// Edges from every feature in layers below `dst.layer` at token `t`,
    /// in (layer, feature) order.
    pub fn upstream_feature_edges(&self, dst: FeatureId, t: usize) -> Result<Vec<FeatureEdge>> {
        self.transcoders.check_feature(dst)?;
        self.check_token(t)?;
        let mut edges = Vec::new();
        for l in 0..dst.layer {
            let g = self.read_direction(dst, l, t)?;
            let tc = self.transcoders.layer(l)?;
            for i in 0..tc.d_features() {
                let invariant_part = dot(tc.decoder_vector(i), g.view());
                let activation = self.acts[l][[t, i]];
                edges.push(FeatureEdge {
                    source: FeatureId::new(l, i),
                    target: dst,
                    token: t,
                    activation,
                    invariant_part,
                    value: activation * invariant_part,
                });
            }
        }
        Ok(edges)
    }

    /// `W_O^h g` and `W_V^h W_O^h g`, kept in f64 so a projection onto
    /// them rounds once.
    fn head_read(&self, layer: usize, head: usize, g: &Array1<f32>) -> (Vec<f64>, Vec<f64>) {
        let g64: Vec<f64> = g.iter().map(|&x| x as f64).collect();
        let o: Vec<f64> = self
            .model
            .w_o_head(layer, head)
            .outer_iter()
            .map(|row| dot64(row, &g64))
            .collect();
        let w = self
            .model
            .w_v_head(layer, head)
            .outer_iter()
            .map(|row| dot64(row, &o))
            .collect();
        (o, w)
    }

    fn head_projection(&self, layer: usize, head: usize, s: usize, g: &Array1<f32>) -> f32 {
        let (_, w) = self.head_read(layer, head, g);
        dot64(self.run.layers[layer].ln1_out.row(s), &w) as f32
    }

    pub fn head_attribution(
        &self,
        layer: usize,
        head: usize,
        src_token: usize,
        dst: FeatureId,
        dst_token: usize,
    ) -> Result<HeadEdge> {
        self.check_token(dst_token)?;
        if src_token > dst_token {
            return Err(Error::Index(format!(
                "source token {src_token} after destination token {dst_token}"
            )));
        }
        if head >= self.model.config.n_heads {
            return Err(Error::Index(format!("head {head} out of range")));
        }
        let g = self.read_direction(dst, layer, dst_token)?;
        let score = self.run.layers[layer].attn[head][[dst_token, src_token]];
        let projection = self.head_projection(layer, head, src_token, &g);
        Ok(HeadEdge {
            layer,
            head,
            src_token,
            dst_token,
            dst_feature: dst,
            score,
            projection,
            value: score * projection,
        })
    }

    /// Every `(layer ≤ dst.layer, head, s ≤ t)` head edge into `dst` at `t`.
    pub fn head_edges(&self, dst: FeatureId, t: usize) -> Result<Vec<HeadEdge>> {
        self.transcoders.check_feature(dst)?;
        self.check_token(t)?;
        let mut edges = Vec::new();
        for layer in 0..=dst.layer {
            let g = self.read_direction(dst, layer, t)?;
            for head in 0..self.model.config.n_heads {
                let (_, w) = self.head_read(layer, head, &g);
                let lc = &self.run.layers[layer];
                for s in 0..=t {
                    let score = lc.attn[head][[t, s]];
                    let projection = dot64(lc.ln1_out.row(s), &w) as f32;
                    edges.push(HeadEdge {
                        layer,
                        head,
                        src_token: s,
                        dst_token: t,
                        dst_feature: dst,
                        score,
                        projection,
                        value: score * projection,
                    });
                }
            }
        }
        Ok(edges)
    }

    /// Part of head `(layer, head)`'s output at `t` that comes from the value
    /// bias: `(Σ_s A[t][s]) · (b_V W_O · g)`. Together with the head edges it
    /// sums to the head output read along `g`.
    pub fn head_bias_attribution(&self, layer: usize, head: usize, dst: FeatureId, t: usize) -> Result<f32> {
        self.check_token(t)?;
        if head >= self.model.config.n_heads {
            return Err(Error::Index(format!("head {head} out of range")));
        }
        let g = self.read_direction(dst, layer, t)?;
        let (o, _) = self.head_read(layer, head, &g);
        let mass: f32 = self.run.layers[layer].attn[head].row(t).iter().take(t + 1).sum();
        Ok(mass * dot64(self.model.b_v_head(layer, head), &o) as f32)
    }

    /// Pushes the decoder write of `f` at token `t` forward through the
    /// frozen layers above it, returning the perturbation of the final
    /// residual at positions `t..T` (row `p - t`). Cross-token attention
    /// paths are included.
    fn propagate_write(&self, f: FeatureId, t: usize) -> Result<Array2<f32>> {
        let tc = self.transcoders.check_feature(f)?;
        self.check_token(t)?;
        let n = self.run.len() - t;
        let d = self.model.d_model();
        let mut delta = Array2::<f32>::zeros((n, d));
        delta.row_mut(0).assign(&tc.decoder_vector(f.feature));
        for k in f.layer + 1..self.model.n_layers() {
            let lw = &self.model.layers[k];
            let lc = &self.run.layers[k];
            let mut scaled = delta.clone();
            for (p, mut row) in scaled.outer_iter_mut().enumerate() {
                let r = lc.ln1.rstd[t + p];
                for j in 0..d {
                    row[j] *= r * lw.ln1_w[j];
                }
            }
            let mut update = Array2::<f32>::zeros((n, d));
            for h in 0..self.model.config.n_heads {
                let a = lc.attn[h].slice(s![t.., t..]);
                let u = scaled.dot(&self.model.w_v_head(k, h));
                let z = a.dot(&u);
                update += &z.dot(&self.model.w_o_head(k, h));
            }
            delta += &update;
        }
        Ok(delta)
    }

    fn logit_readout(&self, delta_row: ArrayView1<f32>, position: usize, y: TokenId) -> f32 {
        let r = self.run.ln_final.rstd[position];
        let u = self.model.w_u.index_axis(Axis(1), y as usize);
        let dir = Array1::from_shape_fn(u.len(), |j| r * self.model.ln_f_w[j] * u[j]);
        dot(delta_row, dir.view())
    }

    pub fn logit_attribution(
        &self,
        f: FeatureId,
        t: usize,
        logit_position: usize,
        y: TokenId,
    ) -> Result<LogitEdge> {
        self.check_token(logit_position)?;
        if logit_position < t {
            return Err(Error::Index(format!(
                "logit position {logit_position} precedes activating token {t}"
            )));
        }
        if y as usize >= self.model.config.vocab_size {
            return Err(Error::Index(format!("output token {y} outside vocabulary")));
        }
        let delta = self.propagate_write(f, t)?;
        let activation = self.activation(f, t);
        let value = activation * self.logit_readout(delta.row(logit_position - t), logit_position, y);
        Ok(LogitEdge {
            feature: f,
            token: t,
            logit_position,
            output_token: y,
            value,
        })
    }

    /// Logit edges for several `(logit_position, output_token)` targets
    /// sharing one forward propagation.
    pub fn logit_edges(&self, f: FeatureId, t: usize, targets: &[(usize, TokenId)]) -> Result<Vec<LogitEdge>> {
        let delta = self.propagate_write(f, t)?;
        let activation = self.activation(f, t);
        targets
            .iter()
            .map(|&(pos, y)| {
                self.check_token(pos)?;
                if pos < t {
                    return Err(Error::Index(format!(
                        "logit position {pos} precedes activating token {t}"
                    )));
                }
                Ok(LogitEdge {
                    feature: f,
                    token: t,
                    logit_position: pos,
                    output_token: y,
                    value: activation * self.logit_readout(delta.row(pos - t), pos, y),
                })
            })
            .collect()
    }
}
