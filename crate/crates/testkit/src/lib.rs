// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reference implementations used as test oracles.
//!
//! Deliberately naive: a whole-sequence re-run of the network with every
//! nonlinearity statistic pinned to a recorded run, and a brute-force
//! DBSCAN built on connected components.

use lens_core::model::RunCache;
use lens_core::{FeatureId, Model, TranscoderSet};
use ndarray::{Array1, Array2};

/// A perturbation applied during a frozen re-run.
#[derive(Debug, Clone)]
pub enum Injection {
    /// Add `delta` to the residual after block `layer` at `pos`.
    Residual {
        layer: usize,
        pos: usize,
        delta: Array1<f32>,
    },
    /// Add `delta` to the residual between attention and MLP of `layer`.
    Mid {
        layer: usize,
        pos: usize,
        delta: Array1<f32>,
    },
    /// Remove the decoder write of `feature` at `pos`.
    RemoveDecoder { feature: FeatureId, pos: usize },
}

/// Residual snapshots and logits of a frozen re-run.
#[derive(Debug, Clone)]
pub struct FrozenRun {
    pub r_mid: Vec<Array2<f32>>,
    pub r_post: Vec<Array2<f32>>,
    pub logits: Array2<f32>,
}

fn frozen_ln(x: &Array2<f32>, mean: &[f32], rstd: &[f32], w: &Array1<f32>, b: &Array1<f32>) -> Array2<f32> {
    let mut out = x.clone();
    for (t, mut row) in out.outer_iter_mut().enumerate() {
        for j in 0..row.len() {
            row[j] = (row[j] - mean[t]) * rstd[t] * w[j] + b[j];
        }
    }
    out
}

/// Re-runs the sequence of `run` with attention patterns, every LayerNorm
/// mean and scale, and all MLP/transcoder outputs held at their recorded
/// values. Only the linear paths respond to injections.
pub fn frozen_rerun(model: &Model, tcs: &TranscoderSet, run: &RunCache, injections: &[Injection]) -> FrozenRun {
    let cfg = &model.config;
    let (n, d, dh) = (run.tokens.len(), cfg.d_model, cfg.d_head);
    let mut x = Array2::<f32>::zeros((n, d));
    for (t, &id) in run.tokens.iter().enumerate() {
        for j in 0..d {
            x[[t, j]] = model.w_emb[[id as usize, j]] + model.w_pos[[t, j]];
        }
    }
    let mut r_mid = Vec::new();
    let mut r_post = Vec::new();
    for (l, lw) in model.layers.iter().enumerate() {
        let lc = &run.layers[l];
        let h1 = frozen_ln(&x, &lc.ln1.mean, &lc.ln1.rstd, &lw.ln1_w, &lw.ln1_b);
        let mut mid = x.clone();
        for t in 0..n {
            for j in 0..d {
                mid[[t, j]] += lw.b_o[j];
            }
        }
        for h in 0..cfg.n_heads {
            // v_s for this head
            let mut v = Array2::<f32>::zeros((n, dh));
            for s in 0..n {
                for c in 0..dh {
                    let mut acc = lw.b_v[h * dh + c];
                    for j in 0..d {
                        acc += h1[[s, j]] * lw.w_v[[j, h * dh + c]];
                    }
                    v[[s, c]] = acc;
                }
            }
            for t in 0..n {
                let mut z = vec![0.0f32; dh];
                for s in 0..=t {
                    let a = lc.attn[h][[t, s]];
                    for c in 0..dh {
                        z[c] += a * v[[s, c]];
                    }
                }
                for j in 0..d {
                    let mut acc = 0.0;
                    for c in 0..dh {
                        acc += z[c] * lw.w_o[[h * dh + c, j]];
                    }
                    mid[[t, j]] += acc;
                }
            }
        }
        for inj in injections {
            if let Injection::Mid { layer, pos, delta } = inj {
                if *layer == l {
                    let mut row = mid.row_mut(*pos);
                    row += delta;
                }
            }
        }
        let mut post = &mid + &lc.mlp_out;
        for inj in injections {
            match inj {
                Injection::Residual { layer, pos, delta } if *layer == l => {
                    let mut row = post.row_mut(*pos);
                    row += delta;
                }
                Injection::RemoveDecoder { feature, pos } if feature.layer == l => {
                    let tc = tcs.layer(l).expect("transcoder for layer");
                    let acts = lc.tc_acts.as_ref().expect("transcoder-mode run");
                    let a = acts[[*pos, feature.feature]];
                    for j in 0..d {
                        post[[*pos, j]] -= a * tc.w_dec[[feature.feature, j]];
                    }
                }
                _ => {}
            }
        }
        r_mid.push(mid);
        r_post.push(post.clone());
        x = post;
    }
    let hf = frozen_ln(&x, &run.ln_final.mean, &run.ln_final.rstd, &model.ln_f_w, &model.ln_f_b);
    let v = cfg.vocab_size;
    let mut logits = Array2::<f32>::zeros((n, v));
    for t in 0..n {
        for y in 0..v {
            let mut acc = 0.0;
            for j in 0..d {
                acc += hf[[t, j]] * model.w_u[[j, y]];
            }
            logits[[t, y]] = acc;
        }
    }
    FrozenRun { r_mid, r_post, logits }
}

/// Brute-force DBSCAN over a similarity matrix (distance `1 - sim`).
///
/// Core points are those with at least `min_samples` points (themselves
/// included) within `eps`. Clusters are the connected components of the
/// core-point graph, numbered by their lowest core index; a border point
/// takes the lowest cluster id among its core neighbours.
pub fn naive_dbscan(sim: &Array2<f64>, eps: f64, min_samples: usize) -> Vec<i32> {
    let n = sim.nrows();
    let near = |a: usize, b: usize| 1.0 - sim[[a, b]] <= eps;
    let core: Vec<bool> = (0..n)
        .map(|p| (0..n).filter(|&q| near(p, q)).count() >= min_samples)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..n {
        for b in 0..n {
            if core[a] && core[b] && near(a, b) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut label_of_root = vec![-1i32; n];
    let mut next = 0;
    let mut labels = vec![-1i32; n];
    for p in 0..n {
        if core[p] {
            let r = find(&mut parent, p);
            if label_of_root[r] < 0 {
                label_of_root[r] = next;
                next += 1;
            }
            labels[p] = label_of_root[r];
        }
    }
    for p in 0..n {
        if !core[p] {
            labels[p] = (0..n)
                .filter(|&q| core[q] && near(p, q))
                .map(|q| labels[q])
                .min()
                .unwrap_or(-1);
        }
    }
    labels
}

/// Output of one attention head at every position, recomputed in f64 from
/// the recorded attention input and pattern.
pub fn head_output(model: &Model, run: &RunCache, layer: usize, head: usize) -> Array2<f64> {
    let cfg = &model.config;
    let lw = &model.layers[layer];
    let lc = &run.layers[layer];
    let (n, d, dh) = (run.tokens.len(), cfg.d_model, cfg.d_head);
    let mut v = Array2::<f64>::zeros((n, dh));
    for s in 0..n {
        for c in 0..dh {
            let mut acc = lw.b_v[head * dh + c] as f64;
            for j in 0..d {
                acc += lc.ln1_out[[s, j]] as f64 * lw.w_v[[j, head * dh + c]] as f64;
            }
            v[[s, c]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((n, d));
    for t in 0..n {
        for j in 0..d {
            let mut acc = 0.0;
            for c in 0..dh {
                let z: f64 = (0..=t).map(|s| lc.attn[head][[t, s]] as f64 * v[[s, c]]).sum();
                acc += z * lw.w_o[[head * dh + c, j]] as f64;
            }
            out[[t, j]] = acc;
        }
    }
    out
}
