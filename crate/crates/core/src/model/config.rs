// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positional {
    #[default]
    LearnedAbsolute,
}

/// Architecture of a pre-LayerNorm decoder-only transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_head: usize,
    pub d_mlp: usize,
    pub vocab_size: usize,
    pub max_seq: usize,
    pub ln_eps: f32,
    #[serde(default)]
    pub positional: Positional,
    /// Token prepended when a caller asks for a BOS-prefixed context.
    /// Off unless set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bos_token: Option<u32>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_head", self.d_head),
            ("d_mlp", self.d_mlp),
            ("vocab_size", self.vocab_size),
            ("max_seq", self.max_seq),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Format(format!("config field {name} must be >= 1")));
            }
        }
        if self.n_heads * self.d_head != self.d_model {
            return Err(Error::Format(format!(
                "n_heads ({}) x d_head ({}) != d_model ({})",
                self.n_heads, self.d_head, self.d_model
            )));
        }
        if !(self.ln_eps > 0.0 && self.ln_eps.is_finite()) {
            return Err(Error::Format("ln_eps must be a positive finite value".into()));
        }
        if self.vocab_size < 256 {
            return Err(Error::Format(
                "vocab_size must leave room for 256 byte-fallback tokens".into(),
            ));
        }
        if self.max_seq > u16::MAX as usize + 1 {
            return Err(Error::Format("max_seq must fit a 16-bit position".into()));
        }
        if let Some(bos) = self.bos_token {
            if bos as usize >= self.vocab_size {
                return Err(Error::Format(format!("bos_token {bos} outside vocabulary")));
            }
        }
        Ok(())
    }
}
