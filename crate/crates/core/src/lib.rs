// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weight-based and activation-based interpretation of transcoder features
//! in small decoder-only transformers.

pub mod attribution;
pub mod circuitlens;
pub mod corpus;
pub mod error;
pub mod explainer;
pub mod fixtures;
pub mod model;
pub mod par;
pub mod prompts;
pub mod stats;
pub mod tensor_io;
pub mod transcoder;
pub mod weightlens;

pub use error::{Error, Result};
pub use model::{ForwardMode, Model, ModelConfig, TokenId, Vocabulary};
pub use transcoder::{FeatureId, Gate, Transcoder, TranscoderSet};
