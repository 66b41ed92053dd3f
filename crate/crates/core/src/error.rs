// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use crate::explainer::ExplainerError;

/// Errors produced by the lens library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("missing tensor \"{0}\"")]
    MissingTensor(String),

    #[error("shape mismatch for tensor \"{name}\": expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("tensor \"{0}\" contains a non-finite value")]
    NonFinite(String),

    #[error("invalid model format: {0}")]
    Format(String),

    #[error("sequence of {len} tokens exceeds max_seq {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("no transcoder loaded for layer {0}")]
    MissingTranscoder(usize),

    #[error("transcoder for layer {transcoder} used with layer {expected}")]
    LayerMismatch { transcoder: usize, expected: usize },

    #[error("layer order violated: source layer {source_layer} must precede target layer {target_layer}")]
    LayerOrder {
        source_layer: usize,
        target_layer: usize,
    },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("feature {0} is not active at token {1}")]
    InactiveFeature(crate::transcoder::FeatureId, usize),

    #[error("similarity matrix is not symmetric at ({0}, {1})")]
    NonSymmetric(usize, usize),

    #[error(transparent)]
    Explainer(#[from] ExplainerError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
