// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use lens_core::Error;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_MODEL_FORMAT: u8 = 4;
pub const EXIT_EXPLAINER: u8 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Lens(#[from] Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source: e,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Lens(e) => match e {
                Error::Io { .. } => EXIT_IO,
                Error::Json { .. }
                | Error::MissingTensor(_)
                | Error::ShapeMismatch { .. }
                | Error::NonFinite(_)
                | Error::Format(_)
                | Error::MissingTranscoder(_)
                | Error::LayerMismatch { .. } => EXIT_MODEL_FORMAT,
                Error::InvalidParam(_) => EXIT_CONFIG,
                Error::Explainer(_) => EXIT_EXPLAINER,
                _ => EXIT_OTHER,
            },
        })
    }
}
