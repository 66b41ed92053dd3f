// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run manifests and config merging.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "lens";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce one output: the command, its resolved
/// parameters, and hashes of every input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub params: Value,
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, params: Value) -> Self {
        Self {
            tool: TOOL.into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            params,
            inputs: BTreeMap::new(),
        }
    }

    /// Records the SHA-256 of `path` under `key`.
    pub fn hash_input(&mut self, key: impl Into<String>, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.insert(key.into(), sha256_hex(&bytes));
        Ok(())
    }

    /// `{"manifest": ...}` on one line.
    pub fn jsonl_header(&self) -> String {
        serde_json::to_string(&serde_json::json!({ "manifest": self })).expect("manifest serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads a config file. A run manifest (bare, or wrapped as
/// `{"manifest": ...}`) contributes its parameters and must name the same
/// command; any other object is taken as parameters directly.
pub fn load_config(path: &Path, command: &str) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let value: Value = serde_json::from_str(&text)
        .or_else(|_| serde_json::from_str(first))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value = match value.get("manifest") {
        Some(m) => m.clone(),
        None => value,
    };
    if let Some(params) = value.get("params") {
        let named = value.get("command").and_then(Value::as_str).unwrap_or(command);
        if named != command {
            return Err(CliError::Config(format!(
                "config is a manifest for `{named}`, not `{command}`"
            )));
        }
        return Ok(params.clone());
    }
    if !value.is_object() {
        return Err(CliError::Config(format!("{}: config must be a JSON object", path.display())));
    }
    Ok(value)
}

/// Overlays the non-null fields of `cli` onto `config`. Unknown config
/// keys are rejected.
pub fn merge<T>(cli: &T, config: Option<&Value>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let known = match serde_json::to_value(T::default()).expect("options serialize") {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    let mut base = match config {
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(CliError::Config("config must be a JSON object".into())),
        None => Map::new(),
    };
    if let Some(k) = base.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Config(format!("unknown config key `{k}`")));
    }
    if let Value::Object(flags) = serde_json::to_value(cli).expect("options serialize") {
        for (k, v) in flags {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Config(e.to_string()))
}

/// Canonical key for an input file in the manifest: its file name.
pub fn input_key(prefix: &str, path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    format!("{prefix}:{name}")
}

pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Config(format!("missing required option --{flag}")))
}

pub fn require_path(v: &Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    require(v, flag)
}
