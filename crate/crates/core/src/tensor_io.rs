// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named-tensor container: a JSON manifest describing every tensor
//! (shape, dtype, byte offset, byte length) plus a companion binary of
//! raw little-endian `f32` values.
//!
//! ```text
//! toy_2L.manifest.json   { "format": "lens-tensors", "version": 1,
//!                          "binary": "toy_2L.bin",
//!                          "tensors": { "W_U": { "shape": [64, 300],
//!                                                "dtype": "f32",
//!                                                "offset": 0, "length": 76800 }, ... },
//!                          "config": {...}, "vocab": "...", "meta": {...} }
//! toy_2L.bin             concatenated tensor payloads
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "lens-tensors";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorManifest {
    pub format: String,
    pub version: u32,
    pub binary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<String>,
    pub tensors: BTreeMap<String, TensorEntry>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

/// Tensors read from a container, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct WeightStore {
    tensors: BTreeMap<String, ArrayD<f32>>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: ArrayD<f32>) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn insert_matrix(&mut self, name: impl Into<String>, m: &Array2<f32>) {
        self.insert(name, m.clone().into_dyn());
    }

    pub fn insert_vector(&mut self, name: impl Into<String>, v: &Array1<f32>) {
        self.insert(name, v.clone().into_dyn());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<f32>> {
        self.tensors.get(name)
    }

    fn checked(&self, name: &str, shape: &[usize]) -> Result<&ArrayD<f32>> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        if t.shape() != shape {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: t.shape().to_vec(),
            });
        }
        Ok(t)
    }

    pub fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Array2<f32>> {
        let t = self.checked(name, &[rows, cols])?;
        Ok(t.clone()
            .into_dimensionality()
            .expect("shape checked above"))
    }

    pub fn vector(&self, name: &str, len: usize) -> Result<Array1<f32>> {
        let t = self.checked(name, &[len])?;
        Ok(t.clone()
            .into_dimensionality()
            .expect("shape checked above"))
    }

    /// Reads a manifest and its binary. Every tensor is checked for
    /// consistent byte length and finite values.
    pub fn load(manifest_path: &Path) -> Result<(TensorManifest, WeightStore)> {
        let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: TensorManifest =
            serde_json::from_str(&text).map_err(|e| Error::json(manifest_path, e))?;
        if manifest.format != FORMAT_NAME {
            return Err(Error::Format(format!(
                "unexpected container format \"{}\"",
                manifest.format
            )));
        }
        if manifest.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {}",
                manifest.version
            )));
        }
        let bin_path = sibling(manifest_path, &manifest.binary);
        let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;

        let mut store = WeightStore::new();
        for (name, entry) in &manifest.tensors {
            if entry.dtype != "f32" {
                return Err(Error::Format(format!(
                    "tensor \"{name}\" has unsupported dtype \"{}\"",
                    entry.dtype
                )));
            }
            let numel: usize = entry.shape.iter().product();
            if entry.length != (numel * 4) as u64 {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: entry.shape.clone(),
                    found: vec![(entry.length / 4) as usize],
                });
            }
            let start = entry.offset as usize;
            let end = start + entry.length as usize;
            let raw = bytes.get(start..end).ok_or_else(|| {
                Error::Format(format!("tensor \"{name}\" extends past end of binary"))
            })?;
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name.clone()));
            }
            let arr = ArrayD::from_shape_vec(IxDyn(&entry.shape), values)
                .map_err(|e| Error::Format(format!("tensor \"{name}\": {e}")))?;
            store.insert(name.clone(), arr);
        }
        Ok((manifest, store))
    }

    /// Writes `<dir>/<stem>.manifest.json` and `<dir>/<stem>.bin`.
    /// Tensors are laid out in name order.
    pub fn save(
        &self,
        dir: &Path,
        stem: &str,
        config: Option<serde_json::Value>,
        vocab: Option<String>,
        meta: serde_json::Value,
    ) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tensors = BTreeMap::new();
        let mut payload: Vec<u8> = Vec::new();
        for (name, t) in &self.tensors {
            let offset = payload.len() as u64;
            for v in t.iter() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            tensors.insert(
                name.clone(),
                TensorEntry {
                    shape: t.shape().to_vec(),
                    dtype: "f32".to_string(),
                    offset,
                    length: payload.len() as u64 - offset,
                },
            );
        }
        let binary = format!("{stem}.bin");
        let manifest = TensorManifest {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            binary: binary.clone(),
            config,
            vocab,
            tensors,
            meta,
        };
        let bin_path = dir.join(&binary);
        fs::write(&bin_path, &payload).map_err(|e| Error::io(&bin_path, e))?;
        let manifest_path = dir.join(format!("{stem}.manifest.json"));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest_path)
    }
}

pub(crate) fn sibling(manifest_path: &Path, file: &str) -> PathBuf {
    manifest_path
        .parent()
        .map(|p| p.join(file))
        .unwrap_or_else(|| PathBuf::from(file))
}

/// Resolves `dir/toy_2L`, `dir/toy_2L.manifest.json` or a bare stem to the
/// manifest path.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    if s.ends_with(".manifest.json") {
        path.to_path_buf()
    } else {
        PathBuf::from(format!("{s}.manifest.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn save_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = WeightStore::new();
        store.insert_matrix("a", &array![[1.0f32, -2.5], [3.25, f32::MIN_POSITIVE]]);
        store.insert_vector("b", &array![0.1f32, 0.2, 0.3]);
        let path = store
            .save(dir.path(), "t", None, None, serde_json::Value::Null)
            .unwrap();
        let (manifest, loaded) = WeightStore::load(&path).unwrap();
        assert_eq!(manifest.tensors.len(), 2);
        for name in ["a", "b"] {
            let x = store.get(name).unwrap();
            let y = loaded.get(name).unwrap();
            assert_eq!(x.shape(), y.shape());
            for (p, q) in x.iter().zip(y.iter()) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn non_finite_value_names_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = WeightStore::new();
        store.insert_vector("bad", &array![1.0f32, f32::NAN]);
        let path = store
            .save(dir.path(), "t", None, None, serde_json::Value::Null)
            .unwrap();
        match WeightStore::load(&path) {
            Err(Error::NonFinite(name)) => assert_eq!(name, "bad"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn missing_binary_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = WeightStore::new();
        store.insert_vector("x", &array![1.0f32]);
        let path = store
            .save(dir.path(), "t", None, None, serde_json::Value::Null)
            .unwrap();
        fs::remove_file(dir.path().join("t.bin")).unwrap();
        match WeightStore::load(&path) {
            Err(Error::Io { source, .. }) => {
                assert_eq!(source.kind(), std::io::ErrorKind::NotFound)
            }
            other => panic!("expected Io, got {other:?}"),
        }
    }

    #[test]
    fn manifest_path_resolution() {
        assert_eq!(
            manifest_path_for(Path::new("a/toy_2L")),
            PathBuf::from("a/toy_2L.manifest.json")
        );
        assert_eq!(
            manifest_path_for(Path::new("a/toy_2L.manifest.json")),
            PathBuf::from("a/toy_2L.manifest.json")
        );
    }
}
