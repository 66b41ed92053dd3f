// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse activation store.
//!
//! Layout (little-endian):
//!
//! | field       | type     |
//! |-------------|----------|
//! | magic       | `LNSA`   |
//! | version     | u32 = 1  |
//! | n_records   | u64      |
//! | n_documents | u32      |
//!
//! then `n_records` fixed-width 14-byte records `(u32 feature, u32 doc,
//! u16 pos, f32 value)` sorted by `(feature, doc, pos)`. The feature word
//! is `layer << 20 | index`. `n_documents` counts documents already
//! scanned, so a partial store can be resumed.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuitlens::ActivationRecord;
use crate::error::{Error, Result};
use crate::transcoder::FeatureId;

pub const MAGIC: &[u8; 4] = b"LNSA";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;
pub const RECORD_LEN: usize = 14;
const INDEX_BITS: u32 = 20;

pub fn encode_feature(f: FeatureId) -> Result<u32> {
    if f.feature >= 1 << INDEX_BITS || f.layer >= 1 << (32 - INDEX_BITS) {
        return Err(Error::InvalidParam(format!("feature {f} does not fit the store encoding")));
    }
    Ok(((f.layer as u32) << INDEX_BITS) | f.feature as u32)
}

pub fn decode_feature(key: u32) -> FeatureId {
    FeatureId::new((key >> INDEX_BITS) as usize, (key & ((1 << INDEX_BITS) - 1)) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub feature: FeatureId,
    pub doc: u32,
    pub pos: u16,
    pub value: f32,
}

impl StoreRecord {
    fn sort_key(&self) -> (FeatureId, u32, u16) {
        (self.feature, self.doc, self.pos)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivationStore {
    records: Vec<StoreRecord>,
    n_documents: u32,
}

impl ActivationStore {
    /// Sorts and validates `records`: values must be positive and finite and
    /// `(feature, doc, pos)` unique.
    pub fn new(mut records: Vec<StoreRecord>, n_documents: u32) -> Result<Self> {
        for r in &records {
            if !(r.value > 0.0) || !r.value.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "non-positive activation {} for {} at doc {} pos {}",
                    r.value, r.feature, r.doc, r.pos
                )));
            }
            encode_feature(r.feature)?;
        }
        records.sort_by_key(StoreRecord::sort_key);
        if let Some(w) = records.windows(2).find(|w| w[0].sort_key() == w[1].sort_key()) {
            return Err(Error::InvalidParam(format!(
                "duplicate record for {} at doc {} pos {}",
                w[0].feature, w[0].doc, w[0].pos
            )));
        }
        Ok(Self {
            records,
            n_documents,
        })
    }

    pub fn records(&self) -> &[StoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_documents(&self) -> u32 {
        self.n_documents
    }

    /// All records of `feature`, by binary search.
    pub fn records_for(&self, feature: FeatureId) -> &[StoreRecord] {
        let lo = self.records.partition_point(|r| r.feature < feature);
        let hi = self.records.partition_point(|r| r.feature <= feature);
        &self.records[lo..hi]
    }

    pub fn activation_records(&self, feature: FeatureId) -> Vec<ActivationRecord> {
        self.records_for(feature)
            .iter()
            .map(|r| ActivationRecord {
                doc: r.doc,
                pos: r.pos as u32,
                value: r.value,
            })
            .collect()
    }

    /// Features with at least one record, ascending.
    pub fn features(&self) -> Vec<FeatureId> {
        let mut out: Vec<FeatureId> = self.records.iter().map(|r| r.feature).collect();
        out.dedup();
        out
    }

    /// Union of shards; the document count is the maximum over shards.
    pub fn merge(shards: Vec<ActivationStore>) -> Result<Self> {
        let n_documents = shards.iter().map(|s| s.n_documents).max().unwrap_or(0);
        let records = shards.into_iter().flat_map(|s| s.records).collect();
        Self::new(records, n_documents)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.records.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.n_documents.to_le_bytes());
        for r in &self.records {
            let key = encode_feature(r.feature).expect("validated on construction");
            buf.extend_from_slice(&key.to_le_bytes());
            buf.extend_from_slice(&r.doc.to_le_bytes());
            buf.extend_from_slice(&r.pos.to_le_bytes());
            buf.extend_from_slice(&r.value.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an activation store (bad magic)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported store version {version}")));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let n_documents = u32_at(16);
        let expected = n
            .checked_mul(RECORD_LEN)
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format("record count overflows".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "store holds {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let mut records = Vec::with_capacity(n);
        for chunk in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN) {
            records.push(StoreRecord {
                feature: decode_feature(u32::from_le_bytes(chunk[0..4].try_into().expect("4"))),
                doc: u32::from_le_bytes(chunk[4..8].try_into().expect("4")),
                pos: u16::from_le_bytes(chunk[8..10].try_into().expect("2")),
                value: f32::from_le_bytes(chunk[10..14].try_into().expect("4")),
            });
        }
        if records.windows(2).any(|w| w[0].sort_key() >= w[1].sort_key()) {
            return Err(Error::Format("store records are not sorted".into()));
        }
        Self::new(records, n_documents)
    }

    /// Writes via a temporary sibling and rename.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(l: usize, i: usize, doc: u32, pos: u16, value: f32) -> StoreRecord {
        StoreRecord {
            feature: FeatureId::new(l, i),
            doc,
            pos,
            value,
        }
    }

    #[test]
    fn feature_encoding() {
        let f = FeatureId::new(3, 1234);
        assert_eq!(encode_feature(f).unwrap(), (3 << 20) | 1234);
        assert_eq!(decode_feature(encode_feature(f).unwrap()), f);
        assert!(encode_feature(FeatureId::new(0, 1 << 20)).is_err());
    }

    #[test]
    fn rejects_nonpositive_and_duplicates() {
        assert!(ActivationStore::new(vec![rec(0, 0, 0, 0, 0.0)], 1).is_err());
        assert!(ActivationStore::new(vec![rec(0, 0, 0, 0, 1.0), rec(0, 0, 0, 0, 2.0)], 1).is_err());
    }

    #[test]
    fn bad_header_rejected() {
        assert!(ActivationStore::from_bytes(b"NOPE").is_err());
        let mut b = ActivationStore::new(vec![rec(0, 1, 2, 3, 1.0)], 3).unwrap().to_bytes();
        b.pop();
        assert!(ActivationStore::from_bytes(&b).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(
            raw in proptest::collection::btree_map((0usize..3, 0usize..50, 0u32..20, 0u16..64), 1e-6f32..100.0, 0..200),
        ) {
            let recs: Vec<StoreRecord> = raw.iter().map(|(&(l, i, d, p), &v)| rec(l, i, d, p, v)).collect();
            let store = ActivationStore::new(recs, 20).unwrap();
            let back = ActivationStore::from_bytes(&store.to_bytes()).unwrap();
            prop_assert_eq!(&back, &store);
            for f in store.features() {
                prop_assert!(store.records_for(f).iter().all(|r| r.feature == f));
                let n = store.records().iter().filter(|r| r.feature == f).count();
                prop_assert_eq!(store.records_for(f).len(), n);
            }
        }
    }
}
