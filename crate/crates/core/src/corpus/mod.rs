// SPDX-License-Identifier: MIT OR Apache-2.0

//! Corpus ingestion and the activation store.

mod ingest;
mod scan;
mod store;

pub use ingest::{
    has_letters, ingest, ingest_texts, length_filter, percentile, read_sentences, split_sentences,
    write_sentences, CorpusConfig,
};
pub use scan::{scan, scan_range, tokenize_documents};
pub use store::{
    decode_feature, encode_feature, ActivationStore, StoreRecord, HEADER_LEN, MAGIC, RECORD_LEN,
    VERSION,
};
