// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type TokenId = u32;

const BYTE_FALLBACKS: usize = 256;

fn byte_token_name(b: u8) -> String {
    format!("<0x{b:02X}>")
}

/// Ordered token list. The last 256 entries are byte-fallback tokens
/// `<0x00>` .. `<0xFF>`, so every byte string has an encoding.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<Vec<u8>, TokenId>,
    max_len: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from regular tokens, appending the byte fallbacks.
    pub fn from_regular<I, S>(regular: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = regular.into_iter().map(Into::into).collect();
        tokens.extend((0..=255u8).map(byte_token_name));
        Self::from_tokens(tokens)
    }

    /// Validates a full token list (regular tokens followed by byte fallbacks).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < BYTE_FALLBACKS {
            return Err(Error::Format(
                "vocabulary is shorter than the 256 byte-fallback entries".into(),
            ));
        }
        let n_regular = tokens.len() - BYTE_FALLBACKS;
        for (b, tok) in tokens[n_regular..].iter().enumerate() {
            if *tok != byte_token_name(b as u8) {
                return Err(Error::Format(format!(
                    "vocabulary entry {} must be byte fallback {}, found {tok:?}",
                    n_regular + b,
                    byte_token_name(b as u8)
                )));
            }
        }
        let mut lookup = HashMap::with_capacity(n_regular);
        let mut seen = std::collections::HashSet::with_capacity(tokens.len());
        let mut max_len = 1;
        for (id, tok) in tokens.iter().enumerate() {
            if !seen.insert(tok.as_str()) {
                return Err(Error::Format(format!("duplicate vocabulary entry {tok:?}")));
            }
            if id < n_regular {
                if tok.is_empty() {
                    return Err(Error::Format(format!("empty vocabulary entry at {id}")));
                }
                max_len = max_len.max(tok.len());
                lookup.insert(tok.as_bytes().to_vec(), id as TokenId);
            }
        }
        Ok(Self {
            tokens,
            lookup,
            max_len,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.tokens).expect("strings serialize");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_regular(&self) -> usize {
        self.tokens.len() - BYTE_FALLBACKS
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_byte_fallback(&self, id: TokenId) -> bool {
        (id as usize) >= self.n_regular() && (id as usize) < self.tokens.len()
    }

    pub fn byte_token(&self, b: u8) -> TokenId {
        (self.n_regular() + b as usize) as TokenId
    }

    /// Vocabulary string for `id`.
    pub fn token_str(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    /// Exact vocabulary lookup (no tokenization).
    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == token).map(|i| i as TokenId)
    }

    /// Raw bytes a token stands for.
    pub fn token_bytes(&self, id: TokenId) -> Vec<u8> {
        if self.is_byte_fallback(id) {
            vec![(id as usize - self.n_regular()) as u8]
        } else {
            self.tokens[id as usize].as_bytes().to_vec()
        }
    }

    /// Greedy longest-match tokenization with byte fallback.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        self.encode_bytes(text.as_bytes())
    }

    pub fn encode_bytes(&self, bytes: &[u8]) -> Vec<TokenId> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let longest = self.max_len.min(bytes.len() - i);
            let hit = (1..=longest)
                .rev()
                .find_map(|n| self.lookup.get(&bytes[i..i + n]).map(|&id| (id, n)));
            match hit {
                Some((id, n)) => {
                    out.push(id);
                    i += n;
                }
                None => {
                    out.push(self.byte_token(bytes[i]));
                    i += 1;
                }
            }
        }
        out
    }

    pub fn decode_bytes(&self, ids: &[TokenId]) -> Vec<u8> {
        ids.iter().flat_map(|&id| self.token_bytes(id)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        String::from_utf8_lossy(&self.decode_bytes(ids)).into_owned()
    }

    /// Human-readable form of a single token for patterns and reports:
    /// surrounding whitespace trimmed, whitespace-only tokens escaped.
    pub fn display(&self, id: TokenId) -> String {
        let raw = &self.tokens[id as usize];
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            raw.escape_debug().to_string()
        } else {
            trimmed.to_string()
        }
    }
}
