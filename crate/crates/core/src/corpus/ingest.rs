// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sentence-level corpus preparation.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub inputs: Vec<PathBuf>,
    /// Fraction cut from each tail of the sentence-length distribution.
    pub percentile_cut: f64,
    pub dedup: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            percentile_cut: 0.05,
            dedup: true,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.percentile_cut) {
            return Err(Error::InvalidParam(format!(
                "percentile cut {} outside [0, 0.5)",
                self.percentile_cut
            )));
        }
        Ok(())
    }
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "no", "fig",
];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '”' | '’')
}

/// True when the period ending `text` belongs to an abbreviation or an
/// initial rather than closing a sentence.
fn abbreviation_before(text: &str) -> bool {
    let word = text
        .trim_end_matches('.')
        .rsplit(|c: char| c.is_whitespace() || c == '(' || c == '"')
        .next()
        .unwrap_or("");
    if word.chars().count() == 1 && word.chars().all(|c| c.is_uppercase()) {
        return true;
    }
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits at `.`, `!` or `?` (plus closing quotes and brackets) followed by
/// whitespace, and at blank lines. Periods after abbreviations and single
/// capital initials do not split. Whitespace inside a sentence is
/// collapsed to single spaces.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for para in text.split("\n\n") {
        let chars: Vec<(usize, char)> = para.char_indices().collect();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            let (_, c) = chars[i];
            if matches!(c, '.' | '!' | '?') {
                let mut j = i + 1;
                while j < chars.len() && (matches!(chars[j].1, '.' | '!' | '?') || is_closer(chars[j].1)) {
                    j += 1;
                }
                let end = chars.get(j).map_or(para.len(), |&(b, _)| b);
                let at_break = j == chars.len() || chars[j].1.is_whitespace();
                let abbrev = c == '.' && j == i + 1 && abbreviation_before(&para[start..end]);
                if at_break && !abbrev {
                    let s = normalize(&para[start..end]);
                    if !s.is_empty() {
                        out.push(s);
                    }
                    start = end;
                }
                i = j;
            } else {
                i += 1;
            }
        }
        let s = normalize(&para[start..]);
        if !s.is_empty() {
            out.push(s);
        }
    }
    out
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Drops sentences strictly shorter (in characters) than the `cut`
/// percentile or strictly longer than the `1 - cut` percentile.
pub fn length_filter(sentences: Vec<String>, cut: f64) -> Vec<String> {
    if sentences.is_empty() || cut == 0.0 {
        return sentences;
    }
    let mut lens: Vec<f64> = sentences.iter().map(|s| s.chars().count() as f64).collect();
    lens.sort_by(f64::total_cmp);
    let lo = percentile(&lens, cut);
    let hi = percentile(&lens, 1.0 - cut);
    sentences
        .into_iter()
        .filter(|s| {
            let n = s.chars().count() as f64;
            n >= lo && n <= hi
        })
        .collect()
}

/// Sentences with no letters consist only of numbers and symbols.
pub fn has_letters(s: &str) -> bool {
    s.chars().any(char::is_alphabetic)
}

fn read_texts(path: &Path) -> Result<Vec<String>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_jsonl = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    );
    if !is_jsonl {
        return Ok(vec![raw]);
    }
    let mut texts = Vec::new();
    for (n, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::json(path, e))?;
        let text = v.get("text").and_then(|t| t.as_str()).ok_or_else(|| {
            Error::Format(format!("{}:{}: missing string field \"text\"", path.display(), n + 1))
        })?;
        texts.push(text.to_string());
    }
    Ok(texts)
}

/// Split, length filter, symbol filter, then deduplicate in first-seen
/// order.
pub fn ingest_texts<S: AsRef<str>>(texts: &[S], config: &CorpusConfig) -> Result<Vec<String>> {
    config.validate()?;
    let sentences: Vec<String> = texts
        .iter()
        .flat_map(|t| split_sentences(t.as_ref()))
        .collect();
    let kept = length_filter(sentences, config.percentile_cut);
    let mut seen = HashSet::new();
    Ok(kept
        .into_iter()
        .filter(|s| has_letters(s))
        .filter(|s| !config.dedup || seen.insert(s.clone()))
        .collect())
}

pub fn ingest(config: &CorpusConfig) -> Result<Vec<String>> {
    config.validate()?;
    let mut texts = Vec::new();
    for p in &config.inputs {
        texts.extend(read_texts(p)?);
    }
    ingest_texts(&texts, config)
}

pub fn write_sentences(path: &Path, sentences: &[String]) -> Result<()> {
    let mut body = sentences.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_sentences(path: &Path) -> Result<Vec<String>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw.lines().map(str::to_string).collect())
}
