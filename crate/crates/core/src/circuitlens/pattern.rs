// SPDX-License-Identifier: MIT OR Apache-2.0

//! Masked token patterns: the tokens that matter, with gap markers for the
//! ones that were dropped.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SHORT_GAP: &str = "_";
pub const LONG_GAP: &str = "[...]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapClass {
    /// 1 to 3 skipped tokens.
    Short,
    /// 4 or more.
    Long,
}

impl GapClass {
    pub fn of(skipped: usize) -> Option<Self> {
        match skipped {
            0 => None,
            1..=3 => Some(Self::Short),
            _ => Some(Self::Long),
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            Self::Short => SHORT_GAP,
            Self::Long => LONG_GAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Token { text: String, highlighted: bool },
    Gap(GapClass),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    /// Kept positions, ascending.
    pub kept: Vec<usize>,
    /// Display strings of the kept positions.
    pub tokens: Vec<String>,
    pub activating: usize,
    pub rendered: String,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

/// Segment structure implied by a kept-position set.
pub fn segments(tokens: &[String], kept: &BTreeSet<usize>, activating: usize) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &k in kept {
        if let Some(p) = prev {
            if let Some(g) = GapClass::of(k - p - 1) {
                out.push(Segment::Gap(g));
            }
        }
        out.push(Segment::Token {
            text: tokens[k].trim().to_string(),
            highlighted: k == activating,
        });
        prev = Some(k);
    }
    out
}

pub fn render_segments(segs: &[Segment]) -> String {
    let parts: Vec<String> = segs
        .iter()
        .map(|s| match s {
            Segment::Token { text, highlighted: true } => format!("<<<{text}>>>"),
            Segment::Token { text, .. } => text.clone(),
            Segment::Gap(g) => g.marker().to_string(),
        })
        .collect();
    parts.join(" ")
}

/// Renders the kept positions of `tokens`. `activating` must be kept.
pub fn render_pattern(tokens: &[String], kept: &BTreeSet<usize>, activating: usize) -> Result<Pattern> {
    if !kept.contains(&activating) {
        return Err(Error::InvalidParam(format!(
            "activating position {activating} is not kept"
        )));
    }
    if let Some(&last) = kept.last() {
        if last >= tokens.len() {
            return Err(Error::Index(format!(
                "kept position {last} outside {} tokens",
                tokens.len()
            )));
        }
    }
    let rendered = render_segments(&segments(tokens, kept, activating));
    Ok(Pattern {
        kept: kept.iter().copied().collect(),
        tokens: kept.iter().map(|&k| tokens[k].trim().to_string()).collect(),
        activating,
        rendered,
    })
}

/// Inverse of rendering, for tokens without internal spaces.
pub fn parse_pattern(s: &str) -> Vec<Segment> {
    s.split(' ')
        .filter(|p| !p.is_empty())
        .map(|p| match p {
            SHORT_GAP => Segment::Gap(GapClass::Short),
            LONG_GAP => Segment::Gap(GapClass::Long),
            _ => match p.strip_prefix("<<<").and_then(|r| r.strip_suffix(">>>")) {
                Some(inner) => Segment::Token {
                    text: inner.to_string(),
                    highlighted: true,
                },
                None => Segment::Token {
                    text: p.to_string(),
                    highlighted: false,
                },
            },
        })
        .collect()
}
