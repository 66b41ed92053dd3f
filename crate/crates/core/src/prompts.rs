// SPDX-License-Identifier: MIT OR Apache-2.0

//! Explainer prompt templates and payload builders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLUSTER_TEMPLATE: &str = include_str!("../templates/cluster.txt");
pub const MERGE_TEMPLATE: &str = include_str!("../templates/merge.txt");
pub const MERGE_IMPORTANT_TEMPLATE: &str = include_str!("../templates/merge_important.txt");
pub const REFINE_TEMPLATE: &str = include_str!("../templates/weightlens_refine.txt");

/// A chat request: system instructions plus the user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub system: String,
    pub user: String,
}

impl PromptPayload {
    /// Plain-text rendering: system prompt, blank line, user message.
    pub fn render(&self) -> String {
        format!("{}\n\n{}\n", self.system, self.user)
    }
}

/// Cluster-level request: one pattern per line.
pub fn build_cluster_prompt<S: AsRef<str>>(patterns: &[S]) -> Result<PromptPayload> {
    if patterns.is_empty() {
        return Err(Error::InvalidParam("cluster prompt needs at least one pattern".into()));
    }
    Ok(PromptPayload {
        system: CLUSTER_TEMPLATE.to_string(),
        user: join_lines(patterns),
    })
}

/// `Important tokens: a, b, c.`
pub fn important_tokens_line<S: AsRef<str>>(tokens: &[S]) -> String {
    let list: Vec<&str> = tokens.iter().map(|t| t.as_ref()).collect();
    format!("Important tokens: {}.", list.join(", "))
}

/// Feature-level request merging cluster descriptions. With important
/// tokens the instructions for them are included and the token line leads
/// the user message.
pub fn merge_prompt<S: AsRef<str>, T: AsRef<str>>(
    descriptions: &[S],
    important_tokens: Option<&[T]>,
) -> Result<PromptPayload> {
    if descriptions.is_empty() {
        return Err(Error::InvalidParam("merge prompt needs at least one description".into()));
    }
    let body = join_lines(descriptions);
    Ok(match important_tokens {
        Some(tokens) if !tokens.is_empty() => PromptPayload {
            system: MERGE_IMPORTANT_TEMPLATE.to_string(),
            user: format!("{}\n{body}", important_tokens_line(tokens)),
        },
        _ => PromptPayload {
            system: MERGE_TEMPLATE.to_string(),
            user: body,
        },
    })
}

/// Python-style list literal: `['on', 'pada']`.
pub fn py_list<S: AsRef<str>>(items: &[S]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| py_repr(s.as_ref())).collect();
    format!("[{}]", quoted.join(", "))
}

fn py_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

/// Weight-based refinement request with the three token sections.
pub fn build_refine_prompt<A: AsRef<str>, B: AsRef<str>, C: AsRef<str>>(
    important: &[A],
    promoted: &[B],
    suppressed: &[C],
) -> PromptPayload {
    PromptPayload {
        system: REFINE_TEMPLATE.to_string(),
        user: format!(
            "[Important Tokens]: {}\n[Tokens Promoted]: {}\n[Tokens Suppressed]: {}",
            py_list(important),
            py_list(promoted),
            py_list(suppressed)
        ),
    }
}

fn join_lines<S: AsRef<str>>(items: &[S]) -> String {
    items
        .iter()
        .map(|s| s.as_ref())
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_prompt_has_gap_legend() {
        let p = build_cluster_prompt(&["a _ <<<b>>>"]).unwrap();
        assert!(p.system.contains("- _  is 1-3 skipped non-important tokens"));
        assert!(p.system.contains("- [...] is 4 or more skipped not relevant tokens"));
        assert_eq!(p.user, "a _ <<<b>>>");
    }

    #[test]
    fn merge_without_tokens_has_no_token_line() {
        let p = merge_prompt(&["x", "y"], None::<&[&str]>).unwrap();
        assert!(!p.user.contains("Important tokens"));
        assert!(!p.system.contains("Sometimes, you may also receive"));
        assert_eq!(p.user, "x\ny");
    }

    #[test]
    fn merge_with_tokens_prepends_line() {
        let p = merge_prompt(&["x"], Some(&["new"][..])).unwrap();
        assert_eq!(p.user, "Important tokens: new.\nx");
        assert!(p.system.contains("Always integrate these tokens"));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(build_cluster_prompt::<&str>(&[]).is_err());
        assert!(merge_prompt::<&str, &str>(&[], None).is_err());
    }

    #[test]
    fn refine_payload_matches_example_layout() {
        let p = build_refine_prompt(&["on", "pada"], &["behalf"], &["on", "in"]);
        assert_eq!(
            p.user,
            "[Important Tokens]: ['on', 'pada']\n[Tokens Promoted]: ['behalf']\n[Tokens Suppressed]: ['on', 'in']"
        );
        // the template's own example carries the same three lines
        assert!(p.system.contains(&p.user));
    }

    #[test]
    fn empty_sections_stay_present() {
        let p = build_refine_prompt::<&str, &str, &str>(&["x"], &[], &[]);
        assert!(p.user.contains("[Tokens Promoted]: []"));
        assert!(p.user.contains("[Tokens Suppressed]: []"));
    }

    #[test]
    fn py_repr_quotes() {
        assert_eq!(py_repr("it's"), "\"it's\"");
        assert_eq!(py_repr("a\\b"), "'a\\\\b'");
        assert_eq!(py_repr("'\""), "'\\'\"'");
    }
}
