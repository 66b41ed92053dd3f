// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{FeatureEdge, HeadEdge, LogitEdge};

/// One line of an attribution-graph export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Edge {
    Feature(FeatureEdge),
    Head(HeadEdge),
    Logit(LogitEdge),
}

impl Edge {
    pub fn value(&self) -> f32 {
        match self {
            Edge::Feature(e) => e.value,
            Edge::Head(e) => e.value,
            Edge::Logit(e) => e.value,
        }
    }
}

/// JSON lines, one edge per line.
pub fn edges_to_jsonl(edges: &[Edge]) -> String {
    let mut out = String::new();
    for e in edges {
        out.push_str(&serde_json::to_string(e).expect("edges serialize"));
        out.push('\n');
    }
    out
}

/// Graphviz rendering. `token_label` maps a token position to display text.
pub fn edges_to_dot(edges: &[Edge], token_label: impl Fn(usize) -> String) -> String {
    let mut out = String::from("digraph attribution {\n  rankdir=LR;\n");
    let esc = |s: String| s.replace('\\', "\\\\").replace('"', "\\\"");
    for e in edges {
        let (src, dst, label) = match e {
            Edge::Feature(f) => (
                format!("\"F{}@{}\"", f.source, f.token),
                format!("\"F{}@{}\"", f.target, f.token),
                f.value,
            ),
            Edge::Head(h) => (
                format!(
                    "\"tok{} {}\"",
                    h.src_token,
                    esc(token_label(h.src_token))
                ),
                format!("\"F{}@{}\"", h.dst_feature, h.dst_token),
                h.value,
            ),
            Edge::Logit(l) => (
                format!("\"F{}@{}\"", l.feature, l.token),
                format!("\"logit{}@{}\"", l.output_token, l.logit_position),
                l.value,
            ),
        };
        let extra = match e {
            Edge::Head(h) => format!(" via L{}H{}", h.layer, h.head),
            _ => String::new(),
        };
        let _ = writeln!(out, "  {src} -> {dst} [label=\"{label:.4}{extra}\"];");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcoder::FeatureId;

    #[test]
    fn jsonl_carries_kind_tag() {
        let e = Edge::Logit(LogitEdge {
            feature: FeatureId::new(1, 2),
            token: 3,
            logit_position: 4,
            output_token: 5,
            value: 0.5,
        });
        let line = edges_to_jsonl(std::slice::from_ref(&e));
        assert!(line.starts_with("{\"kind\":\"logit\""));
        let back: Edge = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn dot_is_well_formed() {
        let e = Edge::Feature(FeatureEdge {
            source: FeatureId::new(0, 1),
            target: FeatureId::new(1, 0),
            token: 2,
            activation: 1.0,
            invariant_part: 0.25,
            value: 0.25,
        });
        let dot = edges_to_dot(&[e], |t| format!("t{t}"));
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("\"F0:1@2\" -> \"F1:0@2\""));
        assert!(dot.trim_end().ends_with('}'));
    }
}
