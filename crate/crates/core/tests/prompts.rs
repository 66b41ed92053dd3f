// SPDX-License-Identifier: MIT OR Apache-2.0

use lens_core::prompts::{build_cluster_prompt, build_refine_prompt, merge_prompt};

const DESCS: [&str; 2] = ["The token \"cat\" as a noun.", "Animal nouns after articles."];

#[test]
fn cluster_prompt_matches_golden() {
    let p = build_cluster_prompt(&["The <<<cat>>> sat", "a _ <<<cat>>>", "<<<cat>>> [...] ran"]).unwrap();
    assert_eq!(p.render(), include_str!("golden/cluster_prompt.txt"));
}

#[test]
fn merge_prompt_matches_golden() {
    let p = merge_prompt(&DESCS, None::<&[&str]>).unwrap();
    assert_eq!(p.render(), include_str!("golden/merge_prompt.txt"));
}

#[test]
fn merge_prompt_with_tokens_matches_golden() {
    let p = merge_prompt(&DESCS, Some(&["cat", "dog"][..])).unwrap();
    assert_eq!(p.render(), include_str!("golden/merge_prompt_important.txt"));
}

#[test]
fn empty_token_list_falls_back_to_plain_merge() {
    let a = merge_prompt(&DESCS, Some(&[] as &[&str])).unwrap();
    let b = merge_prompt(&DESCS, None::<&[&str]>).unwrap();
    assert_eq!(a, b);
}

#[test]
fn refine_prompt_sections() {
    let p = build_refine_prompt(&["cat"], &["runs"], &["the"]);
    assert_eq!(p.user, "[Important Tokens]: ['cat']\n[Tokens Promoted]: ['runs']\n[Tokens Suppressed]: ['the']");
    assert!(p.system.contains("[Concept: <Your interpretation of the neuron"));
}
