// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rule-based lemmatizer for English token strings.
//!
//! Lowercases, strips the leading space marker, then applies the first
//! matching suffix rule until none applies:
//!
//! | suffix | rule                                                     |
//! |--------|----------------------------------------------------------|
//! | `ies`  | → `y` when the word is longer than 4 bytes               |
//! | `es`   | → `` after `ss`, `sh`, `ch`, `x`, `z`                    |
//! | `s`    | → `` unless after `s`, `u`, `i`; word longer than 3     |
//! | `ing`  | → `` when the stem has ≥ 3 letters and a vowel           |
//! | `ed`   | → `` when the stem has ≥ 3 letters and a vowel           |
//!
//! After `ing`/`ed`, a doubled final consonant (other than l, s, z) is
//! undoubled: `running → runn → run`. Iterating to a fixpoint makes the
//! function idempotent.

const SPACE_MARKERS: [char; 3] = [' ', 'Ġ', '▁'];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn verb_stem(stem: &str) -> Option<String> {
    if stem.chars().count() < 3 || !stem.chars().any(is_vowel) {
        return None;
    }
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    let last = chars[n - 1];
    if chars[n - 2] == last && last.is_ascii_alphabetic() && !is_vowel(last) && !matches!(last, 'l' | 's' | 'z') {
        return Some(chars[..n - 1].iter().collect());
    }
    Some(stem.to_string())
}

fn apply_rule(w: &str) -> Option<String> {
    let len = w.len();
    if let Some(stem) = w.strip_suffix("ies") {
        if len > 4 {
            return Some(format!("{stem}y"));
        }
    }
    if let Some(stem) = w.strip_suffix("es") {
        if ["ss", "sh", "ch", "x", "z"].iter().any(|s| stem.ends_with(s)) {
            return Some(stem.to_string());
        }
    }
    if let Some(stem) = w.strip_suffix('s') {
        if len > 3 && !stem.ends_with(['s', 'u', 'i']) {
            return Some(stem.to_string());
        }
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if let Some(s) = verb_stem(stem) {
            return Some(s);
        }
    }
    if let Some(stem) = w.strip_suffix("ed") {
        if let Some(s) = verb_stem(stem) {
            return Some(s);
        }
    }
    None
}

pub fn lemmatize(token: &str) -> String {
    let mut w = token
        .trim_start_matches(SPACE_MARKERS)
        .trim()
        .to_lowercase();
    // every rule shortens the word, so this terminates
    while let Some(next) = apply_rule(&w) {
        w = next.trim_end().to_string();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn running_to_run() {
        assert_eq!(lemmatize("Running"), "run");
        assert_eq!(lemmatize(" running"), "run");
    }

    #[test]
    fn run_is_fixed() {
        assert_eq!(lemmatize("run"), "run");
    }

    #[test]
    fn ies_rule() {
        assert_eq!(lemmatize("stories"), "story");
        assert_eq!(lemmatize("ties"), "tie");
    }

    #[test]
    fn guarded_rules() {
        assert_eq!(lemmatize("boxes"), "box");
        assert_eq!(lemmatize("watches"), "watch");
        assert_eq!(lemmatize("cats"), "cat");
        assert_eq!(lemmatize("glass"), "glass");
        assert_eq!(lemmatize("bus"), "bus");
        assert_eq!(lemmatize("is"), "is");
        assert_eq!(lemmatize("sing"), "sing");
        assert_eq!(lemmatize("thing"), "thing");
        assert_eq!(lemmatize("falling"), "fall");
        assert_eq!(lemmatize("stopped"), "stop");
        assert_eq!(lemmatize("need"), "need");
        assert_eq!(lemmatize("ĠThe"), "the");
    }

    #[test]
    fn inflections_collapse() {
        let forms = ["run", "runs", "running"];
        let lemmas: std::collections::BTreeSet<_> = forms.iter().map(|f| lemmatize(f)).collect();
        assert_eq!(lemmas.len(), 1);
    }

    proptest! {
        #[test]
        fn idempotent(s in "[ A-Za-z]{0,16}") {
            let once = lemmatize(&s);
            prop_assert_eq!(lemmatize(&once), once);
        }
    }
}
