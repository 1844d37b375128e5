//! Flat token rendering of abstract values over a fixed 64-id vocabulary.
//!
//! A value renders as `a=<action>;c=<cat>,<cat>` (filters list all actions the
//! same way). Each character maps to one id, except that a whole wildcard is a
//! single [`WILDCARD`] id and ω is a single [`NULL`] id.

use std::borrow::Cow;
use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use crate::icc::{AbstractFilter, AbstractIntent};
use crate::pattern::{PatternString, Segment, WILDCARD_MARKER};

pub const VOCAB_SIZE: usize = 64;
pub const MAX_LEN: usize = 128;

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const WILDCARD: usize = 2;
pub const NULL: usize = 3;
pub const FIELD_SEP: usize = 4;
pub const ITEM_SEP: usize = 5;

const LETTERS: usize = 6;
const DIGITS: usize = 32;
const PUNCT: [char; 6] = ['.', '_', '-', '/', ':', '='];
const PUNCT_BASE: usize = 42;
const RESERVED_BASE: usize = 48;

/// Vocabulary id of a literal character. Anything outside `a-z 0-9 . _ - / : =`
/// (after ASCII case folding) is [`OOV`].
pub fn char_id(c: char) -> usize {
    let c = c.to_ascii_lowercase();
    match c {
        'a'..='z' => LETTERS + (c as usize - 'a' as usize),
        '0'..='9' => DIGITS + (c as usize - '0' as usize),
        _ => PUNCT
            .iter()
            .position(|&p| p == c)
            .map_or(OOV, |k| PUNCT_BASE + k),
    }
}

/// Display text of an id; separators render as `;` and `,`.
pub fn token_text(id: usize) -> Cow<'static, str> {
    match id {
        PAD => Cow::Borrowed(""),
        OOV => Cow::Borrowed("?"),
        WILDCARD => Cow::Borrowed(WILDCARD_MARKER),
        NULL => Cow::Borrowed("null"),
        FIELD_SEP => Cow::Borrowed(";"),
        ITEM_SEP => Cow::Borrowed(","),
        LETTERS..DIGITS => Cow::Owned(char::from(b'a' + (id - LETTERS) as u8).to_string()),
        DIGITS..PUNCT_BASE => Cow::Owned(char::from(b'0' + (id - DIGITS) as u8).to_string()),
        PUNCT_BASE..RESERVED_BASE => Cow::Owned(PUNCT[id - PUNCT_BASE].to_string()),
        _ => Cow::Owned(format!("<r{}>", id - RESERVED_BASE)),
    }
}

/// Concatenated display text of a token sequence (PAD omitted).
pub fn tokens_text(ids: &[usize]) -> String {
    ids.iter().map(|&id| token_text(id)).collect()
}

/// Tokens of a single pattern, no truncation.
pub fn pattern_tokens(p: &PatternString) -> Vec<usize> {
    let mut out = Vec::new();
    push_pattern(p, &mut out);
    out
}

fn push_pattern(p: &PatternString, out: &mut Vec<usize>) {
    for seg in p.segments() {
        match seg {
            Segment::Literal(t) => out.extend(t.chars().map(char_id)),
            Segment::Wildcard => out.push(WILDCARD),
        }
    }
}

fn push_text(text: &str, out: &mut Vec<usize>) {
    out.extend(text.chars().map(char_id));
}

/// Set members in lexicographic order of their surface rendering.
fn sorted(set: &BTreeSet<PatternString>) -> Vec<&PatternString> {
    let mut items: Vec<&PatternString> = set.iter().collect();
    items.sort_by_cached_key(|p| p.render());
    items
}

fn push_list(set: &BTreeSet<PatternString>, out: &mut Vec<usize>) {
    for (k, p) in sorted(set).into_iter().enumerate() {
        if k > 0 {
            out.push(ITEM_SEP);
        }
        push_pattern(p, out);
    }
}

/// Unpadded token sequence of an intent, truncated to [`MAX_LEN`].
pub fn intent_tokens(intent: &AbstractIntent) -> Vec<usize> {
    let mut out = Vec::new();
    push_text("a=", &mut out);
    match &intent.action {
        Some(p) => push_pattern(p, &mut out),
        None => out.push(NULL),
    }
    out.push(FIELD_SEP);
    push_text("c=", &mut out);
    push_list(&intent.categories, &mut out);
    out.truncate(MAX_LEN);
    out
}

/// Unpadded token sequence of a filter, truncated to [`MAX_LEN`].
pub fn filter_tokens(filter: &AbstractFilter) -> Vec<usize> {
    let mut out = Vec::new();
    push_text("a=", &mut out);
    push_list(&filter.actions, &mut out);
    out.push(FIELD_SEP);
    push_text("c=", &mut out);
    push_list(&filter.categories, &mut out);
    out.truncate(MAX_LEN);
    out
}

/// Right-pads (or truncates) to exactly `len` ids.
pub fn pad_to(ids: &[usize], len: usize) -> Vec<usize> {
    let mut out: Vec<usize> = ids.iter().copied().take(len).collect();
    out.resize(len, PAD);
    out
}

/// Number of ids before the trailing padding.
pub fn unpadded_len(ids: &[usize]) -> usize {
    ids.iter().rposition(|&id| id != PAD).map_or(0, |k| k + 1)
}

/// Fixed-length ids of an intent.
pub fn render_intent_tokens(intent: &AbstractIntent) -> Vec<usize> {
    pad_to(&intent_tokens(intent), MAX_LEN)
}

/// Fixed-length ids of a filter.
pub fn render_filter_tokens(filter: &AbstractFilter) -> Vec<usize> {
    pad_to(&filter_tokens(filter), MAX_LEN)
}

/// Hex SHA-256 over the id → symbol table and the length limit. Checkpoints
/// record it so a model is never fed ids from a different vocabulary.
pub fn vocab_hash() -> String {
    let mut hasher = Sha256::new();
    for id in 0..VOCAB_SIZE {
        hasher.update(format!("{id}:{}\n", token_text(id)).as_bytes());
    }
    hasher.update(format!("max_len={MAX_LEN}").as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intent(act: Option<&str>, cats: &[&str]) -> AbstractIntent {
        AbstractIntent::parse(act, cats.iter().copied()).unwrap()
    }

    #[test]
    fn layout() {
        assert_eq!(char_id('a'), 6);
        assert_eq!(char_id('Z'), 31);
        assert_eq!(char_id('0'), 32);
        assert_eq!(char_id('9'), 41);
        assert_eq!(char_id('.'), 42);
        assert_eq!(char_id('='), 47);
        assert_eq!(char_id(' '), OOV);
        assert_eq!(char_id(','), OOV);
        for id in 0..VOCAB_SIZE {
            let text = token_text(id);
            if (6..48).contains(&id) {
                assert_eq!(char_id(text.chars().next().unwrap()), id);
            }
        }
    }

    #[test]
    fn precise_intent_renders_case_folded() {
        let ids = render_intent_tokens(&intent(Some("SEND"), &["DEFAULT"]));
        assert_eq!(ids.len(), MAX_LEN);
        let len = unpadded_len(&ids);
        assert_eq!(tokens_text(&ids[..len]), "a=send;c=default");
        assert!(ids[len..].iter().all(|&id| id == PAD));
    }

    #[test]
    fn wildcard_is_one_token() {
        let ids = intent_tokens(&intent(Some("(.*)SEND"), &[]));
        assert_eq!(ids[2], WILDCARD);
        assert_eq!(tokens_text(&ids[3..7]), "send");
        assert_eq!(ids[7], FIELD_SEP);
    }

    #[test]
    fn omega_is_one_token() {
        let ids = intent_tokens(&intent(None, &["b", "a"]));
        assert_eq!(ids[2], NULL);
        assert_eq!(ids[3], FIELD_SEP);
        assert_eq!(tokens_text(&ids), "a=null;c=a,b");
    }

    #[test]
    fn filter_lists_sorted() {
        let f = AbstractFilter::parse(["view", "edit"], ["x(.*)"]).unwrap();
        let ids = filter_tokens(&f);
        assert_eq!(tokens_text(&ids), "a=edit,view;c=x(.*)");
        assert_eq!(ids.iter().filter(|&&id| id == ITEM_SEP).count(), 1);
    }

    #[test]
    fn truncation() {
        let long = "a".repeat(300);
        let ids = intent_tokens(&intent(Some(&long), &[]));
        assert_eq!(ids.len(), MAX_LEN);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(vocab_hash(), vocab_hash());
        assert_eq!(vocab_hash().len(), 64);
    }
}
