//! Pattern-valued strings: literal text interleaved with `(.*)` wildcards.
//!
//! A [`PatternString`] denotes a (possibly infinite) language of strings over the
//! surface alphabet. Wildcards match any string, including the empty one. Because
//! the class is restricted to literal/wildcard globs, membership, intersection
//! emptiness and bounded enumeration are all decidable with small dynamic programs.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The textual wildcard marker.
pub const WILDCARD_MARKER: &str = "(.*)";

/// Punctuation accepted in literal text besides `. _ - / :`.
const EXTRA_PUNCT: &[char] = &[
    ' ', '"', ',', '{', '}', '[', ']', '=', '+', '#', '@', '!', '?', '&', '%', '$', '~',
];

/// Returns true if `c` belongs to the 58-symbol surface alphabet (after case folding).
pub fn is_surface_char(c: char) -> bool {
    c.is_ascii_lowercase()
        || c.is_ascii_digit()
        || matches!(c, '.' | '_' | '-' | '/' | ':')
        || EXTRA_PUNCT.contains(&c)
}

/// All symbols of the surface alphabet, in a fixed order.
pub fn surface_alphabet() -> Vec<char> {
    let mut out: Vec<char> = ('a'..='z').chain('0'..='9').collect();
    out.extend(['.', '_', '-', '/', ':']);
    out.extend_from_slice(EXTRA_PUNCT);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("invalid character {ch:?} at byte offset {offset}")]
    InvalidCharacter { ch: char, offset: usize },
    #[error("literal segment contains the wildcard marker")]
    MarkerInLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    Literal(String),
    Wildcard,
}

/// A canonical glob: no empty literals, no two adjacent wildcards, no two adjacent literals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PatternString {
    segments: Vec<Segment>,
}

impl PatternString {
    /// The precise pattern whose language is `{text}`. `text` is case-folded and validated.
    pub fn literal(text: &str) -> Result<Self, PatternError> {
        let folded = fold_and_check(text, 0)?;
        Ok(Self::from_segments_unchecked(if folded.is_empty() {
            vec![]
        } else {
            vec![Segment::Literal(folded)]
        }))
    }

    /// The fully imprecise pattern `(.*)`.
    pub fn any() -> Self {
        Self {
            segments: vec![Segment::Wildcard],
        }
    }

    /// Builds a pattern from arbitrary segments, canonicalizing adjacency.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self, PatternError> {
        for seg in &segments {
            if let Segment::Literal(text) = seg {
                if text.contains(WILDCARD_MARKER) {
                    return Err(PatternError::MarkerInLiteral);
                }
                fold_and_check(text, 0)?;
            }
        }
        let segments = segments
            .into_iter()
            .map(|s| match s {
                Segment::Literal(t) => Segment::Literal(t.to_ascii_lowercase()),
                w => w,
            })
            .collect();
        Ok(Self::from_segments_unchecked(segments))
    }

    fn from_segments_unchecked(segments: Vec<Segment>) -> Self {
        let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
        for seg in segments {
            match (out.last_mut(), seg) {
                (_, Segment::Literal(t)) if t.is_empty() => {}
                (Some(Segment::Wildcard), Segment::Wildcard) => {}
                (Some(Segment::Literal(prev)), Segment::Literal(t)) => prev.push_str(&t),
                (_, seg) => out.push(seg),
            }
        }
        Self { segments: out }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn wildcard_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Wildcard))
            .count()
    }

    /// A pattern is precise when it contains no wildcard.
    pub fn is_precise(&self) -> bool {
        self.wildcard_count() == 0
    }

    /// The literal text of a precise pattern.
    pub fn as_precise(&self) -> Option<String> {
        self.is_precise().then(|| self.literal_text())
    }

    /// Concatenation of all literal segments (wildcards dropped); the shortest member.
    pub fn literal_text(&self) -> String {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Literal(t) => Some(t.as_str()),
                Segment::Wildcard => None,
            })
            .collect()
    }

    /// Renders back to the surface syntax.
    pub fn render(&self) -> String {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Literal(t) => t.as_str(),
                Segment::Wildcard => WILDCARD_MARKER,
            })
            .collect()
    }

    /// Language membership.
    pub fn contains(&self, s: &str) -> bool {
        pattern_contains(self, s)
    }

    /// Non-emptiness of the language intersection.
    pub fn overlaps(&self, other: &PatternString) -> bool {
        pattern_overlap(self, other)
    }

    fn tokens(&self) -> Vec<GlobToken> {
        let mut out = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(t) => out.extend(t.chars().map(GlobToken::Char)),
                Segment::Wildcard => out.push(GlobToken::Star),
            }
        }
        out
    }
}

impl fmt::Display for PatternString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for PatternString {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pattern(s)
    }
}

impl Serialize for PatternString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for PatternString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_pattern(&text).map_err(serde::de::Error::custom)
    }
}

fn fold_and_check(text: &str, base: usize) -> Result<String, PatternError> {
    let mut out = String::with_capacity(text.len());
    for (offset, ch) in text.char_indices() {
        let folded = ch.to_ascii_lowercase();
        if !is_surface_char(folded) {
            return Err(PatternError::InvalidCharacter {
                ch,
                offset: base + offset,
            });
        }
        out.push(folded);
    }
    Ok(out)
}

/// Parses the surface syntax. Every occurrence of `(.*)` is a wildcard; everything
/// else must be a surface-alphabet character. Uppercase letters are folded.
pub fn parse_pattern(text: &str) -> Result<PatternString, PatternError> {
    let mut segments = Vec::new();
    let mut rest = text;
    let mut base = 0;
    while let Some(idx) = rest.find(WILDCARD_MARKER) {
        segments.push(Segment::Literal(fold_and_check(&rest[..idx], base)?));
        segments.push(Segment::Wildcard);
        base += idx + WILDCARD_MARKER.len();
        rest = &rest[idx + WILDCARD_MARKER.len()..];
    }
    segments.push(Segment::Literal(fold_and_check(rest, base)?));
    Ok(PatternString::from_segments_unchecked(segments))
}

/// Glob membership: literal prefix and suffix anchored, middle literals matched greedily.
pub fn pattern_contains(p: &PatternString, s: &str) -> bool {
    let segs = p.segments();
    let last = segs.len().saturating_sub(1);
    let mut rest = s;
    for (k, seg) in segs.iter().enumerate() {
        match seg {
            Segment::Wildcard if k == last => return true,
            Segment::Wildcard => {}
            Segment::Literal(t) if k == 0 => match rest.strip_prefix(t.as_str()) {
                Some(r) => rest = r,
                None => return false,
            },
            Segment::Literal(t) if k == last => return rest.ends_with(t.as_str()),
            Segment::Literal(t) => match rest.find(t.as_str()) {
                Some(i) => rest = &rest[i + t.len()..],
                None => return false,
            },
        }
    }
    rest.is_empty()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GlobToken {
    Char(char),
    Star,
}

/// Language-intersection emptiness by dynamic programming over token positions.
pub fn pattern_overlap(p: &PatternString, q: &PatternString) -> bool {
    overlap_witness(p, q).is_some()
}

/// A string in both languages, if one exists.
pub fn overlap_witness(p: &PatternString, q: &PatternString) -> Option<String> {
    let a = p.tokens();
    let b = q.tokens();
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    // reach[i][j]: L(a[i..]) and L(b[j..]) share a string.
    let mut reach = vec![false; (n + 1) * width];
    reach[n * width + m] = true;
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            if i == n && j == m {
                continue;
            }
            let ok = match (a.get(i), b.get(j)) {
                (Some(GlobToken::Star), _) => {
                    reach[(i + 1) * width + j] || (j < m && reach[i * width + j + 1])
                }
                (_, Some(GlobToken::Star)) => {
                    reach[i * width + j + 1] || (i < n && reach[(i + 1) * width + j])
                }
                (Some(GlobToken::Char(x)), Some(GlobToken::Char(y))) => {
                    x == y && reach[(i + 1) * width + j + 1]
                }
                _ => false,
            };
            reach[i * width + j] = ok;
        }
    }
    if !reach[0] {
        return None;
    }
    let (mut i, mut j) = (0, 0);
    let mut witness = String::new();
    while i < n || j < m {
        match (a.get(i), b.get(j)) {
            (Some(GlobToken::Star), bj) => {
                if reach[(i + 1) * width + j] {
                    i += 1;
                } else {
                    if let Some(GlobToken::Char(c)) = bj {
                        witness.push(*c);
                    }
                    j += 1;
                }
            }
            (ai, Some(GlobToken::Star)) => {
                if reach[i * width + j + 1] {
                    j += 1;
                } else {
                    if let Some(GlobToken::Char(c)) = ai {
                        witness.push(*c);
                    }
                    i += 1;
                }
            }
            (Some(GlobToken::Char(c)), Some(_)) => {
                witness.push(*c);
                i += 1;
                j += 1;
            }
            _ => unreachable!("reachable state without successor"),
        }
    }
    Some(witness)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("enumeration would exceed the budget of {budget} values")]
pub struct BudgetExceeded {
    pub budget: usize,
}

/// All members obtained by filling each wildcard with a string of length at most
/// `max_fill` over `alphabet`.
pub fn enumerate_pattern(
    p: &PatternString,
    alphabet: &[char],
    max_fill: usize,
    budget: usize,
) -> Result<BTreeSet<String>, BudgetExceeded> {
    let fills = enumerate_fills(alphabet, max_fill, budget)?;
    let mut partial: BTreeSet<String> = BTreeSet::from([String::new()]);
    for seg in p.segments() {
        partial = match seg {
            Segment::Literal(t) => partial.into_iter().map(|s| s + t).collect(),
            Segment::Wildcard => {
                if partial.len().saturating_mul(fills.len()) > budget {
                    return Err(BudgetExceeded { budget });
                }
                partial
                    .iter()
                    .flat_map(|s| fills.iter().map(move |f| format!("{s}{f}")))
                    .collect()
            }
        };
    }
    Ok(partial)
}

fn enumerate_fills(
    alphabet: &[char],
    max_fill: usize,
    budget: usize,
) -> Result<Vec<String>, BudgetExceeded> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_fill {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for s in &frontier {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        if out.len() > budget {
            return Err(BudgetExceeded { budget });
        }
        frontier = next;
    }
    Ok(out)
}
