//! Imprecision simulation: replacing strings or pieces of strings by wildcards.

use std::collections::BTreeSet;

use rand::Rng;

use super::config::{FieldImprecision, ImprecisionConfig};
use crate::icc::{AbstractFilter, AbstractIntent};
use crate::pattern::{PatternString, Segment};

#[derive(Clone, Copy)]
enum Unit {
    Char(char),
    Star,
}

fn units(p: &PatternString) -> Vec<Unit> {
    let mut out = Vec::new();
    for seg in p.segments() {
        match seg {
            Segment::Literal(t) => out.extend(t.chars().map(Unit::Char)),
            Segment::Wildcard => out.push(Unit::Star),
        }
    }
    out
}

fn from_units(units: &[Unit]) -> PatternString {
    let segments = units
        .iter()
        .map(|u| match u {
            Unit::Char(c) => Segment::Literal(c.to_string()),
            Unit::Star => Segment::Wildcard,
        })
        .collect();
    PatternString::from_segments(segments).expect("characters come from a valid pattern")
}

/// Replaces `len` symbols starting at `start` by one wildcard. The result's
/// language contains the input's.
pub fn punch_hole(p: &PatternString, start: usize, len: usize) -> PatternString {
    let mut u = units(p);
    let end = (start + len).min(u.len());
    let start = start.min(end);
    u.splice(start..end, [Unit::Star]);
    from_units(&u)
}

/// Weakens one string: fully with probability `field.full`, partially with
/// probability `field.partial`, otherwise unchanged.
pub fn weaken_pattern<R: Rng>(
    p: &PatternString,
    field: FieldImprecision,
    hole_min: usize,
    hole_max: usize,
    rng: &mut R,
) -> PatternString {
    let roll: f64 = rng.gen();
    if roll < field.full {
        return PatternString::any();
    }
    if roll >= field.full + field.partial {
        return p.clone();
    }
    partial_hole(p, hole_min, hole_max, rng)
}

/// Replaces a random piece of at most half the string by a wildcard, so some
/// text always stays visible. Strings of one symbol become `(.*)`.
fn partial_hole<R: Rng>(
    p: &PatternString,
    hole_min: usize,
    hole_max: usize,
    rng: &mut R,
) -> PatternString {
    let n = units(p).len();
    if n <= 1 {
        return PatternString::any();
    }
    let cap = (n / 2).max(1);
    let len = rng.gen_range(hole_min.min(cap)..=hole_max.min(cap));
    let start = rng.gen_range(0..=n - len);
    punch_hole(p, start, len)
}

/// Weakens one uniformly chosen member of the set: fully with probability
/// `field.full`, partially with probability `field.partial`. A weakened form that
/// collides with another member is dropped, so the set keeps its size.
fn weaken_set<R: Rng>(
    set: &BTreeSet<PatternString>,
    field: FieldImprecision,
    cfg: &ImprecisionConfig,
    rng: &mut R,
) -> BTreeSet<PatternString> {
    let roll: f64 = rng.gen();
    if set.is_empty() || roll >= field.full + field.partial {
        return set.clone();
    }
    let members: Vec<&PatternString> = set.iter().collect();
    let target = members[rng.gen_range(0..members.len())];
    let weak = if roll < field.full {
        PatternString::any()
    } else {
        partial_hole(target, cfg.hole_min, cfg.hole_max, rng)
    };
    if set.contains(&weak) {
        return set.clone();
    }
    let mut out = set.clone();
    out.remove(target);
    out.insert(weak);
    out
}

pub fn weaken_intent<R: Rng>(
    intent: &AbstractIntent,
    cfg: &ImprecisionConfig,
    rng: &mut R,
) -> AbstractIntent {
    AbstractIntent {
        action: intent
            .action
            .as_ref()
            .map(|a| weaken_pattern(a, cfg.intent_action, cfg.hole_min, cfg.hole_max, rng)),
        categories: weaken_set(&intent.categories, cfg.intent_categories, cfg, rng),
    }
}

pub fn weaken_filter<R: Rng>(
    filter: &AbstractFilter,
    cfg: &ImprecisionConfig,
    rng: &mut R,
) -> AbstractFilter {
    AbstractFilter {
        actions: weaken_set(&filter.actions, cfg.filter_actions, cfg, rng),
        categories: weaken_set(&filter.categories, cfg.filter_categories, cfg, rng),
    }
}
