//! Tri-valued abstract matching, its brute-force oracle, and the quantitative
//! composition with a learned link model.

use std::collections::BTreeSet;

use crate::icc::{
    concrete_match, AbstractFilter, AbstractIntent, ConcreteFilter, ConcreteIntent, TriLabel,
};
use crate::pattern::{overlap_witness, BudgetExceeded, PatternString};

/// Matcher verdict; a present witness is a concretization pair that matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchVerdict {
    pub tri: TriLabel,
    pub witness: Option<(ConcreteIntent, ConcreteFilter)>,
}

fn action_verdict(action: Option<&PatternString>, actions: &BTreeSet<PatternString>) -> TriLabel {
    let Some(p) = action else {
        return TriLabel::from(!actions.is_empty());
    };
    if p.is_precise() && actions.contains(p) {
        return TriLabel::One;
    }
    if actions.iter().all(|q| !p.overlaps(q)) {
        TriLabel::Zero
    } else {
        TriLabel::Top
    }
}

fn category_verdict(
    intent_cats: &BTreeSet<PatternString>,
    filter_cats: &BTreeSet<PatternString>,
) -> TriLabel {
    if intent_cats
        .iter()
        .any(|c| filter_cats.iter().all(|d| !c.overlaps(d)))
    {
        return TriLabel::Zero;
    }
    if intent_cats
        .iter()
        .all(|c| c.is_precise() && filter_cats.contains(c))
    {
        return TriLabel::One;
    }
    TriLabel::Top
}

/// Sound tri-valued matching. `One` means every concretization pair matches,
/// `Zero` means none does; anything else is `Top`.
pub fn abstract_match(intent: &AbstractIntent, filter: &AbstractFilter) -> MatchVerdict {
    let tri = action_verdict(intent.action.as_ref(), &filter.actions)
        .and(category_verdict(&intent.categories, &filter.categories));
    let witness = match tri {
        TriLabel::Zero => None,
        _ => positive_witness(intent, filter),
    };
    debug_assert!(tri != TriLabel::One || witness.is_some());
    MatchVerdict { tri, witness }
}

/// Greedy search for a matching concretization pair. Filter patterns not needed by
/// the witness are filled with their shortest member.
fn positive_witness(
    intent: &AbstractIntent,
    filter: &AbstractFilter,
) -> Option<(ConcreteIntent, ConcreteFilter)> {
    let fill = |set: &BTreeSet<PatternString>| -> Vec<(PatternString, Option<String>)> {
        set.iter().map(|p| (p.clone(), None)).collect()
    };
    let mut acts = fill(&filter.actions);
    let mut cats = fill(&filter.categories);

    let action = match &intent.action {
        None if acts.is_empty() => return None,
        None => None,
        Some(p) => {
            let (slot, w) = acts
                .iter()
                .enumerate()
                .find_map(|(k, (q, _))| overlap_witness(p, q).map(|w| (k, w)))?;
            acts[slot].1 = Some(w.clone());
            Some(w)
        }
    };

    let mut intent_cats = BTreeSet::new();
    for c in &intent.categories {
        let reused = cats
            .iter()
            .find_map(|(_, s)| s.as_ref().filter(|s| c.contains(s)).cloned());
        let chosen = match reused {
            Some(s) => s,
            None => {
                let (slot, w) = cats.iter().enumerate().find_map(|(k, (d, s))| {
                    if s.is_some() {
                        return None;
                    }
                    overlap_witness(c, d).map(|w| (k, w))
                })?;
                cats[slot].1 = Some(w.clone());
                w
            }
        };
        intent_cats.insert(chosen);
    }

    let concretize = |slots: Vec<(PatternString, Option<String>)>| -> BTreeSet<String> {
        slots
            .into_iter()
            .map(|(p, s)| s.unwrap_or_else(|| p.literal_text()))
            .collect()
    };
    let ci = ConcreteIntent {
        action,
        categories: intent_cats,
    };
    let cf = ConcreteFilter {
        actions: concretize(acts),
        categories: concretize(cats),
    };
    concrete_match(&ci, &cf).then_some((ci, cf))
}

/// Oracle: enumerate all bounded concretization pairs and apply concrete matching.
pub fn brute_force_match(
    intent: &AbstractIntent,
    filter: &AbstractFilter,
    alphabet: &[char],
    max_fill: usize,
    budget: usize,
) -> Result<TriLabel, BudgetExceeded> {
    let intents = intent.enumerate_concretizations(alphabet, max_fill, budget)?;
    let filters = filter.enumerate_concretizations(alphabet, max_fill, budget)?;
    if intents.len().saturating_mul(filters.len()) > budget {
        return Err(BudgetExceeded { budget });
    }
    let (mut any_match, mut any_miss) = (false, false);
    for i in &intents {
        for f in &filters {
            if concrete_match(i, f) {
                any_match = true;
            } else {
                any_miss = true;
            }
            if any_match && any_miss {
                return Ok(TriLabel::Top);
            }
        }
    }
    Ok(match (any_match, any_miss) {
        (true, false) => TriLabel::One,
        (false, _) => TriLabel::Zero,
        (true, true) => TriLabel::Top,
    })
}

/// Anything that estimates the probability that a may link is real.
pub trait LinkProbability {
    type Error;

    fn link_probability(
        &self,
        intent: &AbstractIntent,
        filter: &AbstractFilter,
    ) -> Result<f64, Self::Error>;
}

/// Must verdicts are returned as exact 0/1; may links defer to the model.
pub fn qmatch<M: LinkProbability>(
    intent: &AbstractIntent,
    filter: &AbstractFilter,
    model: &M,
) -> Result<f64, M::Error> {
    match abstract_match(intent, filter).tri {
        TriLabel::Zero => Ok(0.0),
        TriLabel::One => Ok(1.0),
        TriLabel::Top => model.link_probability(intent, filter),
    }
}
