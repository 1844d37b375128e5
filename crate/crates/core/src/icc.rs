//! Concrete and abstract intents and filters, plus concrete intent resolution.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pattern::{enumerate_pattern, BudgetExceeded, PatternError, PatternString};

/// Category every intent carries when created without explicit categories.
pub const DEFAULT_CATEGORY: &str = "DEFAULT";

/// Outcome of abstract matching: must-not (0), must (1) or may (top).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TriLabel {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "may")]
    Top,
}

impl TriLabel {
    /// Kleene conjunction: 0 absorbs, 1 is neutral.
    pub fn and(self, other: TriLabel) -> TriLabel {
        match (self, other) {
            (TriLabel::Zero, _) | (_, TriLabel::Zero) => TriLabel::Zero,
            (TriLabel::One, TriLabel::One) => TriLabel::One,
            _ => TriLabel::Top,
        }
    }

    pub fn is_must(self) -> bool {
        self != TriLabel::Top
    }

    /// The definite truth value of a must label.
    pub fn as_bool(self) -> Option<bool> {
        match self {
            TriLabel::Zero => Some(false),
            TriLabel::One => Some(true),
            TriLabel::Top => None,
        }
    }
}

impl From<bool> for TriLabel {
    fn from(b: bool) -> Self {
        if b {
            TriLabel::One
        } else {
            TriLabel::Zero
        }
    }
}

impl fmt::Display for TriLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriLabel::Zero => "0",
            TriLabel::One => "1",
            TriLabel::Top => "may",
        })
    }
}

/// A runtime intent. `action == None` is the undefined value ω, distinct from `""`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConcreteIntent {
    pub action: Option<String>,
    pub categories: BTreeSet<String>,
}

impl ConcreteIntent {
    pub fn new<I, S>(action: Option<&str>, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            action: action.map(str::to_owned),
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    /// An intent created without categories gets `{"DEFAULT"}`.
    pub fn with_default_categories(action: Option<&str>) -> Self {
        Self::new(action, [DEFAULT_CATEGORY])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConcreteFilter {
    pub actions: BTreeSet<String>,
    pub categories: BTreeSet<String>,
}

impl ConcreteFilter {
    pub fn new<A, C, S, T>(actions: A, categories: C) -> Self
    where
        A: IntoIterator<Item = S>,
        C: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        Self {
            actions: actions.into_iter().map(Into::into).collect(),
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }
}

/// Action test: ω passes against any non-empty action set, otherwise membership.
pub fn action_test(action: Option<&str>, actions: &BTreeSet<String>) -> bool {
    match action {
        None => !actions.is_empty(),
        Some(a) => actions.contains(a),
    }
}

/// Category test: every intent category is declared by the filter.
pub fn category_test(intent_cats: &BTreeSet<String>, filter_cats: &BTreeSet<String>) -> bool {
    intent_cats.is_subset(filter_cats)
}

/// Concrete intent resolution restricted to actions and categories.
pub fn concrete_match(intent: &ConcreteIntent, filter: &ConcreteFilter) -> bool {
    action_test(intent.action.as_deref(), &filter.actions)
        && category_test(&intent.categories, &filter.categories)
}

/// Static over-approximation of an intent: a pattern-valued action (or ω) and
/// a set of category patterns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AbstractIntent {
    pub action: Option<PatternString>,
    pub categories: BTreeSet<PatternString>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AbstractFilter {
    pub actions: BTreeSet<PatternString>,
    pub categories: BTreeSet<PatternString>,
}

fn parse_all<'a, I>(items: I) -> Result<BTreeSet<PatternString>, PatternError>
where
    I: IntoIterator<Item = &'a str>,
{
    items
        .into_iter()
        .map(crate::pattern::parse_pattern)
        .collect()
}

fn sorted_renderings(set: &BTreeSet<PatternString>) -> Vec<String> {
    let mut out: Vec<String> = set.iter().map(PatternString::render).collect();
    out.sort();
    out
}

impl AbstractIntent {
    /// Parses surface syntax for each field; `None` is ω.
    pub fn parse<'a, I>(action: Option<&str>, categories: I) -> Result<Self, PatternError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        Ok(Self {
            action: action.map(crate::pattern::parse_pattern).transpose()?,
            categories: parse_all(categories)?,
        })
    }

    pub fn from_concrete(intent: &ConcreteIntent) -> Result<Self, PatternError> {
        Ok(Self {
            action: intent
                .action
                .as_deref()
                .map(PatternString::literal)
                .transpose()?,
            categories: intent
                .categories
                .iter()
                .map(|c| PatternString::literal(c))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn is_precise(&self) -> bool {
        self.action.as_ref().is_none_or(PatternString::is_precise)
            && self.categories.iter().all(PatternString::is_precise)
    }

    /// The single concrete intent denoted by a precise value.
    pub fn to_concrete(&self) -> Option<ConcreteIntent> {
        let action = match &self.action {
            None => None,
            Some(p) => Some(p.as_precise()?),
        };
        let categories = self
            .categories
            .iter()
            .map(PatternString::as_precise)
            .collect::<Option<_>>()?;
        Some(ConcreteIntent { action, categories })
    }

    /// Flat human-readable form `a=<act>;c=<cat1>,<cat2>` with ω shown as `null`.
    pub fn render(&self) -> String {
        let act = self
            .action
            .as_ref()
            .map_or_else(|| "null".to_owned(), PatternString::render);
        format!(
            "a={act};c={}",
            sorted_renderings(&self.categories).join(",")
        )
    }

    pub fn enumerate_concretizations(
        &self,
        alphabet: &[char],
        max_fill: usize,
        budget: usize,
    ) -> Result<BTreeSet<ConcreteIntent>, BudgetExceeded> {
        let actions: Vec<Option<String>> = match &self.action {
            None => vec![None],
            Some(p) => enumerate_pattern(p, alphabet, max_fill, budget)?
                .into_iter()
                .map(Some)
                .collect(),
        };
        let cat_sets = enumerate_set(&self.categories, alphabet, max_fill, budget)?;
        if actions.len().saturating_mul(cat_sets.len()) > budget {
            return Err(BudgetExceeded { budget });
        }
        let mut out = BTreeSet::new();
        for action in &actions {
            for cats in &cat_sets {
                out.insert(ConcreteIntent {
                    action: action.clone(),
                    categories: cats.clone(),
                });
            }
        }
        Ok(out)
    }
}

impl fmt::Display for AbstractIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl AbstractFilter {
    pub fn parse<'a, A, C>(actions: A, categories: C) -> Result<Self, PatternError>
    where
        A: IntoIterator<Item = &'a str>,
        C: IntoIterator<Item = &'a str>,
    {
        Ok(Self {
            actions: parse_all(actions)?,
            categories: parse_all(categories)?,
        })
    }

    pub fn from_concrete(filter: &ConcreteFilter) -> Result<Self, PatternError> {
        let lit = |set: &BTreeSet<String>| {
            set.iter()
                .map(|s| PatternString::literal(s))
                .collect::<Result<BTreeSet<_>, _>>()
        };
        Ok(Self {
            actions: lit(&filter.actions)?,
            categories: lit(&filter.categories)?,
        })
    }

    pub fn is_precise(&self) -> bool {
        self.actions.iter().all(PatternString::is_precise)
            && self.categories.iter().all(PatternString::is_precise)
    }

    pub fn to_concrete(&self) -> Option<ConcreteFilter> {
        Some(ConcreteFilter {
            actions: self
                .actions
                .iter()
                .map(PatternString::as_precise)
                .collect::<Option<_>>()?,
            categories: self
                .categories
                .iter()
                .map(PatternString::as_precise)
                .collect::<Option<_>>()?,
        })
    }

    pub fn render(&self) -> String {
        format!(
            "a={};c={}",
            sorted_renderings(&self.actions).join(","),
            sorted_renderings(&self.categories).join(",")
        )
    }

    pub fn enumerate_concretizations(
        &self,
        alphabet: &[char],
        max_fill: usize,
        budget: usize,
    ) -> Result<BTreeSet<ConcreteFilter>, BudgetExceeded> {
        let acts = enumerate_set(&self.actions, alphabet, max_fill, budget)?;
        let cats = enumerate_set(&self.categories, alphabet, max_fill, budget)?;
        if acts.len().saturating_mul(cats.len()) > budget {
            return Err(BudgetExceeded { budget });
        }
        let mut out = BTreeSet::new();
        for a in &acts {
            for c in &cats {
                out.insert(ConcreteFilter {
                    actions: a.clone(),
                    categories: c.clone(),
                });
            }
        }
        Ok(out)
    }
}

impl fmt::Display for AbstractFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A set of patterns denotes every set obtained by picking one member per pattern.
fn enumerate_set(
    patterns: &BTreeSet<PatternString>,
    alphabet: &[char],
    max_fill: usize,
    budget: usize,
) -> Result<BTreeSet<BTreeSet<String>>, BudgetExceeded> {
    let mut acc: BTreeSet<BTreeSet<String>> = BTreeSet::from([BTreeSet::new()]);
    for p in patterns {
        let members = enumerate_pattern(p, alphabet, max_fill, budget)?;
        if acc.len().saturating_mul(members.len()) > budget {
            return Err(BudgetExceeded { budget });
        }
        acc = acc
            .iter()
            .flat_map(|partial| {
                members.iter().map(move |m| {
                    let mut next = partial.clone();
                    next.insert(m.clone());
                    next
                })
            })
            .collect();
    }
    Ok(acc)
}
