//! Labeled links: pairs of weakened values labeled by the matcher, with the
//! ground truth of the precise originals kept alongside.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ImprecisionConfig, SampleConfig};
use super::weaken::{weaken_filter, weaken_intent};
use super::CorpusError;
use crate::icc::{concrete_match, AbstractFilter, AbstractIntent, TriLabel};
use crate::matcher::abstract_match;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledLink {
    pub intent: AbstractIntent,
    pub filter: AbstractFilter,
    pub observed: TriLabel,
    /// Whether the precise values behind `intent` and `filter` match.
    #[serde(with = "truth_bit")]
    pub truth: bool,
}

mod truth_bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            n => Err(D::Error::custom(format!("truth must be 0 or 1, got {n}"))),
        }
    }
}

impl LabeledLink {
    /// Training label: the matcher's verdict for must links, the hidden truth otherwise.
    pub fn label(&self) -> bool {
        self.observed.as_bool().unwrap_or(self.truth)
    }

    pub fn is_must(&self) -> bool {
        self.observed.is_must()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    /// Must links.
    pub train: Vec<LabeledLink>,
    /// May links.
    pub test: Vec<LabeledLink>,
}

/// Per-label targets for one split.
#[derive(Debug, Clone)]
struct Quota {
    total: usize,
    /// Target positives; `None` accepts either label until `total` is reached.
    pos: Option<usize>,
    taken: Vec<LabeledLink>,
    spare: Vec<LabeledLink>,
    per_intent: HashMap<(usize, bool), usize>,
}

impl Quota {
    fn new(total: usize, pos_frac: Option<f64>) -> Self {
        Self {
            total,
            pos: pos_frac.map(|f| (total as f64 * f).round() as usize),
            taken: Vec::new(),
            spare: Vec::new(),
            per_intent: HashMap::new(),
        }
    }

    fn full(&self) -> bool {
        self.taken.len() >= self.total
    }

    fn offer(&mut self, intent: usize, link: LabeledLink, cap: usize) {
        if self.full() {
            return;
        }
        let label = link.label();
        let count = self.per_intent.entry((intent, label)).or_default();
        if *count >= cap {
            return;
        }
        let room = match self.pos {
            None => true,
            Some(pos) => {
                let have = self.taken.iter().filter(|l| l.label() == label).count();
                have < if label { pos } else { self.total - pos }
            }
        };
        if room {
            *count += 1;
            self.taken.push(link);
        } else if self.spare.len() < self.total {
            *count += 1;
            self.spare.push(link);
        }
    }

    /// Tops up from links held back by the label targets.
    fn finish(mut self) -> Vec<LabeledLink> {
        let missing = self.total.saturating_sub(self.taken.len());
        let fill: Vec<LabeledLink> = self.spare.drain(..missing.min(self.spare.len())).collect();
        self.taken.extend(fill);
        self.taken
    }
}

fn candidate_filters(filters: &[AbstractFilter]) -> HashMap<String, Vec<usize>> {
    let mut index: HashMap<String, Vec<usize>> = HashMap::new();
    for (k, f) in filters.iter().enumerate() {
        for a in &f.actions {
            index.entry(a.render()).or_default().push(k);
        }
    }
    index
}

/// Pairs precise intents with precise filters, weakens both sides, labels the
/// weakened pair with the matcher and sorts it into the must (train) or may (test)
/// split under the sampling targets.
pub fn build_dataset(
    intents: &[AbstractIntent],
    filters: &[AbstractFilter],
    imprecision: &ImprecisionConfig,
    sample: &SampleConfig,
    seed: u64,
) -> Result<Dataset, CorpusError> {
    if intents.is_empty() || filters.is_empty() {
        return Err(CorpusError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let weak_intents: Vec<AbstractIntent> = intents
        .iter()
        .map(|i| weaken_intent(i, imprecision, &mut rng))
        .collect();
    let weak_filters: Vec<AbstractFilter> = filters
        .iter()
        .map(|f| weaken_filter(f, imprecision, &mut rng))
        .collect();
    let concrete_intents: Vec<_> = intents.iter().map(|i| i.to_concrete()).collect();
    let concrete_filters: Vec<_> = filters.iter().map(|f| f.to_concrete()).collect();
    let by_action = candidate_filters(filters);

    let mut train = Quota::new(sample.train, Some(sample.train_pos_frac));
    let mut test = Quota::new(sample.test, sample.test_pos_frac);
    let mut seen = HashSet::new();
    let budget = sample
        .draws_per_link
        .saturating_mul(sample.train + sample.test)
        .max(1000);
    let max_pairs = intents.len().saturating_mul(filters.len());

    for _ in 0..budget {
        if (train.full() && test.full()) || seen.len() >= max_pairs {
            break;
        }
        let i = rng.gen_range(0..intents.len());
        let compatible = intents[i]
            .action
            .as_ref()
            .and_then(|a| by_action.get(&a.render()))
            .filter(|_| rng.gen_bool(sample.compatible_rate));
        let f = match compatible {
            Some(list) => *list.choose(&mut rng).expect("index lists are nonempty"),
            None => rng.gen_range(0..filters.len()),
        };
        if !seen.insert((i, f)) {
            continue;
        }
        let (Some(ci), Some(cf)) = (&concrete_intents[i], &concrete_filters[f]) else {
            return Err(CorpusError::ImprecisePool);
        };
        let truth = concrete_match(ci, cf);
        let verdict = abstract_match(&weak_intents[i], &weak_filters[f]).tri;
        let link = LabeledLink {
            intent: weak_intents[i].clone(),
            filter: weak_filters[f].clone(),
            observed: verdict,
            truth,
        };
        debug_assert!(verdict.as_bool().is_none_or(|b| b == truth));
        if verdict.is_must() {
            train.offer(i, link, sample.per_intent_cap);
        } else {
            test.offer(i, link, sample.per_intent_cap);
        }
    }

    let train = train.finish();
    let test = test.finish();
    if train.len() < sample.train {
        return Err(CorpusError::InsufficientMustLinks {
            found: train.len(),
            requested: sample.train,
        });
    }
    if test.len() < sample.test {
        return Err(CorpusError::InsufficientMayLinks {
            found: test.len(),
            requested: sample.test,
        });
    }
    Ok(Dataset { train, test })
}
