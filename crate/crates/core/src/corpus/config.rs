//! Generator, imprecision and sampling settings, loadable from a flat
//! `key = value` file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub intents: usize,
    pub filters: usize,
    /// Number of third-party apps contributing vendor actions.
    pub apps: usize,
    /// Probability that an intent has no action.
    pub omega_rate: f64,
    /// Probability that an intent action is taken from a vendor app rather than
    /// the platform.
    pub vendor_rate: f64,
    /// How many platform action words are in use, most popular first.
    pub platform_words: usize,
    /// Zipf exponent of platform word popularity.
    pub zipf: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            intents: 400,
            filters: 1200,
            apps: 60,
            omega_rate: 0.05,
            vendor_rate: 0.4,
            platform_words: 32,
            zipf: 1.0,
        }
    }
}

/// Probabilities of replacing a whole string by `(.*)` (full) or a contiguous
/// piece of it (partial), per field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldImprecision {
    pub full: f64,
    pub partial: f64,
}

impl Default for FieldImprecision {
    fn default() -> Self {
        Self {
            full: 0.05,
            partial: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprecisionConfig {
    pub intent_action: FieldImprecision,
    pub intent_categories: FieldImprecision,
    pub filter_actions: FieldImprecision,
    pub filter_categories: FieldImprecision,
    /// Inclusive bounds on the number of characters a partial hole removes.
    pub hole_min: usize,
    pub hole_max: usize,
}

impl Default for ImprecisionConfig {
    fn default() -> Self {
        Self {
            intent_action: FieldImprecision::default(),
            intent_categories: FieldImprecision::default(),
            filter_actions: FieldImprecision::default(),
            filter_categories: FieldImprecision::default(),
            hole_min: 1,
            hole_max: 8,
        }
    }
}

impl ImprecisionConfig {
    /// Sets both probabilities of every field.
    pub fn uniform(full: f64, partial: f64) -> Self {
        let f = FieldImprecision { full, partial };
        Self {
            intent_action: f,
            intent_categories: f,
            filter_actions: f,
            filter_categories: f,
            ..Self::default()
        }
    }

    pub fn fields(&self) -> [FieldImprecision; 4] {
        [
            self.intent_action,
            self.intent_categories,
            self.filter_actions,
            self.filter_categories,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub train: usize,
    pub test: usize,
    /// Target fraction of positive training links.
    pub train_pos_frac: f64,
    /// Target fraction of positive test links; `None` keeps the natural mix.
    pub test_pos_frac: Option<f64>,
    /// Most links of one (split, label) that may share an intent.
    pub per_intent_cap: usize,
    /// Probability that a drawn pair uses a filter declaring the intent's action.
    pub compatible_rate: f64,
    /// Pair draws allowed per requested link before giving up.
    pub draws_per_link: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            train: 2000,
            test: 500,
            train_pos_frac: 0.5,
            test_pos_frac: None,
            per_intent_cap: 20,
            compatible_rate: 0.5,
            draws_per_link: 400,
        }
    }
}

/// Everything `dataset` needs besides the seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub generator: GeneratorConfig,
    pub imprecision: ImprecisionConfig,
    pub sample: SampleConfig,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CorpusError> {
    value.parse().map_err(|_| CorpusError::Config {
        key: key.to_owned(),
        message: format!("cannot parse `{value}`"),
    })
}

fn parse_prob(key: &str, value: &str) -> Result<f64, CorpusError> {
    let p: f64 = parse_num(key, value)?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(CorpusError::Config {
            key: key.to_owned(),
            message: format!("probability {p} outside [0, 1]"),
        })
    }
}

impl DatasetConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CorpusError> {
        let g = &mut self.generator;
        let imp = &mut self.imprecision;
        let s = &mut self.sample;
        match key {
            "intents" => g.intents = parse_num(key, value)?,
            "filters" => g.filters = parse_num(key, value)?,
            "apps" => g.apps = parse_num(key, value)?,
            "omega_rate" => g.omega_rate = parse_prob(key, value)?,
            "vendor_rate" => g.vendor_rate = parse_prob(key, value)?,
            "platform_words" => g.platform_words = parse_num(key, value)?,
            "zipf" => g.zipf = parse_num(key, value)?,
            "imp.full" => {
                let p = parse_prob(key, value)?;
                for f in [
                    &mut imp.intent_action,
                    &mut imp.intent_categories,
                    &mut imp.filter_actions,
                    &mut imp.filter_categories,
                ] {
                    f.full = p;
                }
            }
            "imp.partial" => {
                let p = parse_prob(key, value)?;
                for f in [
                    &mut imp.intent_action,
                    &mut imp.intent_categories,
                    &mut imp.filter_actions,
                    &mut imp.filter_categories,
                ] {
                    f.partial = p;
                }
            }
            "imp.intent_action.full" => imp.intent_action.full = parse_prob(key, value)?,
            "imp.intent_action.partial" => imp.intent_action.partial = parse_prob(key, value)?,
            "imp.intent_categories.full" => imp.intent_categories.full = parse_prob(key, value)?,
            "imp.intent_categories.partial" => {
                imp.intent_categories.partial = parse_prob(key, value)?
            }
            "imp.filter_actions.full" => imp.filter_actions.full = parse_prob(key, value)?,
            "imp.filter_actions.partial" => imp.filter_actions.partial = parse_prob(key, value)?,
            "imp.filter_categories.full" => imp.filter_categories.full = parse_prob(key, value)?,
            "imp.filter_categories.partial" => {
                imp.filter_categories.partial = parse_prob(key, value)?
            }
            "imp.hole_min" => imp.hole_min = parse_num(key, value)?,
            "imp.hole_max" => imp.hole_max = parse_num(key, value)?,
            "train" => s.train = parse_num(key, value)?,
            "test" => s.test = parse_num(key, value)?,
            "train_pos_frac" => s.train_pos_frac = parse_prob(key, value)?,
            "test_pos_frac" => {
                s.test_pos_frac = match value {
                    "natural" | "none" => None,
                    v => Some(parse_prob(key, v)?),
                }
            }
            "per_intent_cap" => s.per_intent_cap = parse_num(key, value)?,
            "compatible_rate" => s.compatible_rate = parse_prob(key, value)?,
            "draws_per_link" => s.draws_per_link = parse_num(key, value)?,
            _ => {
                return Err(CorpusError::Config {
                    key: key.to_owned(),
                    message: "unknown key".to_owned(),
                })
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CorpusError::Config {
                key: line.to_owned(),
                message: format!("line {}: expected key = value", n + 1),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |key: &str, message: &str| {
            Err(CorpusError::Config {
                key: key.to_owned(),
                message: message.to_owned(),
            })
        };
        if self.generator.intents == 0 || self.generator.filters == 0 {
            return bad("intents/filters", "counts must be at least 1");
        }
        if self.generator.apps == 0 {
            return bad("apps", "must be at least 1");
        }
        if self.generator.platform_words == 0 {
            return bad("platform_words", "must be at least 1");
        }
        if !(self.generator.zipf >= 0.0 && self.generator.zipf.is_finite()) {
            return bad("zipf", "must be a finite non-negative number");
        }
        for f in self.imprecision.fields() {
            if f.full + f.partial > 1.0 {
                return bad("imp", "full + partial must not exceed 1");
            }
        }
        let imp = &self.imprecision;
        if imp.hole_min == 0 || imp.hole_min > imp.hole_max {
            return bad("imp.hole_min", "need 1 <= hole_min <= hole_max");
        }
        if self.sample.per_intent_cap == 0 {
            return bad("per_intent_cap", "must be at least 1");
        }
        Ok(())
    }

    /// Flat `key = value` rendering accepted by [`DatasetConfig::parse`].
    pub fn to_kv(&self) -> String {
        let g = &self.generator;
        let i = &self.imprecision;
        let s = &self.sample;
        let mut lines = vec![
            format!("intents = {}", g.intents),
            format!("filters = {}", g.filters),
            format!("apps = {}", g.apps),
            format!("omega_rate = {}", g.omega_rate),
            format!("vendor_rate = {}", g.vendor_rate),
            format!("platform_words = {}", g.platform_words),
            format!("zipf = {}", g.zipf),
        ];
        for (name, f) in [
            ("intent_action", i.intent_action),
            ("intent_categories", i.intent_categories),
            ("filter_actions", i.filter_actions),
            ("filter_categories", i.filter_categories),
        ] {
            lines.push(format!("imp.{name}.full = {}", f.full));
            lines.push(format!("imp.{name}.partial = {}", f.partial));
        }
        lines.extend([
            format!("imp.hole_min = {}", i.hole_min),
            format!("imp.hole_max = {}", i.hole_max),
            format!("train = {}", s.train),
            format!("test = {}", s.test),
            format!("train_pos_frac = {}", s.train_pos_frac),
            format!(
                "test_pos_frac = {}",
                s.test_pos_frac
                    .map_or("natural".to_owned(), |p| p.to_string())
            ),
            format!("per_intent_cap = {}", s.per_intent_cap),
            format!("compatible_rate = {}", s.compatible_rate),
            format!("draws_per_link = {}", s.draws_per_link),
        ]);
        lines.join("\n") + "\n"
    }
}
