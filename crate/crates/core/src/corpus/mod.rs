//! Synthetic corpus, imprecision simulation and labeled link datasets.

pub mod config;
pub mod dataset;
pub mod generate;
pub mod jsonl;
pub mod tokens;
pub mod weaken;

use thiserror::Error;

pub use config::{
    DatasetConfig, FieldImprecision, GeneratorConfig, ImprecisionConfig, SampleConfig,
};
pub use dataset::{build_dataset, Dataset, LabeledLink};
pub use generate::generate_corpus;
pub use jsonl::{parse_record, read_jsonl, serialize_record, write_jsonl};
pub use weaken::{weaken_filter, weaken_intent, weaken_pattern};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid setting `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("only {found} may links found, {requested} requested")]
    InsufficientMayLinks { found: usize, requested: usize },
    #[error("only {found} must links found, {requested} requested")]
    InsufficientMustLinks { found: usize, requested: usize },
    #[error("intent and filter pools must be nonempty")]
    EmptyPool,
    #[error("pools must contain precise values only")]
    ImprecisePool,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Generates the corpus and dataset for `seed`.
pub fn dataset_from_config(cfg: &DatasetConfig, seed: u64) -> Result<Dataset, CorpusError> {
    use rand::SeedableRng;
    cfg.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (intents, filters) = generate_corpus(&cfg.generator, &mut rng);
    build_dataset(&intents, &filters, &cfg.imprecision, &cfg.sample, seed)
}
