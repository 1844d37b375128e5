//! Command-line pipeline: dataset generation, training, evaluation and the
//! interpretation reports. Every command writes a `manifest.json` into its
//! output directory.

use std::collections::HashSet;
use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{self, tokens, CorpusError, DatasetConfig, LabeledLink};
use crate::interpret::{self, InterpretError, Side, DEFAULT_MASK_LEN};
use crate::linn::{self, checkpoint, CheckpointError, LinnError, LinnModel, Metrics, TrainConfig};
use crate::tde::{Hyper, Instantiation};

pub const MANIFEST: &str = "manifest.json";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Parser)]
#[command(
    name = "linkoracle",
    version,
    about = "ICC link matching with learned link inference"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and write train/test JSONL files.
    Dataset(DatasetArgs),
    /// Train a model on a dataset's training links.
    Train(TrainArgs),
    /// Score a split and report metrics.
    Eval(EvalArgs),
    /// Deletion-masking explanations for links of a split.
    Explain(ExplainArgs),
    /// Strongest input windows of every convolution kernel.
    Activations(ActivationsArgs),
    /// Export encoder outputs as CSV.
    Export(ExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of must links in the training split.
    #[arg(long)]
    pub train: Option<usize>,
    /// Number of may links in the test split.
    #[arg(long)]
    pub test: Option<usize>,
    /// Probability of fully wildcarding each field.
    #[arg(long)]
    pub imp_full: Option<f64>,
    /// Probability of partially wildcarding each field.
    #[arg(long)]
    pub imp_partial: Option<f64>,
    /// `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub settings: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub inst: Instantiation,
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelData {
    /// Checkpoint file or a training output directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long, default_value_t = DEFAULT_MASK_LEN)]
    pub mask_len: usize,
    /// Number of links to explain, from the start of the split.
    #[arg(long, default_value_t = 10)]
    pub limit: usize,
    /// Only explain links whose ground truth is positive.
    #[arg(long)]
    pub positives: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Intent,
    Filter,
}

#[derive(Debug, Args, Serialize)]
pub struct ActivationsArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long, value_enum, default_value_t = SideArg::Intent)]
    pub side: SideArg,
    /// Windows kept per kernel.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportKind {
    Intents,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub input: ModelData,
    #[arg(long, value_enum, default_value_t = ExportKind::Intents)]
    pub kind: ExportKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] LinnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Interpret(#[from] InterpretError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 for runtime failures, 2 for bad usage, 3 for artifacts made by a
    /// different build or model.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Corpus(CorpusError::Config { .. }) => 2,
            Self::Checkpoint(e) if e.is_mismatch() => 3,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Serialize)]
struct Timing {
    step: &'static str,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, A: Serialize> {
    command: &'static str,
    version: &'static str,
    seed: Option<u64>,
    args: &'a A,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
    artifacts: Vec<String>,
    timings: Vec<Timing>,
}

struct Run {
    out: PathBuf,
    artifacts: Vec<String>,
    timings: Vec<Timing>,
    clock: Instant,
}

impl Run {
    fn start(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(io_err(out))?;
        Ok(Self {
            out: out.to_owned(),
            artifacts: Vec::new(),
            timings: Vec::new(),
            clock: Instant::now(),
        })
    }

    fn lap(&mut self, step: &'static str) {
        self.timings.push(Timing {
            step,
            seconds: self.clock.elapsed().as_secs_f64(),
        });
        self.clock = Instant::now();
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_owned());
        self.out.join(name)
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(io_err(&path))
    }

    fn finish<A: Serialize>(
        self,
        command: &'static str,
        seed: Option<u64>,
        args: &A,
        config: Option<serde_json::Value>,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            args,
            config,
            artifacts: self.artifacts,
            timings: self.timings,
        };
        let path = self.out.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))
    }
}

fn dataset_config(args: &DatasetArgs) -> Result<DatasetConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => DatasetConfig::load(path)?,
        None => DatasetConfig::default(),
    };
    let mut set = |key: &str, value: String| cfg.set(key, &value);
    if let Some(n) = args.train {
        set("train", n.to_string())?;
    }
    if let Some(n) = args.test {
        set("test", n.to_string())?;
    }
    if let Some(p) = args.imp_full {
        set("imp.full", p.to_string())?;
    }
    if let Some(p) = args.imp_partial {
        set("imp.partial", p.to_string())?;
    }
    for kv in &args.settings {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got `{kv}`")))?;
        set(key.trim(), value.trim().to_owned())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_dataset(args: &DatasetArgs) -> Result<(), CliError> {
    let cfg = dataset_config(args)?;
    let mut run = Run::start(&args.out)?;
    let data = corpus::dataset_from_config(&cfg, args.seed)?;
    run.lap("generate");
    for (name, links) in [(TRAIN_FILE, &data.train), (TEST_FILE, &data.test)] {
        let path = run.path(name);
        corpus::write_jsonl(&path, links)?;
    }
    run.write("dataset.conf", cfg.to_kv().as_bytes())?;
    run.lap("write");
    eprintln!(
        "wrote {} train and {} test links to {}",
        data.train.len(),
        data.test.len(),
        args.out.display()
    );
    let config = serde_json::to_value(&cfg)?;
    run.finish("dataset", Some(args.seed), args, Some(config))
}

fn read_split(data: &Path, split: Split) -> Result<Vec<LabeledLink>, CliError> {
    let name = match split {
        Split::Train => TRAIN_FILE,
        Split::Test => TEST_FILE,
    };
    let path = data.join(name);
    corpus::read_jsonl(&path).map_err(|e| match e {
        CorpusError::Io(source) => CliError::Io { path, source },
        other => other.into(),
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        ..TrainConfig::default()
    };
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let links = read_split(&args.data, Split::Train)?;
    let mut run = Run::start(&args.out)?;
    let mut model = LinnModel::new(args.inst, Hyper::default(), args.seed)?;
    run.lap("load");
    let history = linn::train_with_progress(&mut model, &links, &cfg, |epoch, loss| {
        eprintln!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    })?;
    run.lap("train");
    let path = run.path(CHECKPOINT_FILE);
    checkpoint::save(&model, &path)?;
    let mut w = csv::Writer::from_path(run.path(LOSS_FILE))?;
    w.write_record(["epoch", "loss"])?;
    for (k, loss) in history.iter().enumerate() {
        w.write_record([(k + 1).to_string(), loss.to_string()])?;
    }
    w.flush().map_err(io_err(&args.out))?;
    run.lap("write");
    let config = serde_json::json!({ "train": cfg, "model": model.spec() });
    run.finish("train", Some(args.seed), args, Some(config))
}

fn load_model(path: &Path) -> Result<LinnModel, CliError> {
    let file = if path.is_dir() {
        path.join(CHECKPOINT_FILE)
    } else {
        path.to_owned()
    };
    checkpoint::load(&file).map_err(|e| match e {
        CheckpointError::Io(source) => CliError::Io { path: file, source },
        other => other.into(),
    })
}

#[derive(Debug, Serialize)]
struct EvalReport<'a> {
    instantiation: Instantiation,
    params: usize,
    split: Split,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&args.input.model)?;
    let links = read_split(&args.input.data, args.input.split)?;
    let mut run = Run::start(&args.out)?;
    let metrics = linn::evaluate(&model, &links)?;
    run.lap("evaluate");
    let report = EvalReport {
        instantiation: model.instantiation(),
        params: model.param_count(),
        split: args.input.split,
        metrics: &metrics,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    run.write(METRICS_FILE, json.as_bytes())?;
    let table = metrics.table(model.instantiation().name(), model.param_count());
    run.write("metrics.txt", table.as_bytes())?;
    print!("{table}");
    run.finish("eval", None, args, None)
}

#[derive(Debug, Serialize)]
struct ExplainedLink {
    index: usize,
    intent: String,
    filter: String,
    truth: bool,
    explanation: interpret::MaskExplanation,
}

pub fn cmd_explain(args: &ExplainArgs) -> Result<(), CliError> {
    let model = load_model(&args.input.model)?;
    let links = read_split(&args.input.data, args.input.split)?;
    let mut run = Run::start(&args.out)?;
    let color = io::stdout().is_terminal();
    let mut out = Vec::new();
    for (index, link) in links
        .iter()
        .enumerate()
        .filter(|(_, l)| !args.positives || l.truth)
        .take(args.limit)
    {
        let explanation =
            interpret::explain_by_masking(&model, &link.intent, &link.filter, args.mask_len)?;
        let strongest = explanation.strongest().expect("at least one window");
        if color {
            println!(
                "{index:>5} p={:.4}  {}",
                explanation.probability,
                explanation.ansi_preview()
            );
        } else {
            println!(
                "{index:>5} p={:.4}  max |delta| {:.4} at token {}  {}",
                explanation.probability,
                strongest.delta.abs(),
                strongest.position,
                explanation.rendering
            );
        }
        out.push(ExplainedLink {
            index,
            intent: link.intent.render(),
            filter: link.filter.render(),
            truth: link.truth,
            explanation,
        });
    }
    run.lap("explain");
    run.write("explanations.json", &serde_json::to_vec_pretty(&out)?)?;
    run.finish("explain", None, args, None)
}

pub fn cmd_activations(args: &ActivationsArgs) -> Result<(), CliError> {
    let model = load_model(&args.input.model)?;
    let links = read_split(&args.input.data, args.input.split)?;
    let mut run = Run::start(&args.out)?;
    let (side, render): (Side, fn(&LabeledLink) -> Vec<usize>) = match args.side {
        SideArg::Intent => (Side::Intent, |l| tokens::intent_tokens(&l.intent)),
        SideArg::Filter => (Side::Filter, |l| tokens::filter_tokens(&l.filter)),
    };
    let mut seen = HashSet::new();
    let corpus: Vec<Vec<usize>> = links
        .iter()
        .map(render)
        .filter(|ids| seen.insert(ids.clone()))
        .collect();
    let reports = interpret::top_kernel_activations(&model, side, &corpus, args.top)?;
    run.lap("scan");
    let mut stdout = io::stdout().lock();
    for r in &reports {
        let segments: Vec<String> = r
            .top
            .iter()
            .take(3)
            .map(|s| format!("{} ({:.3})", s.segment, s.activation))
            .collect();
        writeln!(stdout, "{:<18} {}", r.kernel, segments.join("  ")).map_err(io_err(&args.out))?;
    }
    run.write("kernels.json", &serde_json::to_vec_pretty(&reports)?)?;
    run.finish("activations", None, args, None)
}

pub fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    let model = load_model(&args.input.model)?;
    let links = read_split(&args.input.data, args.input.split)?;
    let mut run = Run::start(&args.out)?;
    let rows = match args.kind {
        ExportKind::Intents => {
            let values: Vec<_> = links.iter().map(|l| l.intent.clone()).collect();
            interpret::export_encodings(&model, &values)?
        }
    };
    run.lap("encode");
    let path = run.path("encodings.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    interpret::write_encodings_csv(io::BufWriter::new(file), &rows)?;
    eprintln!(
        "{} distinct values written to {}",
        rows.len(),
        path.display()
    );
    run.finish("export", None, args, None)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Dataset(a) => cmd_dataset(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Activations(a) => cmd_activations(a),
        Command::Export(a) => cmd_export(a),
    }
}
