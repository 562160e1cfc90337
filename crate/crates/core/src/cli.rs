//! The `uniex` command line.
//!
//! Every command that writes an output also writes
//! `<output>.manifest.json` holding the resolved configuration, the seed
//! and the tool version. Settings resolve as: built-in defaults, then the
//! `--config` TOML file, then flags.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bench::{self, BenchConfig};
use crate::data::{self, convert, fixture, ExDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::fsutil;
use crate::gradcheck::{self, GradcheckConfig};
use crate::model::{Ablations, Model, ModelConfig};
use crate::ndiff::Fault;
use crate::schema::{SchemaSet, TaskKind};
use crate::structures::DEFAULT_THRESHOLD;
use crate::train::{self, TrainConfig};

/// Backward-rule corruption used by `gradcheck --inject-fault`.
pub const INJECTED_FAULT: Fault = Fault::SigmoidBackwardScale(1.1);

/// Contents of a `--config` file. Every table and key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threshold: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub gradcheck: GradcheckConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            gradcheck: GradcheckConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Ok(toml::from_str(&fsutil::read_to_string(p)?)?),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "uniex", version, about = "Schema-prompted span extraction: train, predict, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw corpus into EX-JSONL.
    Convert(ConvertArgs),
    /// Write a synthetic fixture corpus and its schema file.
    Fixture(FixtureArgs),
    /// Train a model and write a checkpoint plus a loss/F1 trace.
    Train(TrainArgs),
    /// Decode predictions for an EX-JSONL file.
    Predict(PredictArgs),
    /// Score predictions against gold.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients of the full loss.
    Gradcheck(GradcheckArgs),
    /// Time encode, score and decode per sentence.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Whitespace-separated columns, token first and BIO tag last.
    Conll,
    /// EX-JSONL or a JSON array of records in the same layout.
    Json,
}

#[derive(Debug, Default, Args)]
pub struct AblationFlags {
    /// Let every prompt token attend to every other.
    #[arg(long)]
    pub no_sam: bool,
    /// Replace the triaffine head with multi-head selection.
    #[arg(long)]
    pub no_triaffine: bool,
    /// Replace label words with placeholder tokens.
    #[arg(long)]
    pub no_label_names: bool,
}

impl AblationFlags {
    fn apply(&self, a: &mut Ablations) {
        a.no_sam |= self.no_sam;
        a.no_triaffine |= self.no_triaffine;
        a.no_label_names |= self.no_label_names;
    }
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Conll)]
    pub format: Format,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// entity, relation, event or sentiment.
    #[arg(long, value_parser = parse_kind)]
    pub kind: TaskKind,
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub schema_output: PathBuf,
    /// Timing corpus instead: `size` entity sentences per listed target
    /// count, all `--n-text` tokens long.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<usize>>,
    #[arg(long, default_value_t = 16)]
    pub n_text: usize,
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub ffn_hidden: Option<usize>,
    #[arg(long)]
    pub max_position: Option<usize>,
    #[arg(long)]
    pub init_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training documents (EX-JSONL).
    #[arg(long)]
    pub train: PathBuf,
    /// Schema file (TOML).
    #[arg(long)]
    pub schema: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-epoch `epoch,loss,f1` CSV; defaults to `<output>.trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Stop once the training-set headline F1 reaches this value.
    #[arg(long)]
    pub stop_at_f1: Option<f64>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub ablations: AblationFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Task kind whose headline metric is reported.
    #[arg(long, value_parser = parse_kind)]
    pub task: Option<TaskKind>,
    /// Metric report to write (JSON).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub n_text: Option<usize>,
    #[arg(long)]
    pub init_std: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Corrupt the sigmoid backward rule; the check is then expected to fail.
    #[arg(long)]
    pub inject_fault: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub ablations: AblationFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn parse_kind(s: &str) -> std::result::Result<TaskKind, String> {
    match s {
        "entity" => Ok(TaskKind::Entity),
        "relation" => Ok(TaskKind::Relation),
        "event" => Ok(TaskKind::Event),
        "sentiment" => Ok(TaskKind::Sentiment),
        other => Err(format!("unknown task kind '{other}' (entity, relation, event, sentiment)")),
    }
}

fn check_threshold(tau: f64) -> Result<f64> {
    if tau > 0.0 && tau < 1.0 {
        Ok(tau)
    } else {
        Err(Error::Config(format!("threshold must lie in (0, 1), got {tau}")))
    }
}

/// `<path>` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_manifest(output: &Path, command: &str, seed: Option<u64>, config: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "tool": "uniex",
        "version": env!("CARGO_PKG_VERSION"),
        "checkpoint_format": crate::model::CHECKPOINT_VERSION,
        "command": command,
        "argv": std::env::args().collect::<Vec<_>>(),
        "seed": seed,
        "config": config,
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    fsutil::write_atomic(&sibling(output, ".manifest.json"), text.as_bytes())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fsutil::write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

/// Runs one command. `Ok(false)` means the command ran but its check
/// failed (only `gradcheck` reports this).
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Convert(a) => cmd_convert(&a).map(|_| true),
        Command::Fixture(a) => cmd_fixture(&a).map(|_| true),
        Command::Train(a) => cmd_train(&a).map(|_| true),
        Command::Predict(a) => cmd_predict(&a).map(|_| true),
        Command::Eval(a) => cmd_eval(&a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Bench(a) => cmd_bench(&a).map(|_| true),
    }
}

pub fn cmd_convert(a: &ConvertArgs) -> Result<Vec<ExDocument>> {
    let text = fsutil::read_to_string(&a.input)?;
    if text.trim().is_empty() {
        log::warn!("{} is empty; writing an empty output", a.input.display());
    }
    let (docs, warnings) = match a.format {
        Format::Conll => {
            let c = convert::convert_column_ner(&text)?;
            (c.documents, c.warnings)
        }
        Format::Json => (convert::convert_generic_json(&text)?, 0),
    };
    data::write_jsonl(&a.output, &docs)?;
    log::info!("wrote {} documents to {}", docs.len(), a.output.display());
    write_manifest(
        &a.output,
        "convert",
        None,
        json!({"input": a.input, "format": format!("{:?}", a.format).to_lowercase(), "documents": docs.len(), "warnings": warnings}),
    )?;
    Ok(docs)
}

pub fn cmd_fixture(a: &FixtureArgs) -> Result<()> {
    if a.size == 0 {
        return Err(Error::Config("fixture size must be positive".into()));
    }
    let f = match &a.targets {
        None => fixture::make_fixture(a.kind, a.size, a.seed),
        Some(counts) => {
            if a.kind != TaskKind::Entity {
                return Err(Error::Config("--targets builds entity sentences; use --kind entity".into()));
            }
            if let Some(k) = counts.iter().find(|&&k| 2 * k > a.n_text) {
                return Err(Error::Config(format!("{k} targets do not fit {} tokens", a.n_text)));
            }
            fixture::target_count_fixture(a.n_text, counts, a.size, a.seed)
        }
    };
    data::write_jsonl(&a.output, &f.documents)?;
    fsutil::write_atomic(&a.schema_output, f.schemas.to_toml_string().as_bytes())?;
    write_manifest(
        &a.output,
        "fixture",
        Some(a.seed),
        json!({"kind": a.kind, "size": a.size, "targets": a.targets, "n_text": a.n_text}),
    )
}

/// Resolved configuration of a training run.
pub fn train_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut rc = RunConfig::load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        rc.seed = s;
    }
    if let Some(t) = a.threshold {
        rc.threshold = t;
    }
    rc.threshold = check_threshold(rc.threshold)?;
    let t = &mut rc.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.warmup_rate = a.warmup_rate.unwrap_or(t.warmup_rate);
    t.seed = rc.seed;
    t.threshold = rc.threshold;
    a.ablations.apply(&mut t.ablations);
    let e = &mut rc.model.encoder;
    let m = &a.model;
    e.d = m.d.unwrap_or(e.d);
    e.layers = m.layers.unwrap_or(e.layers);
    e.heads = m.heads.unwrap_or(e.heads);
    e.ffn_hidden = m.ffn_hidden.unwrap_or(e.ffn_hidden);
    e.max_position = m.max_position.unwrap_or(e.max_position);
    e.init_std = m.init_std.unwrap_or(e.init_std);
    e.seed = rc.seed;
    rc.model = rc.model.clone().with_ablations(t.ablations);
    rc.train.validate()?;
    Ok(rc)
}

pub fn cmd_train(a: &TrainArgs) -> Result<Model> {
    let rc = train_config(a)?;
    let docs = data::read_jsonl(&a.train)?;
    let schemas = SchemaSet::load(&a.schema)?;
    let vocab = Vocabulary::build(&docs, [&schemas]);
    let mut model = Model::new(rc.model.clone(), vocab, schemas)?;
    let trace = if rc.train.epochs == 0 {
        Vec::new()
    } else {
        let target = a.stop_at_f1;
        train::train(&mut model, &docs, &rc.train, |s| match target {
            Some(t) if s.f1 >= t => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        })?
    };
    model.save(&a.output)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| sibling(&a.output, ".trace.csv"));
    train::write_trace(&trace_path, &trace)?;
    if let Some(last) = trace.last() {
        log::info!("finished after {} epochs, loss {:.6}, f1 {:.4}", last.epoch, last.mean_loss, last.f1);
    }
    write_manifest(
        &a.output,
        "train",
        Some(rc.seed),
        json!({"train": a.train, "schema": a.schema, "trace": trace_path, "run": rc, "epochs_run": trace.len()}),
    )?;
    Ok(model)
}

pub fn cmd_predict(a: &PredictArgs) -> Result<Vec<ExDocument>> {
    let rc = RunConfig::load(a.config.as_deref())?;
    let tau = check_threshold(a.threshold.unwrap_or(rc.threshold))?;
    let model = Model::load(&a.checkpoint)?;
    let docs = data::read_jsonl(&a.input)?;
    let mut out = Vec::with_capacity(docs.len());
    for (i, d) in docs.iter().enumerate() {
        let p = model.predict(&d.tokens, tau)?;
        if p.truncated > 0 {
            log::warn!("document {}: {} text tokens truncated", i + 1, p.truncated);
        }
        for m in &p.diagnostics.messages {
            log::warn!("document {}: {m}", i + 1);
        }
        out.push(d.with_gold(p.record));
    }
    data::write_jsonl(&a.output, &out)?;
    write_manifest(
        &a.output,
        "predict",
        None,
        json!({"checkpoint": a.checkpoint, "input": a.input, "threshold": tau}),
    )?;
    Ok(out)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<Metrics> {
    let pred = data::read_jsonl(&a.pred)?;
    let gold = data::read_jsonl(&a.gold)?;
    let metrics = Metrics::compute(&pred, &gold)?;
    print!("{}", metrics.to_table());
    let primary = a.task.map(|k| {
        let m = metrics.primary(k);
        println!("headline f1 ({}): {:.4}", kind_name(k), m.f1);
        json!({"task": k, "f1": m.f1})
    });
    if let Some(out) = &a.output {
        write_json(out, &json!({"metrics": metrics, "primary": primary}))?;
        write_manifest(out, "eval", None, json!({"pred": a.pred, "gold": a.gold, "task": a.task}))?;
    }
    Ok(metrics)
}

fn kind_name(k: TaskKind) -> &'static str {
    match k {
        TaskKind::Entity => "entity",
        TaskKind::Relation => "relation",
        TaskKind::Event => "event",
        TaskKind::Sentiment => "sentiment",
    }
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<bool> {
    let rc = RunConfig::load(a.config.as_deref())?;
    let mut c = rc.gradcheck;
    c.seed = a.seed.unwrap_or(c.seed);
    c.d = a.d.unwrap_or(c.d);
    c.layers = a.layers.unwrap_or(c.layers);
    c.heads = a.heads.unwrap_or(c.heads);
    c.n_text = a.n_text.unwrap_or(c.n_text);
    c.init_std = a.init_std.unwrap_or(c.init_std);
    c.step = a.step.unwrap_or(c.step);
    c.tolerance = a.tolerance.unwrap_or(c.tolerance);
    a.ablations.apply(&mut c.ablations);
    if c.n_text < 4 {
        return Err(Error::Config(format!("n_text must be at least 4, got {}", c.n_text)));
    }
    let fault = a.inject_fault.then_some(INJECTED_FAULT);
    let start = std::time::Instant::now();
    let report = gradcheck::run(&c, fault)?;
    let seconds = start.elapsed().as_secs_f64();
    let passed = report.max_rel_error < c.tolerance;
    println!(
        "gradcheck: {} parameters, max relative error {:.3e} (tolerance {:.0e}) in {:.2}s: {}",
        report.checked,
        report.max_rel_error,
        c.tolerance,
        seconds,
        if passed { "PASS" } else { "FAIL" }
    );
    if let Some(w) = &report.worst {
        println!("worst entry: {}[{}] analytic {:.6e} numeric {:.6e}", w.param, w.index, w.analytic, w.numeric);
    }
    if let Some(out) = &a.output {
        write_json(
            out,
            &json!({"passed": passed, "seconds": seconds, "fault_injected": a.inject_fault, "report": report}),
        )?;
        write_manifest(out, "gradcheck", Some(c.seed), json!(c))?;
    }
    Ok(passed)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<bench::BenchReport> {
    let rc = RunConfig::load(a.config.as_deref())?;
    let mut c = rc.bench;
    c.batch = a.batch.unwrap_or(c.batch);
    c.warmup = a.warmup.unwrap_or(c.warmup);
    c.repeats = a.repeats.unwrap_or(c.repeats);
    c.threshold = check_threshold(a.threshold.unwrap_or(c.threshold))?;
    let model = Model::load(&a.checkpoint)?;
    let docs = data::read_jsonl(&a.input)?;
    let report = bench::run(&model, &docs, &c)?;
    print!("{}", report.to_table());
    if let Some(out) = &a.output {
        write_json(out, &report)?;
        write_manifest(out, "bench", None, json!({"checkpoint": a.checkpoint, "input": a.input, "bench": c}))?;
    }
    Ok(report)
}
