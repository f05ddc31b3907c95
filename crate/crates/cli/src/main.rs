mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multilstm::Error;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "multilstm", version, about = "Dense multilabel per-frame sequence labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted temporal rules.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// TOML generator specification.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Label density and duration statistics of a dataset.
    Stats {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train a model and write a checkpoint plus the loss log.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        optim: OptimArgs,
    },
    /// Frame-level AP per class and mAP.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        source: SourceArgs,
        /// Label offset for externally supplied predictions.
        #[arg(long, allow_hyphen_values = true)]
        offset: Option<i64>,
    },
    /// Threshold predictions into scored segments and compute detection AP.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        source: SourceArgs,
        /// Training set used for per-class length statistics.
        #[arg(long)]
        train_data: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        length_penalty: Option<f64>,
        #[arg(long)]
        overlap: Option<f64>,
    },
    /// mAP as a function of the prediction offset.
    SweepOffsets {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        train_data: Option<PathBuf>,
        /// Directory holding `offset_<s>.ckpt` for every offset.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Comma-separated offsets in frames.
        #[arg(long, allow_hyphen_values = true)]
        offsets: Option<String>,
    },
    /// Sequential or co-occurrence retrieval over predictions.
    Retrieve {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        source: SourceArgs,
        /// `sequential` or `cooccur`.
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        first: Option<String>,
        #[arg(long)]
        second: Option<String>,
        #[arg(long)]
        max_gap: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Keep near-duplicate sequential hits.
        #[arg(long)]
        no_suppress: bool,
    },
    /// Finite-difference check of every model's gradients.
    Gradcheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Threads for per-video evaluation.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SourceArgs {
    /// Dataset directory the predictions refer to.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory of `<video>.csv` probability files, instead of a checkpoint.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// single-frame, lstm or multilstm.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    attention_units: Option<usize>,
    #[arg(long)]
    input_window: Option<usize>,
    #[arg(long)]
    output_window: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<i64>,
    #[arg(long)]
    frame_rate: Option<f64>,
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

type Overrides = Vec<(&'static str, String)>;

fn push<T: ToString>(o: &mut Overrides, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        o.push((key, v.to_string()));
    }
}

fn push_path(o: &mut Overrides, key: &'static str, v: &Option<PathBuf>) {
    if let Some(v) = v {
        o.push((key, v.display().to_string()));
    }
}

impl CommonArgs {
    fn push(&self, o: &mut Overrides) {
        push_path(o, "out", &self.out);
        push(o, "seed", &self.seed);
        push(o, "workers", &self.workers);
    }
}

impl SourceArgs {
    fn push(&self, o: &mut Overrides) {
        push_path(o, "data", &self.data);
        push_path(o, "checkpoint", &self.checkpoint);
        push_path(o, "predictions", &self.predictions);
    }
}

impl ModelArgs {
    fn push(&self, o: &mut Overrides) {
        push(o, "model", &self.model);
        push(o, "hidden", &self.hidden);
        push(o, "attention_units", &self.attention_units);
        push(o, "input_window", &self.input_window);
        push(o, "output_window", &self.output_window);
        push(o, "offset", &self.offset);
        push(o, "frame_rate", &self.frame_rate);
    }
}

impl OptimArgs {
    fn push(&self, o: &mut Overrides) {
        push(o, "learning_rate", &self.learning_rate);
        push(o, "decay", &self.decay);
        push(o, "epsilon", &self.epsilon);
        push(o, "clip", &self.clip);
        push(o, "minibatch", &self.minibatch);
        push(o, "epochs", &self.epochs);
    }
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth { common, .. }
            | Command::Stats { common, .. }
            | Command::Train { common, .. }
            | Command::Eval { common, .. }
            | Command::Detect { common, .. }
            | Command::SweepOffsets { common, .. }
            | Command::Retrieve { common, .. }
            | Command::Gradcheck { common, .. } => common,
        }
    }

    fn overrides(&self) -> Overrides {
        let mut o = Vec::new();
        self.common().push(&mut o);
        match self {
            Command::Synth { spec, .. } => push_path(&mut o, "spec", spec),
            Command::Stats { data, .. } => push_path(&mut o, "data", data),
            Command::Train { data, model, optim, .. } => {
                push_path(&mut o, "data", data);
                model.push(&mut o);
                optim.push(&mut o);
            }
            Command::Eval { source, offset, .. } => {
                source.push(&mut o);
                push(&mut o, "offset", offset);
            }
            Command::Detect { source, train_data, threshold, length_penalty, overlap, .. } => {
                source.push(&mut o);
                push_path(&mut o, "train_data", train_data);
                push(&mut o, "threshold", threshold);
                push(&mut o, "length_penalty", length_penalty);
                push(&mut o, "overlap", overlap);
            }
            Command::SweepOffsets { data, train_data, checkpoints, offsets, .. } => {
                push_path(&mut o, "data", data);
                push_path(&mut o, "train_data", train_data);
                push_path(&mut o, "checkpoints", checkpoints);
                push(&mut o, "offsets", offsets);
            }
            Command::Retrieve { source, query, first, second, max_gap, top_k, no_suppress, .. } => {
                source.push(&mut o);
                push(&mut o, "query", query);
                push(&mut o, "first", first);
                push(&mut o, "second", second);
                push(&mut o, "max_gap", max_gap);
                push(&mut o, "top_k", top_k);
                if *no_suppress {
                    o.push(("suppress", "false".into()));
                }
            }
            Command::Gradcheck { tolerance, .. } => push(&mut o, "tolerance", tolerance),
        }
        o
    }
}

fn resolve(command: &Command) -> multilstm::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &command.common().config {
        cfg.apply_file(path)?;
    }
    for (k, v) in command.overrides() {
        cfg.set(k, &v)?;
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Divergence { .. } | Error::Oracle { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve(&cli.command).and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
