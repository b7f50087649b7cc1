//! `zeroshot` command-line tool.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or validation error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use config::{parse_assignment, Preset};

/// Marks an error as caused by the caller's input.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "zeroshot", version, about = "Zero-shot classification over precomputed features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// JSON file of flat dotted keys, e.g. {"train.gamma": 0.01}.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for training, co-training and synthesis.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Extra override, `key=value` with a dotted key. Repeatable.
    #[arg(long = "set", global = true, value_parser = parse_assignment)]
    pub set: Vec<(String, Value)>,
    /// Feedback degree.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Weight of the semantic-embedding loss.
    #[arg(long, global = true)]
    pub beta2: Option<f64>,
    /// Training epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Decision rule: latent or combined.
    #[arg(long, global = true)]
    pub mode: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        if let Some(seed) = self.seed {
            for key in ["train.seed", "ect.seed", "synth.seed"] {
                out.push((key.to_string(), Value::from(seed)));
            }
        }
        if let Some(g) = self.gamma {
            out.push(("train.gamma".into(), Value::from(g)));
        }
        if let Some(b) = self.beta2 {
            out.push(("train.beta2".into(), Value::from(b)));
        }
        if let Some(e) = self.epochs {
            out.push(("train.epochs".into(), Value::from(e)));
        }
        if let Some(m) = &self.mode {
            out.push(("train.predict_mode".into(), Value::from(m.as_str())));
        }
        out.extend(self.set.iter().cloned());
        out
    }

    pub fn resolve(&self) -> anyhow::Result<config::RunConfig> {
        config::RunConfig::resolve(self.config.as_deref(), self.preset, &self.overrides())
    }
}

#[derive(Args, Clone, Debug)]
pub struct BundleArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub attributes: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic bundle (features.csv, attributes.csv, split.json).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a network on the seen-class rows of a bundle.
    Train {
        #[command(flatten)]
        bundle: BundleArgs,
        /// Output directory for model.json, history.csv and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Train the baseline without the semantic embedding module.
        #[arg(long)]
        baseline: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Predict unseen classes for every row not labeled with a seen class.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        bundle: BundleArgs,
        /// Labeled rows used to build prototypes (defaults to --features).
        #[arg(long)]
        seen_features: Option<PathBuf>,
        /// Co-training manifest whose recorded unseen prototypes replace the
        /// transferred ones.
        #[arg(long)]
        prototypes: Option<PathBuf>,
        /// Predictions CSV (`id,predicted,score`).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions against labeled rows, or aggregate reports.
    Eval {
        #[arg(long, required_unless_present = "aggregate")]
        predictions: Option<PathBuf>,
        #[arg(long, required_unless_present = "aggregate")]
        features: Option<PathBuf>,
        #[arg(long, required_unless_present = "aggregate")]
        split: Option<PathBuf>,
        /// `METHOD:GROUP:REPORT_JSON`; writes a method-by-group CSV grid.
        #[arg(long)]
        aggregate: Vec<String>,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Transductive co-training over the unlabeled rows.
    Ect {
        #[command(flatten)]
        bundle: BundleArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<zeroshot::Error>() {
            return match e {
                zeroshot::Error::NonFinite(_) | zeroshot::Error::Singular(_) | zeroshot::Error::DegenerateBatch => 1,
                _ => 2,
            };
        }
    }
    1
}

/// Joins the error chain, dropping causes already spelled out by their parent.
fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { out, common } => commands::synth(&out, &common),
        Command::Train {
            bundle,
            out,
            baseline,
            common,
        } => commands::train(&bundle, &out, baseline, &common),
        Command::Predict {
            model,
            bundle,
            seen_features,
            prototypes,
            out,
            common,
        } => commands::predict(&model, &bundle, seen_features.as_deref(), prototypes.as_deref(), &out, &common),
        Command::Eval {
            predictions,
            features,
            split,
            aggregate,
            format,
            out,
            common,
        } => commands::eval(
            predictions.as_deref(),
            features.as_deref(),
            split.as_deref(),
            &aggregate,
            &format,
            &out,
            &common,
        ),
        Command::Ect { bundle, out, common } => commands::ect(&bundle, &out, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
