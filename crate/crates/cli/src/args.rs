// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line flags. Every analysis option is optional on the command
//! line so that a JSON config (or a replayed run manifest) can supply it;
//! flags given explicitly win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "lens", version, about = "Weight- and circuit-based transcoder feature analysis")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// JSON config or run manifest; explicit flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Describe features from weights alone.
    Weightlens(WeightlensOpts),
    /// Cluster feature activations by circuit and describe the clusters.
    Circuitlens(CircuitOpts),
    /// Export attribution edges into one feature at one token.
    Attribute(AttributeOpts),
    /// Split, filter and deduplicate raw text into sentences.
    Ingest(IngestOpts),
    /// Record every positive feature activation over a sentence file.
    Scan(ScanOpts),
    /// Write a seeded fixture model (and corpus) to disk.
    Fixture(FixtureOpts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Weightlens(_) => "weightlens",
            Command::Circuitlens(_) => "circuitlens",
            Command::Attribute(_) => "attribute",
            Command::Ingest(_) => "ingest",
            Command::Scan(_) => "scan",
            Command::Fixture(_) => "fixture",
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOpts {
    /// Model manifest (or its path stem).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Transcoder stem; defaults to the model stem.
    #[arg(long)]
    pub transcoders: Option<PathBuf>,
    /// Prefix contexts with the model's BOS token.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub bos: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerOpts {
    /// Offline explainer whose replies are derived from the prompt.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub stub_explainer: Option<bool>,
    /// Skip natural-language descriptions.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub no_llm: Option<bool>,
    /// Base URL of an OpenAI-compatible API (enables live descriptions).
    #[arg(long)]
    pub explainer_url: Option<String>,
    #[arg(long)]
    pub explainer_model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub explainer_timeout: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightlensOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    /// z-score threshold over vocabulary projections.
    #[arg(long)]
    pub vocab_z: Option<f64>,
    /// z-score threshold over upstream-feature projections.
    #[arg(long)]
    pub feature_z: Option<f64>,
    /// Only report these features (`layer:index`, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub explainer: ExplainerOpts,
    #[arg(skip)]
    pub seed: Option<u64>,
    /// Output path (default stdout).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Input,
    Full,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadScopeArg {
    Pullback,
    SameLayer,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CircuitOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    /// Sentence file the store was scanned from.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Activation store.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Weightlens JSONL whose activating tokens join the merge prompt.
    #[arg(long)]
    pub important_tokens: Option<PathBuf>,
    /// Only analyze these features (`layer:index`, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub min_samples: Option<usize>,
    /// z-score threshold for significant contributors, pattern tokens and
    /// output influences.
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub n_generate: Option<usize>,
    #[arg(long, value_enum)]
    pub head_scope: Option<HeadScopeArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub explainer: ExplainerOpts,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeFormat {
    Jsonl,
    Dot,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    #[arg(long)]
    pub prompt: Option<String>,
    /// Target feature `layer:index`.
    #[arg(long)]
    pub feature: Option<String>,
    /// Token position (default: last).
    #[arg(long)]
    pub token: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<EdgeFormat>,
    #[arg(skip)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOpts {
    /// Plain text or JSON lines (`{"text": ...}`, `.jsonl`); repeatable.
    #[arg(long = "input")]
    pub inputs: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub percentile_cut: Option<f64>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub no_dedup: Option<bool>,
    #[arg(skip)]
    pub seed: Option<u64>,
    /// Sentence file to write (default stdout).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Only record activations above this value.
    #[arg(long)]
    pub min_activation: Option<f32>,
    /// Continue an existing store from its document count.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub resume: Option<bool>,
    /// Documents per checkpoint.
    #[arg(long)]
    pub chunk: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
    /// Store file to write.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    Toy,
    ToyIdentity,
    Wired,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureOpts {
    #[arg(long, value_enum)]
    pub kind: Option<FixtureKind>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// File stem inside the output directory.
    #[arg(long)]
    pub stem: Option<String>,
    /// Sentences in the accompanying corpus (toy kinds).
    #[arg(long)]
    pub corpus_sentences: Option<usize>,
    #[arg(skip)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}
