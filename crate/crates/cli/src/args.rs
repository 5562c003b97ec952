use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zsar_core::embedding::{BackendKind, ModelTag};
use zsar_core::eval::ablate::AblationKind;

#[derive(Debug, Parser)]
#[command(name = "zsar", version, about = "Training-free zero-shot video action recognition")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or complete) the descriptor cache for a label space.
    GenDescriptors(GenArgs),
    /// Precompute class embeddings into an embedding table.
    EmbedClasses(EmbedArgs),
    /// Rank the classes for a single video.
    Classify(ClassifyArgs),
    /// Top-1/Top-5 over one or more test splits.
    Evaluate(EvaluateArgs),
    /// Run an ablation grid.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

fn parse_backbone(s: &str) -> Result<ModelTag, String> {
    s.parse()
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse()
}

fn parse_ablation(s: &str) -> Result<AblationKind, String> {
    s.parse()
}

/// Flags that override fields of the run config.
#[derive(Debug, Clone, Args)]
pub struct RunOverrides {
    /// Run config (TOML, or a JSON report to rerun its snapshot).
    #[arg(long)]
    pub config: PathBuf,
    /// Classes file: one raw class id per line, in index order.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    /// Descriptor cache file.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    /// ViT-B/32, ViT-B/16 or custom.
    #[arg(long, value_parser = parse_backbone)]
    pub backbone: Option<ModelTag>,
    /// Frames sampled per video.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Comma-separated descriptor kinds: class, decomposition, description,
    /// context, combination.
    #[arg(long)]
    pub kinds: Option<String>,
    /// Template file, one template with a single `{}` per line.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub prepend_class: Option<bool>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub use_templates: Option<bool>,
    /// Parallel workers (0 = all cores, 1 = sequential).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Never contact the LLM; a cold descriptor cache is an error.
    #[arg(long)]
    pub offline: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Validate the configuration and inputs; no network, no writes.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Run config; only its [llm] and cache settings are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// LLM model id (overrides the config).
    #[arg(long)]
    pub llm: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Output embedding table.
    #[arg(long, default_value = "class_embeddings.emb")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Video file or frame directory.
    #[arg(long)]
    pub video: PathBuf,
    /// Precomputed class embeddings from `embed-classes`.
    #[arg(long)]
    pub class_embeddings: Option<PathBuf>,
    /// Number of ranked classes to print.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Split file(s): `<path>\t<class-id>` per line; repeat for several splits.
    #[arg(long, required = true, num_args = 1..)]
    pub manifest: Vec<PathBuf>,
    /// Report path (JSON); a text table is written next to it.
    #[arg(long, default_value = "report.json")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long, required = true, num_args = 1..)]
    pub manifest: Vec<PathBuf>,
    /// descriptors, prompts, backbone-frames or llm.
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: AblationKind,
    /// LLM model ids for the llm ablation (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub llm: Vec<String>,
    /// Table path (JSON); a text table is written next to it.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
