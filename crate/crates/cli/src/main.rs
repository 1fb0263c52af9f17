//! `bn2o`: network generation, benchmark sampling, recognition-net training,
//! approximate inference and D-list evaluation.
//!
//! Every output file gets a `<file>.manifest.json` beside it. Set
//! `BN2O_THREADS` to fix the worker count; results do not depend on it.

mod commands;
mod grid;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::commands::CliError;

#[derive(Parser)]
#[command(name = "bn2o", version, about = "Noisy-OR diagnosis networks: generation, inference, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic network; prints its statistics as JSON.
    GenNet(GenNetArgs),
    /// Sample a benchmark of test cases from a network.
    GenBench(GenBenchArgs),
    /// Train a recognition network on samples from a network.
    Train(TrainArgs),
    /// Compute approximate posterior marginals for every case.
    Infer(InferArgs),
    /// Compute exact posterior marginals for every case.
    Oracle(OracleArgs),
    /// Score D-lists built from marginals and average the cumulative curves.
    Eval(EvalArgs),
    /// Run the full pipeline over the eight (p+, p-) benchmarks.
    BiasGrid(GridArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Tiny,
    Desk,
    Paper,
}

#[derive(Debug, Args, Serialize)]
pub struct GenNetArgs {
    /// Generator config as JSON; overrides --preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "paper")]
    pub preset: Preset,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenBenchArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub p_plus: f64,
    #[arg(long)]
    pub p_minus: f64,
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    /// Active diseases per case.
    #[arg(long, default_value_t = 5)]
    pub diseases: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub p_plus: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_minus: f64,
    #[arg(long, value_enum)]
    pub kind: ModelKind,
    /// Trained LR model whose weights seed the MLP (required for --kind mlp).
    #[arg(long)]
    pub init_from: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub hidden: usize,
    /// Half-width of the uniform initialization of new MLP weights.
    #[arg(long, default_value_t = 0.01)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eta0: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "f64")]
    pub dtype: Dtype,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Jj99,
    Aisbn,
    Lr,
    Mlp,
    Prior,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    #[arg(long, value_enum)]
    pub method: MethodName,
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub cases: PathBuf,
    /// Recognition model file (lr and mlp).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Method name written into the records; defaults to --method.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: u64,
    #[arg(long, default_value_t = 25_000)]
    pub phase1: usize,
    #[arg(long, default_value_t = 75_000)]
    pub phase2: usize,
    #[arg(long, default_value_t = 2_500)]
    pub block_size: usize,
    /// Required for aisbn.
    #[arg(long, required_if_eq("method", "aisbn"))]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    /// Enumeration in the network augmented with the cases' observation model.
    Enum,
    /// Inclusion-exclusion over positive findings, observation model ignored.
    Quickscore,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, alias = "cases")]
    pub case_file: PathBuf,
    #[arg(long, value_enum, default_value = "enum")]
    pub mode: OracleMode,
    /// Largest K (enum) or |F+| (quickscore) attempted.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub cases: PathBuf,
    /// One marginals file per method.
    #[arg(long, num_args = 1.., required = true)]
    pub marginals: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-case summary; defaults to the CSV path with a `.cases.jsonl` suffix.
    #[arg(long)]
    pub per_case: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: Scale,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Actually run the paper-scale preset instead of printing its plan.
    #[arg(long)]
    pub confirm_long: bool,
    /// Cases per benchmark (overrides the preset).
    #[arg(long)]
    pub cases: Option<usize>,
    /// Training samples per recognition net (overrides the preset).
    #[arg(long)]
    pub train_samples: Option<usize>,
    /// AIS-BN phase-1 and phase-2 sample counts (override the preset).
    #[arg(long)]
    pub phase1: Option<usize>,
    #[arg(long)]
    pub phase2: Option<usize>,
    /// Only run these cells, given as `p+,p-` (repeatable).
    #[arg(long = "cell", value_parser = parse_cell)]
    pub cells: Vec<(f64, f64)>,
}

fn parse_cell(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected p+,p-")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BN2O_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("BN2O_THREADS={v} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::GenNet(a) => commands::gen_net(&a),
        Command::GenBench(a) => commands::gen_bench(&a),
        Command::Train(a) => commands::train(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Oracle(a) => commands::oracle(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::BiasGrid(a) => grid::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            let mut cmd = Cli::command();
            cmd.error(clap::error::ErrorKind::ArgumentConflict, msg).exit()
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
