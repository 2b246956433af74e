//! `pcvote`: simulation, theory checks, pool evaluation and pool generation.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use pcvote_core::eval::Method;
use pcvote_core::WeightFamily;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "pcvote", version, about = "Prefix-consistency weighted voting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo convergence runs on a transition kernel.
    Simulate(SimulateArgs),
    /// Population objective, threshold and dominance checks for a kernel.
    Theory(TheoryArgs),
    /// Statistics over an answer pool.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Generate an answer pool from a completions endpoint.
    GenPool(GenPoolArgs),
}

fn parse_weight(s: &str) -> Result<String, String> {
    WeightFamily::parse(s).map(|w| w.name()).map_err(|_| format!("unknown weight `{s}`; use linear, quadratic, cubic or powerN"))
}

fn parse_method(s: &str) -> Result<String, String> {
    s.parse::<Method>().map(|m| m.name()).map_err(|_| {
        let valid: Vec<String> = Method::all().iter().map(Method::name).collect();
        format!("unknown method `{s}`; valid methods: {}", valid.join(", "))
    })
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x < 1.0 => Ok(x),
        _ => Err(format!("`{s}` is not a number in (0, 1)")),
    }
}

#[derive(Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["rc", "kernel"])))]
pub struct SimulateArgs {
    /// Correct-answer reproduction rate of a binary kernel.
    #[arg(long, requires = "rw")]
    pub rc: Option<f64>,
    /// Wrong-answer reproduction rate of a binary kernel.
    #[arg(long, requires = "rc")]
    pub rw: Option<f64>,
    /// Kernel JSON file (m, correct, pi, T); runs a single convergence experiment.
    #[arg(long, conflicts_with_all = ["rc", "rw"])]
    pub kernel: Option<PathBuf>,
    /// Grid of pi(a*) values for the binary scan, as start:end:step.
    #[arg(long, default_value = "0.30:0.60:0.02")]
    pub pi_grid: String,
    /// Groups per trial.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "cubic", value_parser = parse_weight)]
    pub weight: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct TheoryArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    /// Evaluate in exact rational arithmetic.
    #[arg(long)]
    pub exact: bool,
    /// Power-family exponents to report.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub exponents: Vec<u32>,
}

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Per-signal macro AUROC over problems with mixed correctness.
    Auroc(AurocArgs),
    /// Empirical reproduction rates r_C, r_W and their gap D.
    Rates(RatesArgs),
    /// Budget-matched cost-accuracy curves.
    Curves(CurvesArgs),
    /// Token-efficiency ratios against majority voting.
    Ratios(RatiosArgs),
}

#[derive(Args, Clone, Serialize)]
pub struct PoolArgs {
    #[arg(long)]
    pub pool: PathBuf,
    /// JSONL equivalence edges used to re-cluster answers.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct RatesArgs {
    #[command(flatten)]
    pub pool: PoolArgs,
    #[arg(long, default_value = "0.75", value_parser = parse_fraction)]
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Missing {
    Drop,
    Impute,
}

#[derive(Args, Serialize)]
pub struct AurocArgs {
    #[command(flatten)]
    pub pool: PoolArgs,
    #[arg(long, default_value = "0.75", value_parser = parse_fraction)]
    pub tau: f64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Scores to rank; defaults to prefix consistency and every trace signal.
    #[arg(long, value_delimiter = ',')]
    pub signals: Vec<String>,
    #[arg(long, value_enum, default_value_t = Missing::Drop)]
    pub missing: Missing,
}

#[derive(Args, Clone, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub pool: PoolArgs,
    #[arg(long, default_value = "0.75", value_parser = parse_fraction)]
    pub tau: f64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// PC weight used when --methods is not given.
    #[arg(long, default_value = "cubic", value_parser = parse_weight)]
    pub weight: String,
    /// Comma-separated methods; defaults to mv and pc-<weight>.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<String>,
    /// log10 budget grid as start:end:step.
    #[arg(long, default_value = "3:7:0.01")]
    pub budget_grid: String,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Also run the adaptive-consistency and early-stopping sweeps.
    #[arg(long)]
    pub stopping: bool,
    /// Draws per stopping trial; defaults to the pool's N.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
}

#[derive(Args, Serialize)]
pub struct RatiosArgs {
    #[command(flatten)]
    pub curve: CurveArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.75,0.9,0.99", value_parser = parse_fraction)]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerbalArg {
    Binary,
    Percent,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerArg {
    Whitespace,
}

#[derive(Args, Serialize)]
pub struct GenPoolArgs {
    /// Endpoint settings (TOML). The API key is read from the environment
    /// variable named by `api_key_env`.
    #[arg(long)]
    pub config: PathBuf,
    /// JSONL problems: {"id", "prompt", "gold"}.
    #[arg(long)]
    pub prompts: PathBuf,
    /// Output directory for pool.jsonl and the manifest; reruns resume.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.75", value_parser = parse_fraction)]
    pub taus: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub verbal: Vec<VerbalArg>,
    /// Overrides `base_url` from the config file.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Overrides `benchmark` from the config file.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Truncate on a client-side tokenizer instead of endpoint tokens.
    #[arg(long, value_enum)]
    pub tokenizer: Option<TokenizerArg>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(&args),
        Command::Theory(args) => commands::theory::run(&args),
        Command::Eval(cmd) => commands::eval::run(&cmd),
        Command::GenPool(args) => commands::gen_pool::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
