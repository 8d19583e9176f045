//! `gradpred`: analyze gradient traces, export spectra, project, simulate the
//! optimization testbeds and generate synthetic traces.
//!
//! Exit status: 0 success, 2 input or configuration error, 3 undefined
//! metric, 4 numerical failure.

mod analyze;
mod generate;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gradpred::harness::{LogRegOptimizer, LossKind, OmdVariant};
use gradpred::projection::DEFAULT_K;
use gradpred::spectral::DEFAULT_EPSILONS;
use gradpred::PredictorConfig;

#[derive(Parser, Debug)]
#[command(
    name = "gradpred",
    version,
    about = "Predictability and predictable rank of gradient trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Path-length, predictability index and predictable rank of a trace.
    Analyze(AnalyzeArgs),
    /// Singular spectrum of a trace's increment matrix as CSV.
    Spectrum(SpectrumArgs),
    /// Sketch a trace with a seeded Gaussian projection.
    Project(ProjectArgs),
    /// Run a certification testbed.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Write a synthetic trace.
    #[command(subcommand)]
    Generate(GenerateCommand),
}

#[derive(Args, Debug)]
struct TraceInput {
    /// Trace file; `.csv` is read as CSV, anything else as GTRC binary.
    #[arg(long)]
    trace: PathBuf,
    /// Stored projection to apply before analysis.
    #[arg(long)]
    proj: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    input: TraceInput,
    /// Comma-separated predictor list, e.g. `zero,one-step,ema:0.9,trend:1.0`.
    #[arg(long, value_delimiter = ',', default_values_t = PredictorConfig::table_defaults())]
    predictors: Vec<PredictorConfig>,
    /// Window length for windowed metrics.
    #[arg(long)]
    window: Option<usize>,
    /// Window stride; defaults to the window length.
    #[arg(long, requires = "window")]
    stride: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPSILONS.to_vec())]
    epsilons: Vec<f64>,
    /// Run label; defaults to the trace's `run` metadata, then its file stem.
    #[arg(long)]
    run: Option<String>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Predictability table: one row per run, one column per predictor.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Rank table; defaults to the `--out-csv` path with a `.rank` suffix
    /// before the extension.
    #[arg(long)]
    out_rank_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    input: TraceInput,
    #[arg(long)]
    out_csv: PathBuf,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Sketch dimension for a new projection.
    #[arg(long, default_value_t = DEFAULT_K, conflicts_with = "proj")]
    k: usize,
    #[arg(long, default_value_t = 0, conflicts_with = "proj")]
    seed: u64,
    /// Reuse a stored projection instead of sampling one.
    #[arg(long)]
    proj: Option<PathBuf>,
    /// Where to store a newly sampled projection.
    #[arg(long, conflicts_with = "proj")]
    proj_out: Option<PathBuf>,
    /// Projected trace.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SimulateCommand {
    /// Optimistic mirror descent on online linear losses over a ball.
    Omd(OmdArgs),
    /// Gradient descent driven by history-based proxy directions.
    ProxyGd(ProxyGdArgs),
}

#[derive(Args, Debug)]
struct SeedSweep {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

#[derive(Args, Debug)]
pub struct OmdArgs {
    #[command(flatten)]
    sweep: SeedSweep,
    #[arg(long, default_value_t = LossKind::Drifting)]
    losses: LossKind,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 500)]
    horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, value_delimiter = ',', default_values_t = ["one-step", "ema:0.9", "ema:0.99"].map(|s| s.parse::<PredictorConfig>().unwrap()))]
    predictors: Vec<PredictorConfig>,
    /// Fixed step size; tuned from the path-length when omitted.
    #[arg(long)]
    eta: Option<f64>,
    /// Step size used when tuning is degenerate (perfect prediction).
    #[arg(long, default_value_t = 1.0)]
    fallback_eta: f64,
    #[arg(long, default_value_t = OmdVariant::TwoStep)]
    variant: OmdVariant,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProxyGdArgs {
    #[command(flatten)]
    sweep: SeedSweep,
    /// `quadratic` or `quad-plus-cos`.
    #[arg(long, default_value = "quad-plus-cos")]
    objective: String,
    /// Cosine weight for `quad-plus-cos`.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[arg(long, value_delimiter = ',', default_values_t = ["ema:0.9".parse::<PredictorConfig>().unwrap()])]
    predictors: Vec<PredictorConfig>,
    /// Step size; `1/L` of each instance when omitted. Must not exceed `1/L`.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum GenerateCommand {
    /// Trace with planted low-rank increments plus noise.
    Planted(PlantedArgs),
    /// Full-batch logistic-regression gradients.
    Logreg(LogRegArgs),
}

#[derive(Args, Debug)]
pub struct PlantedArgs {
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Number of increments; the trace has one more step.
    #[arg(long, default_value_t = 300)]
    increments: usize,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Share of increment energy in the noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LogRegArgs {
    /// JSON configuration; overrides `--optimizer`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = LogRegOptimizer::SgdMomentum)]
    optimizer: LogRegOptimizer,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// A failed command: exit status plus a one-line diagnostic.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<gradpred::Error> for CliError {
    fn from(e: gradpred::Error) -> Self {
        CliError {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

pub type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze::analyze(&a),
        Command::Spectrum(a) => analyze::spectrum(&a),
        Command::Project(a) => analyze::project(&a),
        Command::Simulate(SimulateCommand::Omd(a)) => simulate::omd(&a),
        Command::Simulate(SimulateCommand::ProxyGd(a)) => simulate::proxy_gd(&a),
        Command::Generate(GenerateCommand::Planted(a)) => generate::planted(&a),
        Command::Generate(GenerateCommand::Logreg(a)) => generate::logreg(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
