mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use dasense_core::sequential::{DEFAULT_ALPHA, DEFAULT_FUTILITY_P, DEFAULT_PEEKS};
use dasense_core::PlanKind;

/// Significance, power, and sequential-testing tools for pairwise human
/// evaluation of systems scored on a 0-100 scale.
///
/// Exit codes: 0 success (or `decide`: continue), 1 error, 2 usage error,
/// 10 stop significant, 20 stop futile, 30 budget exhausted.
#[derive(Debug, Parser)]
#[command(name = "dasense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a judgment file and summarize each comparison.
    Validate(ValidateArgs),
    /// Significance counts and observed minimum detectable effect.
    Mde(MdeArgs),
    /// Judgments needed to detect a difference with a target pairwise accuracy.
    Samplesize(SampleSizeArgs),
    /// Simulated rank-sum power for two Gamma judgment models.
    Power(PowerArgs),
    /// Build a sequential plan and write it as JSON.
    Plan(PlanArgs),
    /// Apply a plan's decision rule to the judgments collected so far.
    Decide(DecideArgs),
    /// Bootstrap benchmark of testing procedures over a corpus.
    Simulate(SimulateArgs),
    /// Data efficiency of a control-variates estimator.
    De(DeArgs),
    /// Write a synthetic judgment corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct MdeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = dasense_core::power::DEFAULT_TARGET_RATE)]
    target_rate: f64,
    /// One row per language pair instead of a single corpus row.
    #[arg(long)]
    by_language_pair: bool,
    /// Directory for mde.json and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleSizeArgs {
    /// Difference in mean score to detect.
    #[arg(long)]
    delta: f64,
    /// Mean score of the reference system.
    #[arg(long)]
    mean: f64,
    /// Judgment variance shared by both systems.
    #[arg(long)]
    variance: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Target pairwise accuracy (1 - alpha)(1 - beta).
    #[arg(long, default_value_t = 0.9)]
    accuracy: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest total judgment count to consider.
    #[arg(long, default_value_t = dasense_core::power::DEFAULT_SAMPLE_SIZE_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[arg(long)]
    mean_a: f64,
    #[arg(long)]
    mean_b: f64,
    #[arg(long)]
    variance: f64,
    /// Total judgments across both systems.
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanSpec {
    #[arg(long)]
    kind: Option<PlanKind>,
    /// Total judgments across both systems.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_PEEKS)]
    peeks: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_FUTILITY_P)]
    futility_p: f64,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    spec: PlanSpec,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["plan", "kind"])))]
struct DecideArgs {
    /// Plan JSON written by `plan`.
    #[arg(long, conflicts_with_all = ["kind", "budget"])]
    plan: Option<PathBuf>,
    #[command(flatten)]
    spec: PlanSpec,
    /// Judgments accumulated so far.
    #[arg(long)]
    input: PathBuf,
    /// Comparison to decide on when the file holds several.
    #[arg(long)]
    comparison: Option<String>,
    /// 1-based index of the look being taken.
    #[arg(long)]
    peek: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Plan kinds to benchmark (repeatable or comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = PlanKind::ALL)]
    kind: Vec<PlanKind>,
    #[arg(long, value_delimiter = ',', default_values_t = [600, 1200, 2300, 3600])]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_PEEKS)]
    peeks: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = dasense_core::harness::DEFAULT_REPS)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// |true_diff| cut between the small and large splits.
    #[arg(long, default_value_t = dasense_core::harness::DEFAULT_SPLIT_THRESHOLD)]
    split_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    bin_width: f64,
    /// Worker threads (defaults to available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("noise").required(true).args(["reducible", "gamma"])))]
struct DeArgs {
    /// Correlation between metric and human scores.
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    /// Share of judgment variance explained by true quality.
    #[arg(long)]
    reducible: Option<f64>,
    /// Noise-to-signal variance ratio.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    comparisons: usize,
    #[arg(long, default_value_t = 600)]
    per_system: usize,
    #[arg(long, default_value_t = 75.0)]
    mean: f64,
    #[arg(long, default_value_t = 729.0)]
    variance: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Judgment CSV to write.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => commands::validate(&args),
        Command::Mde(args) => commands::mde(&args),
        Command::Samplesize(args) => commands::samplesize(&args),
        Command::Power(args) => commands::power(&args),
        Command::Plan(args) => commands::plan(&args),
        Command::Decide(args) => commands::decide(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::De(args) => commands::de(&args),
        Command::Synth(args) => commands::synth(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
