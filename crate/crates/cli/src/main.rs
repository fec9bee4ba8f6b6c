mod commands;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "brainca", version, about = "Attention-based neural cellular automata experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train pattern formation runs. Any config key can also be passed as `--key value`.
    Morpho(MorphoArgs),
    /// Train lunar lander controllers. Any config key can also be passed as `--key value`.
    Lander(LanderArgs),
    /// Generate a topology file.
    Topo(TopoArgs),
    /// Survival statistics over a directory of run records.
    Analyze(AnalyzeArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck,
}

#[derive(Debug, Args)]
struct MorphoArgs {
    /// v3, lr3, v5, lr5 or all.
    #[arg(long, default_value = "all")]
    condition: String,
    /// Inclusive seed range `A..B`, or a single seed.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// 8x8 pattern and seeds 42..51 unless overridden.
    #[arg(long)]
    quick: bool,
    /// `key = value` file applied before command-line keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct LanderArgs {
    /// vanilla, vanilla-lr, tshape, tshape-lr or all.
    #[arg(long, default_value = "all")]
    condition: String,
    /// Seeds per condition, starting at `--first-seed`.
    #[arg(long, default_value_t = 5)]
    runs: u64,
    #[arg(long, default_value_t = 42)]
    first_seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum TopoKind {
    Moore,
    ScaleFree,
    Tshape,
    Patch,
}

#[derive(Debug, Args)]
struct TopoArgs {
    #[arg(long, value_enum)]
    kind: TopoKind,
    #[arg(long, default_value_t = 16)]
    rows: usize,
    #[arg(long, default_value_t = 16)]
    cols: usize,
    #[arg(long, default_value_t = 1)]
    radius: usize,
    /// Scale-free hubs; defaults to `max(1, N / 25)`.
    #[arg(long)]
    hubs: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    zipf_exponent: f64,
    #[arg(long, default_value_t = 6)]
    max_out_degree: usize,
    /// T-shape block side.
    #[arg(long, default_value_t = 8)]
    block: usize,
    /// Patch wiring on the T-shape instead of grid quadrants.
    #[arg(long)]
    tshape: bool,
    #[arg(long, default_value_t = 6)]
    patch_targets: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Directory containing `runs.jsonl`, or a JSONL file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Censoring horizon in episodes; defaults to the records' episode budget.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = brainca::harness::DEFAULT_PERMUTATIONS)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub enum Failure {
    Usage(String),
    Run(String),
}

impl From<brainca::Error> for Failure {
    fn from(e: brainca::Error) -> Self {
        match e {
            brainca::Error::InvalidArgument(_) | brainca::Error::Parse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let (argv, keys) = match overrides::split_config_flags(argv) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Morpho(a) => commands::morpho(a, &keys),
        Command::Lander(a) => commands::lander(a, &keys),
        Command::Topo(a) => commands::topo(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Gradcheck => commands::gradcheck(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("run failed: {msg}");
            ExitCode::from(2)
        }
    }
}
