//! Experiment driver for mutually excited random walks.
//!
//! Subcommands: simulate | sweep | chain | bounds | regen | verify.
//! Exit codes: 0 success, 2 usage, 3 budget/validation failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{parse_grid, ConfigEcho};

#[derive(Parser)]
#[command(
    name = "merw",
    version,
    about = "Mutually excited random walks: simulation, estimators, exact truncated-chain speeds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo speed estimation at a single drift
    Simulate(SimulateArgs),
    /// Direct and regeneration estimators over a drift grid
    Sweep(SweepArgs),
    /// Exact speed v_k of the truncated chain
    Chain(ChainArgs),
    /// Closed forms of the induced environment and the speed bounds
    Bounds(BoundsArgs),
    /// Regeneration analysis of a single recorded trajectory
    Regen(RegenArgs),
    /// Re-derive one row of an artifact from its embedded config
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed; every trial seed derives from it
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (0 = automatic)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// Drift probability in [0.5, 1]
    #[arg(long, value_parser = parse_p)]
    p: f64,
    /// Symmetric cookies per site
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Drift grid start:step:end, e.g. 0.55:0.025:0.95
    #[arg(long, value_parser = parse_grid_spec)]
    p_grid: String,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Right-censoring window for regeneration detection
    #[arg(long, default_value_t = 10_000)]
    censor: u64,
    /// Significance factor: a drop is significant when it exceeds
    /// factor * (se1 + se2)
    #[arg(long, default_value_t = 2.0)]
    drop_threshold: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ChainArgs {
    /// Truncation depth (even, at least 2)
    #[arg(long, value_parser = parse_even_k)]
    k: u32,
    #[arg(long, default_value_t = 2)]
    m: u32,
    /// Single drift value
    #[arg(long, value_parser = parse_p, conflicts_with = "p_grid")]
    p: Option<f64>,
    /// Drift grid start:step:end
    #[arg(long, value_parser = parse_grid_spec)]
    p_grid: Option<String>,
    /// Reachable-state budget
    #[arg(long)]
    budget: Option<usize>,
    /// Drift-iteration tolerance
    #[arg(long)]
    tolerance: Option<f64>,
    /// Also export the sparse transition model (CSV triplets)
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BoundsArgs {
    /// Drift grid start:step:end inside [0.5, 1)
    #[arg(long, value_parser = parse_grid_spec)]
    p_grid: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RegenArgs {
    #[arg(long, value_parser = parse_p)]
    p: f64,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Trial index within the campaign keyed by the master seed
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long, default_value_t = 10_000)]
    censor: u64,
    /// Drop the first regeneration gap from the speed estimate
    #[arg(long)]
    burn_in: bool,
    /// Also export the trajectory (.csv for n,x,y,R,L; anything else for
    /// binary step pairs)
    #[arg(long)]
    traj_out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Artifact to verify (csv or json)
    #[arg(long)]
    file: PathBuf,
    /// Row to re-derive (default: chosen from the embedded seed)
    #[arg(long)]
    row: Option<u64>,
}

fn parse_p(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.5..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("drift p must lie in [0.5, 1], got {v}"))
    }
}

fn parse_even_k(s: &str) -> Result<u32, String> {
    let v: u32 = s.parse().map_err(|e| format!("{e}"))?;
    if v < 2 {
        return Err(format!("truncation depth k must be at least 2, got {v}"));
    }
    if !v.is_multiple_of(2) {
        return Err(format!(
            "truncation depth k must be even (construction convention, not a \
             mathematical obstruction), got {v}"
        ));
    }
    Ok(v)
}

fn parse_grid_spec(s: &str) -> Result<String, String> {
    parse_grid(s)
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

/// Usage-level failures detected after clap parsing; exit code 2.
struct UsageError(String);

enum Dispatch {
    Usage(UsageError),
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for Dispatch {
    fn from(err: anyhow::Error) -> Self {
        Dispatch::Failure(err)
    }
}

impl From<UsageError> for Dispatch {
    fn from(err: UsageError) -> Self {
        Dispatch::Usage(err)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Dispatch::Usage(UsageError(msg))) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Dispatch::Failure(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}

fn install_pool(workers: usize) -> Result<rayon::ThreadPool, Dispatch> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Dispatch::Failure(anyhow::anyhow!(e)))
}

fn dispatch(cli: Cli) -> Result<(), Dispatch> {
    match cli.command {
        Command::Simulate(args) => {
            reject_svg(args.common.format, "simulate")?;
            let mut echo = ConfigEcho::new("simulate", args.common.seed, args.common.format.name());
            echo.p = Some(args.p);
            echo.m = Some(args.m);
            echo.horizon = Some(args.horizon);
            echo.trials = Some(args.trials);
            let pool = install_pool(args.common.workers)?;
            let content = pool.install(|| commands::run_simulate(&echo))?;
            output::emit(args.common.out.as_deref(), &content).map_err(Dispatch::Failure)
        }
        Command::Sweep(args) => {
            let mut echo = ConfigEcho::new("sweep", args.common.seed, args.common.format.name());
            echo.p_grid = Some(args.p_grid);
            echo.m = Some(args.m);
            echo.horizon = Some(args.horizon);
            echo.trials = Some(args.trials);
            echo.censor = Some(args.censor);
            echo.drop_threshold = Some(args.drop_threshold);
            let pool = install_pool(args.common.workers)?;
            let content = pool.install(|| commands::run_sweep(&echo))?;
            output::emit(args.common.out.as_deref(), &content).map_err(Dispatch::Failure)
        }
        Command::Chain(args) => {
            reject_svg(args.common.format, "chain")?;
            let grid_spec = match (args.p, &args.p_grid) {
                (Some(p), None) => format!("{p}:1:{p}"),
                (None, Some(g)) => g.clone(),
                (None, None) => return Err(UsageError("chain needs --p or --p-grid".into()).into()),
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let mut echo = ConfigEcho::new("chain", args.common.seed, args.common.format.name());
            echo.k = Some(args.k);
            echo.m = Some(args.m);
            echo.p_grid = Some(grid_spec);
            echo.budget = args.budget;
            echo.tolerance = args.tolerance;
            let pool = install_pool(args.common.workers)?;
            let content = pool.install(|| commands::run_chain(&echo, args.model_out.as_deref()))?;
            output::emit(args.common.out.as_deref(), &content).map_err(Dispatch::Failure)
        }
        Command::Bounds(args) => {
            reject_svg(args.common.format, "bounds")?;
            let grid = parse_grid(&args.p_grid).map_err(|e| UsageError(e.to_string()))?;
            if grid.iter().any(|p| !(0.5..1.0).contains(p)) {
                return Err(UsageError(
                    "bounds grid must lie inside [0.5, 1): the induced environment \
                     degenerates at p = 1"
                        .into(),
                )
                .into());
            }
            let mut echo = ConfigEcho::new("bounds", args.common.seed, args.common.format.name());
            echo.p_grid = Some(args.p_grid);
            let content = commands::run_bounds(&echo)?;
            output::emit(args.common.out.as_deref(), &content).map_err(Dispatch::Failure)
        }
        Command::Regen(args) => {
            reject_svg(args.common.format, "regen")?;
            let mut echo = ConfigEcho::new("regen", args.common.seed, args.common.format.name());
            echo.p = Some(args.p);
            echo.m = Some(args.m);
            echo.horizon = Some(args.horizon);
            echo.trial = Some(args.trial);
            echo.censor = Some(args.censor);
            echo.burn_in = args.burn_in.then_some(true);
            let content = commands::run_regen(&echo, args.traj_out.as_deref())?;
            output::emit(args.common.out.as_deref(), &content).map_err(Dispatch::Failure)
        }
        Command::Verify(args) => {
            let content = std::fs::read_to_string(&args.file)
                .map_err(|e| Dispatch::Failure(anyhow::anyhow!(e)))?;
            let outcome = commands::verify_artifact(&content, args.row)?;
            if outcome.matched {
                println!(
                    "verified: row {} of {} re-derived identically",
                    outcome.row_index, outcome.row_count
                );
                Ok(())
            } else {
                Err(Dispatch::Failure(anyhow::anyhow!(
                    "row {} mismatch:\n  stored : {}\n  derived: {}",
                    outcome.row_index,
                    outcome.stored,
                    outcome.derived
                )))
            }
        }
    }
}

fn reject_svg(format: Format, command: &str) -> Result<(), Dispatch> {
    if format == Format::Svg {
        return Err(UsageError(format!(
            "--format svg is only available for sweep, not {command}"
        ))
        .into());
    }
    Ok(())
}
