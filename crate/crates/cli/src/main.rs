//! `scarmap`: substrate generation, simulation, electrogram recording,
//! dataset assembly, evaluation and plotting as resumable pipeline stages.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgAction, Parser, Subcommand};

mod commands;
mod config;
mod render;
mod stage;

use config::{PipelineConfig, Preset};
use stage::Workspace;

/// Bad input or configuration; exits with status 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(
    name = "scarmap",
    version,
    about = "Cardiac scar-map simulation and evaluation pipeline"
)]
struct Cli {
    /// TOML or JSON file overriding preset values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replace existing stage outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Directory holding the stage folders.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate substrate diffusion tensor fields.
    Gen(commands::gen::Args),
    /// Run the monodomain model on every substrate.
    Simulate(commands::simulate::Args),
    /// Compute electrograms from recorded potentials.
    Egm(commands::egm::Args),
    /// Cut electrograms into samples and write the dataset.
    Dataset(commands::dataset::Args),
    /// Score predicted fields against the dataset targets.
    Eval(commands::eval::Args),
    /// Wavelet surrogate tests for predicted fields.
    Surrogate(commands::surrogate::Args),
    /// Render an artifact as PNG or CSV.
    Plot(commands::plot::Args),
}

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub seed: u64,
    pub ws: Workspace,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Invalid("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let ctx = Ctx {
        cfg: PipelineConfig::load(cli.preset, cli.config.as_deref())?,
        seed: cli.seed,
        ws: Workspace::new(cli.workdir, cli.force),
    };
    match &cli.command {
        Command::Gen(a) => commands::gen::run(&ctx, a),
        Command::Simulate(a) => commands::simulate::run(&ctx, a),
        Command::Egm(a) => commands::egm::run(&ctx, a),
        Command::Dataset(a) => commands::dataset::run(&ctx, a),
        Command::Eval(a) => commands::eval::run(&ctx, a),
        Command::Surrogate(a) => commands::surrogate::run(&ctx, a),
        Command::Plot(a) => commands::plot::run(&ctx, a),
    }
}

/// 1 for I/O failures, 2 for invalid input, 3 for numerical instability.
fn exit_code(e: &anyhow::Error) -> u8 {
    use scarmap_core::Error as CoreError;
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<CoreError>() {
            return match err {
                CoreError::Instability { .. } => 3,
                CoreError::Io { .. } => 1,
                _ => 2,
            };
        }
        if cause.is::<Invalid>() {
            return 2;
        }
    }
    1
}
