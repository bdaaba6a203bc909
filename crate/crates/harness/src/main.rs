use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynelab::{load_config, run_command, Command, Format, HarnessError, Overrides, Preset};

#[derive(Debug, Parser)]
#[command(
    name = "dynelab",
    version,
    about = "Adaptive-dyne and heterodyne phase-estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Per-step LO phase and photocurrent records for a few pulses.
    Traj(RunArgs),
    /// Estimator distributions and statistics at one photon number.
    Dist(RunArgs),
    /// Variance against photon number, with reference limits.
    Sweep(RunArgs),
    /// Variance against signal phase over an equally spaced grid.
    Polar(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per ensemble.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, env = "DYNELAB_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or jsonl.
    #[arg(long)]
    format: Option<Format>,
    /// Parameter preset: ideal or paper-apparatus.
    #[arg(long)]
    preset: Option<Preset>,
}

impl CliCommand {
    fn split(self) -> (Command, RunArgs) {
        match self {
            CliCommand::Traj(a) => (Command::Traj, a),
            CliCommand::Dist(a) => (Command::Dist, a),
            CliCommand::Sweep(a) => (Command::Sweep, a),
            CliCommand::Polar(a) => (Command::Polar, a),
        }
    }
}

fn run(command: Command, args: RunArgs) -> Result<(), HarnessError> {
    let overrides = Overrides {
        preset: args.preset,
        seed: args.seed,
        trials: args.trials,
        format: args.format,
        output_dir: args.out,
    };
    let cfg = load_config(&args.config, &overrides)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let manifest = run_command(command, &cfg, workers)?;
    for file in &manifest.files {
        println!("{}", cfg.output_dir.join(&file.path).display());
    }
    if manifest.errors.is_empty() {
        Ok(())
    } else {
        for err in &manifest.errors {
            eprintln!("dynelab: {err}");
        }
        Err(HarnessError::EnsembleFailures {
            count: manifest.errors.len(),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (command, args) = cli.command.split();
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("dynelab: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
