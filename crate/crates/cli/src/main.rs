use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use hflow_core::harness::{error_exit_code, init_thread_pool, load_config, run_experiment, Operation};
use hflow_core::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    SpaceCheck,
    Prox,
    Flow,
    Ppa,
    Median,
    Mean,
    Center,
    Mosco,
    Wijsman,
    Ar,
}

impl From<Command> for Operation {
    fn from(c: Command) -> Self {
        match c {
            Command::SpaceCheck => Operation::SpaceCheck,
            Command::Prox => Operation::Prox,
            Command::Flow => Operation::Flow,
            Command::Ppa => Operation::Ppa,
            Command::Median => Operation::Median,
            Command::Mean => Operation::Mean,
            Command::Center => Operation::Center,
            Command::Mosco => Operation::Mosco,
            Command::Wijsman => Operation::Wijsman,
            Command::Ar => Operation::Ar,
        }
    }
}

/// Run a convex-analysis experiment described by a JSON config.
///
/// Exit status: 0 pass, 1 config error, 2 assertion failure, 3 solver failure.
#[derive(Debug, Parser)]
#[command(name = "hflow", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for summary.json and CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli) -> Result<i32, Error> {
    init_thread_pool()?;
    let mut cfg = load_config(&cli.config)?;
    let op = Operation::from(cli.command);
    if cfg.operation != op {
        return Err(Error::Config {
            path: "operation".into(),
            message: format!("config is for `{}`, not `{}`", cfg.operation.name(), op.name()),
        });
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let start = Instant::now();
    let summary = run_experiment(&cfg, cli.out.as_deref())?;
    eprintln!("{}: {:?} in {:.3}s", op.name(), summary.status, start.elapsed().as_secs_f64());
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
