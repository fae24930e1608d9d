use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridmech::commands;
use hybridmech::{CliError, CliResult, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "hybridmech", version, about = "Simulate and check hybrid mechanical systems with impacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Residual tolerance for `check`.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory; writes trajectory.csv, events.csv, summary.json.
    Simulate,
    /// Residual checks of an invariant form; writes check.json.
    Check,
    /// Occupancy grid from iterated time-1 maps; writes density.csv, density.json.
    Density,
    /// Zeno detection on one trajectory; writes zeno.json.
    Zeno,
    /// Print the system catalog.
    ListSystems,
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides { seed: cli.seed, out: cli.out.clone(), tolerance: cli.tolerance })?;
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<String> {
    let outcome = match cli.command {
        Command::ListSystems => return commands::list_systems(),
        Command::Simulate => commands::simulate(&load(cli)?)?,
        Command::Check => commands::check(&load(cli)?)?.0,
        Command::Density => commands::density(&load(cli)?)?.0,
        Command::Zeno => commands::zeno(&load(cli)?)?.0,
    };
    let files: Vec<String> = outcome.files.iter().map(|f| f.display().to_string()).collect();
    Ok(format!("{}\nwrote {}\n", outcome.message, files.join(", ")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hybridmech: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
