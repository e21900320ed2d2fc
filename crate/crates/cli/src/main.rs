use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unirec_cli::{load_config, run, validate, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "unirec", version, about = "Experiments for unified recursive gradient estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment and write report.json, trajectories.csv and plots.
    Run(Common),
    /// Check a config and print the resolved parameters without running.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_plots: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(c) => {
            let cfg = load_config(&c.config, c.seed)?;
            let opts = RunOptions { out: c.out, seed: c.seed, workers: c.workers, plots: !c.no_plots };
            let (dir, report) = run(&cfg, &opts)?;
            println!("[{}] wrote {} (hash {})", cfg.kind.name(), dir.display(), &report.determinism_hash[..16]);
            Ok(())
        }
        Command::Validate(c) => {
            let cfg = load_config(&c.config, c.seed)?;
            let resolved = validate(&cfg)?;
            println!("ok");
            println!("{}", serde_json::to_string_pretty(&resolved).map_err(|e| CliError::Runtime(e.to_string()))?);
            Ok(())
        }
    }
}
