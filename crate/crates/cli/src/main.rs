use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acas_core::mtourism::{load_cas, run_scenario, RunOptions};
use acas_core::weaver::NotifyMode;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "acas",
    version,
    about = "Context-aware adaptation scenario runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script against the restaurants search service.
    Run {
        #[arg(long, value_name = "FILE")]
        strategies: PathBuf,
        #[arg(long, value_name = "FILE")]
        scenario: PathBuf,
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Print the weave trace after each call.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_enum, default_value_t = Mode::Sync)]
        mode: Mode,
    },
    /// Check a strategy document and print it in canonical form.
    Validate {
        #[arg(long, value_name = "FILE")]
        strategies: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sync,
    Async,
}

impl From<Mode> for NotifyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sync => NotifyMode::Sync,
            Mode::Async => NotifyMode::Async,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Run {
            strategies,
            scenario,
            data,
            trace,
            mode,
        } => {
            let script = String::from_utf8(read(&scenario)?).context("scenario is not UTF-8")?;
            let options = RunOptions {
                trace,
                mode: mode.into(),
            };
            match run_scenario(&script, &read(&strategies)?, &read(&data)?, options) {
                Ok(transcript) => {
                    print!("{transcript}");
                    Ok(transcript.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(2)
                }
            }
        }
        Command::Validate { strategies } => match load_cas(&read(&strategies)?) {
            Ok(cas) => {
                print!(
                    "{}",
                    String::from_utf8_lossy(&acas_core::cas::serialize_strategy(&cas))
                );
                Ok(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(2)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
