mod config;
mod experiments;
mod output;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] carleman_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 usage, 3 numerical instability, 4 resource guard, 1 otherwise.
    fn exit_code(&self) -> u8 {
        use carleman_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::Config(_) | E::Domain(_) | E::Shape { .. } | E::GridMismatch => 2,
                E::Instability { .. } | E::BlowUp { .. } => 3,
                E::ResourceGuard(_) | E::BigCount { .. } => 4,
                _ => 1,
            },
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

fn load(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn execute(command: Command) -> Result<(), CliError> {
    let config = match command {
        Command::Experiment(c) => c,
        Command::Run { config } => load(&config)?,
    };
    let report = experiments::run(&config)?;
    output::emit(&config, &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("carleman-hydro: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
