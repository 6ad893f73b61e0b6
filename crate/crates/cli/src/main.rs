use std::process::ExitCode;

use archmap_cli::api::{serve, AppState};
use archmap_cli::commands::{self, Cli, Command, PrinciplesCommand};
use archmap_cli::error::{CliError, Result};
use archmap_cli::session::SessionConfig;
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::Value;

fn run(cli: Cli) -> Result<()> {
    let summary: Value = match cli.command {
        Command::Distances(a) => commands::distances(&a)?,
        Command::Cluster(a) => commands::cluster(&a)?,
        Command::Layout(a) => commands::layout(&a)?,
        Command::Search(a) => {
            let (summary, table) = commands::search(&a)?;
            println!("{table}");
            summary
        }
        Command::Principles { command: PrinciplesCommand::Eval(a) } => commands::principles_eval(&a)?,
        Command::Serve(a) => {
            let (state, err) = AppState::new(SessionConfig::from_args(&a));
            if let Some(e) = err {
                eprintln!("starting without a session: {}", e.to_json());
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, a.port))?;
            return Ok(());
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprintln!("{}", CliError::Usage(e.to_string().trim().to_string()).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
