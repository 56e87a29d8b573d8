//! `gridwire` command line: run the outstation server or the master, talk to
//! a running master's API, generate point maps and decode captures.

mod error;
mod master_cmd;
mod outstation_cmd;
mod tools;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "gridwire", version, about = "DNP3 SCADA testbed on a simulated grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid simulator plus DNP3 outstation server.
    Outstation {
        #[command(subcommand)]
        command: outstation_cmd::OutstationCommand,
    },
    /// DNP3 master sessions, tag database and HTTP API.
    Master {
        #[command(subcommand)]
        command: master_cmd::MasterCommand,
    },
    /// Generate a point map for every substation of a case.
    Mapgen(tools::MapgenArgs),
    /// Decode a traffic capture to one line per link frame.
    Framedump(tools::FramedumpArgs),
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("GW_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result: Result<(), CliError> = match cli.command {
        Command::Outstation { command } => outstation_cmd::run(command).await,
        Command::Master { command } => master_cmd::run(command).await,
        Command::Mapgen(args) => tools::mapgen(args),
        Command::Framedump(args) => tools::framedump(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
