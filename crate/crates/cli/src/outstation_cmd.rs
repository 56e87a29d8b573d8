use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Subcommand};
use gridwire_core::grid::{spawn_simulator, Pacing, RunnerConfig, Simulator};
use gridwire_core::points::{autogen_map, AutogenPolicy};
use gridwire_outstation::{serve, ServerConfig, DEFAULT_PORT};
use tracing::{info, warn};

use crate::error::{runtime, usage, CliError};
use crate::tools::{load_case, load_map};

#[derive(Subcommand)]
pub enum OutstationCommand {
    /// Run the simulator and serve every outstation of the map until interrupted.
    Run(RunArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Grid case file.
    #[arg(long, env = "GW_CASE")]
    case: PathBuf,
    /// Point map file; generated from the case when omitted.
    #[arg(long, env = "GW_MAP")]
    map: Option<PathBuf>,
    #[arg(long, env = "GW_BIND", default_value = "0.0.0.0")]
    bind: IpAddr,
    #[arg(long, env = "GW_PORT", default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Simulation step in milliseconds.
    #[arg(long, env = "GW_TICK_MS", default_value_t = 100)]
    tick_ms: u64,
    /// Run the simulation clock faster than wall time (see --speed).
    #[arg(long, env = "GW_TICK_VIRTUAL")]
    tick_virtual: bool,
    /// Simulated seconds per wall second with --tick-virtual.
    #[arg(long, env = "GW_SPEED", default_value_t = 100.0, requires = "tick_virtual")]
    speed: f64,
    /// Stop after this many simulated seconds.
    #[arg(long, env = "GW_DURATION")]
    duration: Option<f64>,
    /// JSON-lines command log.
    #[arg(long, env = "GW_COMMAND_LOG")]
    command_log: Option<PathBuf>,
    /// Raw traffic capture for `framedump`.
    #[arg(long, env = "GW_CAPTURE")]
    capture: Option<PathBuf>,
}

pub async fn run(cmd: OutstationCommand) -> Result<(), CliError> {
    match cmd {
        OutstationCommand::Run(args) => run_server(args).await,
    }
}

async fn run_server(args: RunArgs) -> Result<(), CliError> {
    if args.tick_ms == 0 {
        return Err(usage("--tick-ms must be positive"));
    }
    if !(args.speed.is_finite() && args.speed > 0.0) {
        return Err(usage("--speed must be a positive number"));
    }
    if let Some(d) = args.duration {
        if !(d.is_finite() && d > 0.0) {
            return Err(usage("--duration must be a positive number of seconds"));
        }
    }
    let case = Arc::new(load_case(&args.case)?);
    let map = match &args.map {
        Some(path) => load_map(path, &case)?,
        None => {
            warn!("no --map given, generating one from the case");
            autogen_map(&case, &AutogenPolicy::default()).map_err(usage)?
        }
    };
    let tick = Duration::from_millis(args.tick_ms);
    let pacing = if args.tick_virtual {
        Pacing::Accelerated(args.speed)
    } else {
        Pacing::RealTime
    };
    let (sim, sim_task) = spawn_simulator(Simulator::new(case), RunnerConfig { tick, pacing });
    let config = ServerConfig {
        bind: SocketAddr::new(args.bind, args.port),
        command_log: args.command_log,
        capture: args.capture,
        ..ServerConfig::default()
    };
    let server = match serve(config, &map, sim.clone()).await {
        Ok(s) => s,
        Err(e) => {
            sim.shutdown().await;
            return Err(runtime(e));
        }
    };
    println!("listening on {}", server.local_addr());
    let mut clock = sim.subscribe();
    let until_ms = args.duration.map(|d| (d * 1000.0).round() as u64);
    let done = async {
        match until_ms {
            Some(limit) => {
                let _ = clock.wait_for(|s| s.time_ms() >= limit).await;
            }
            None => std::future::pending().await,
        }
    };
    tokio::select! {
        r = tokio::signal::ctrl_c() => {
            r.map_err(runtime)?;
            info!("interrupted");
        }
        _ = done => info!("simulated duration reached"),
    }
    let log = server.command_log();
    server.shutdown().await;
    sim.shutdown().await;
    let _ = sim_task.await;
    info!(entries = log.len(), "stopped");
    Ok(())
}
