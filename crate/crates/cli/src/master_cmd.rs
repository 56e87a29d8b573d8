use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{ArgGroup, Args, Subcommand};
use gridwire_api::{ApiControlRequest, ApiControlResponse, ApiTagView, ControlAction, DEFAULT_BIND};
use gridwire_core::points::PointMap;
use gridwire_master::{Master, MasterConfig, OperateMode, TagValue, Validity};
use reqwest::StatusCode;
use tracing::{info, warn};

use crate::error::{runtime, usage, CliError};
use crate::tools::read_file;

const DEFAULT_API_URL: &str = "http://127.0.0.1:8080";

#[derive(Subcommand)]
pub enum MasterCommand {
    /// Run the configured sessions and serve the HTTP API until interrupted.
    Run(RunArgs),
    /// Print one tag from a running master.
    Read(ReadArgs),
    /// Issue a control through a running master.
    Operate(OperateArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Master config file (sessions and point map).
    #[arg(long, env = "GW_CONFIG")]
    config: PathBuf,
    /// API listen address.
    #[arg(long, env = "GW_API", default_value = DEFAULT_BIND)]
    api: SocketAddr,
    /// Write a JSON tag snapshot here on exit.
    #[arg(long, env = "GW_EXPORT")]
    export: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReadArgs {
    #[arg(long)]
    tag: String,
    /// Base URL of the master API.
    #[arg(long, env = "GW_API_URL", default_value = DEFAULT_API_URL)]
    api: String,
    /// Print the full tag view as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("action").required(true).args(["on", "off", "value"])))]
pub struct OperateArgs {
    #[arg(long)]
    tag: String,
    /// LATCH_ON a binary output.
    #[arg(long)]
    on: bool,
    /// LATCH_OFF a binary output.
    #[arg(long)]
    off: bool,
    /// Analog output value.
    #[arg(long, allow_negative_numbers = true)]
    value: Option<f64>,
    /// SELECT then OPERATE instead of DIRECT_OPERATE.
    #[arg(long)]
    select_operate: bool,
    #[arg(long, env = "GW_API_URL", default_value = DEFAULT_API_URL)]
    api: String,
}

pub async fn run(cmd: MasterCommand) -> Result<(), CliError> {
    match cmd {
        MasterCommand::Run(args) => run_master(args).await,
        MasterCommand::Read(args) => read(args).await,
        MasterCommand::Operate(args) => operate(args).await,
    }
}

async fn run_master(args: RunArgs) -> Result<(), CliError> {
    let config = MasterConfig::load(&args.config).map_err(usage)?;
    let map = PointMap::from_toml(&read_file(&config.map)?)
        .map_err(|e| usage(format!("{}: {e}", config.map.display())))?;
    if config.sessions.is_empty() {
        warn!("config has no sessions, serving an empty API");
    }
    let master = Arc::new(Master::start(config.sessions, &map).map_err(usage)?);
    let api = gridwire_api::serve(args.api, master.clone(), None).await.map_err(|e| {
        runtime(format!("cannot bind API on {}: {e}", args.api))
    })?;
    println!("api on http://{}", api.local_addr());
    tokio::signal::ctrl_c().await.map_err(runtime)?;
    info!("interrupted");
    api.shutdown().await.map_err(runtime)?;
    if let Some(path) = args.export {
        std::fs::write(&path, master.export_json())
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    master.shutdown().await;
    Ok(())
}

fn api_url(base: &str, path: &str) -> String {
    format!("{}{path}", base.trim_end_matches('/'))
}

/// Turns a non-2xx API reply into an error: 4xx is a usage problem, the rest runtime.
async fn api_error(resp: reqwest::Response) -> CliError {
    let status = resp.status();
    let body: serde_json::Value = resp.json().await.unwrap_or_default();
    let msg = body["error"].as_str().map(str::to_string).unwrap_or_else(|| status.to_string());
    match status {
        StatusCode::BAD_REQUEST | StatusCode::NOT_FOUND => usage(msg),
        _ => runtime(msg),
    }
}

fn show(v: Option<TagValue>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

async fn read(args: ReadArgs) -> Result<(), CliError> {
    let resp = reqwest::get(api_url(&args.api, &format!("/api/tags/{}", args.tag)))
        .await
        .map_err(|e| runtime(format!("cannot reach {}: {e}", args.api)))?;
    if !resp.status().is_success() {
        return Err(api_error(resp).await);
    }
    let tag: ApiTagView = resp.json().await.map_err(runtime)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&tag).map_err(runtime)?);
    } else {
        println!("{}", show(tag.inst_mag));
        let q = match tag.validity {
            Validity::Good => "good",
            Validity::Invalid => "invalid",
        };
        eprintln!("{} mag={} q={q}", tag.name, show(tag.mag));
    }
    Ok(())
}

async fn operate(args: OperateArgs) -> Result<(), CliError> {
    let action = match (args.on, args.off, args.value) {
        (true, false, None) => ControlAction::LatchOn,
        (false, true, None) => ControlAction::LatchOff,
        (false, false, Some(_)) => ControlAction::Analog,
        _ => return Err(usage("give exactly one of --on, --off, --value")),
    };
    let body = ApiControlRequest {
        tag: args.tag,
        action,
        value: args.value,
        mode: if args.select_operate {
            OperateMode::SelectOperate
        } else {
            OperateMode::Direct
        },
    };
    body.validate().map_err(usage)?;
    let resp = reqwest::Client::new()
        .post(api_url(&args.api, "/api/control"))
        .json(&body)
        .send()
        .await
        .map_err(|e| runtime(format!("cannot reach {}: {e}", args.api)))?;
    if !resp.status().is_success() {
        return Err(api_error(resp).await);
    }
    let reply: ApiControlResponse = resp.json().await.map_err(runtime)?;
    println!("{}", reply.status);
    if reply.status == "SUCCESS" {
        Ok(())
    } else {
        Err(runtime(format!("outstation answered {}", reply.status)))
    }
}
