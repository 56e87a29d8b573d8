use std::io::Read;
use std::path::{Path, PathBuf};

use clap::Args;
use gridwire_core::grid::GridCase;
use gridwire_core::points::{autogen_map, AutogenPolicy, PointMap, Target};
use gridwire_core::proto::dump_capture;

use crate::error::{runtime, usage, CliError};

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

pub fn load_case(path: &Path) -> Result<GridCase, CliError> {
    GridCase::from_toml(&read_file(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Parses a map and checks every point against the case, listing all bad points.
pub fn load_map(path: &Path, case: &GridCase) -> Result<PointMap, CliError> {
    let map = PointMap::from_toml(&read_file(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let bad: Vec<String> = map
        .outstations()
        .iter()
        .flat_map(|os| {
            os.points
                .iter()
                .filter(|p| Target::resolve(case, p.device, &p.key).is_none())
                .map(|p| format!("  {} ({} {} not in case)", p.tag_name(os.number), p.device, p.key))
        })
        .collect();
    if !bad.is_empty() {
        return Err(usage(format!(
            "{}: {} point(s) do not match the case:\n{}",
            path.display(),
            bad.len(),
            bad.join("\n")
        )));
    }
    Ok(map)
}

#[derive(Args)]
pub struct MapgenArgs {
    /// Grid case file.
    #[arg(long, env = "GW_CASE")]
    case: PathBuf,
    /// Output map file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Analog deadband as a fraction of device rating.
    #[arg(long, default_value_t = AutogenPolicy::default().deadband_fraction)]
    deadband_fraction: f64,
}

pub fn mapgen(args: MapgenArgs) -> Result<(), CliError> {
    let case = load_case(&args.case)?;
    if !(args.deadband_fraction.is_finite() && args.deadband_fraction >= 0.0) {
        return Err(usage("--deadband-fraction must be a non-negative number"));
    }
    let policy = AutogenPolicy {
        deadband_fraction: args.deadband_fraction,
        ..AutogenPolicy::default()
    };
    let map = autogen_map(&case, &policy).map_err(usage)?;
    for os in map.outstations() {
        eprintln!("outstation {} ({}): {} points", os.number, os.name, os.points.len());
    }
    let text = map.to_toml();
    match args.output {
        Some(path) => std::fs::write(&path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Args)]
pub struct FramedumpArgs {
    /// Capture file written by `outstation run --capture`; `-` reads stdin.
    #[arg(long = "pcapish", value_name = "CAPTURE")]
    capture: PathBuf,
}

pub fn framedump(args: FramedumpArgs) -> Result<(), CliError> {
    let text = if args.capture.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(runtime)?;
        s
    } else {
        read_file(&args.capture)?
    };
    let lines = dump_capture(&text).map_err(|e| usage(format!("{}: {e}", args.capture.display())))?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}
