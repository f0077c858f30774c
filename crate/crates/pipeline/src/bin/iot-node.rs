//! IoT node: streams IMU windows from a scenario or replay file to an Edge.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};
use usv_core::latency::LinkProfile;
use usv_core::signal::{read_sample_file, synthesize_voyage, ImpactScenario, Pacing};
use usv_pipeline::iot::{run_iot, IotConfig, IotError, IotSource};

#[derive(Parser)]
#[command(about = "Stream IMU windows to an Edge node over TCP")]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "replay"])))]
struct Args {
    /// Edge address, HOST:PORT.
    #[arg(long)]
    edge: String,
    #[arg(long, default_value_t = 0)]
    device_id: u32,
    /// Synthetic scenario JSON.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// CSV of `t_ns,ax,ay,az,gx,gy,gz` rows.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// realtime, xN (N times faster) or max.
    #[arg(long, default_value = "realtime")]
    pacing: Pacing,
    /// Reconnect attempts before giving up.
    #[arg(long, default_value_t = 5)]
    retries: u32,
    /// Sender-side delay per packet, MEAN_MS,STD_MS.
    #[arg(long)]
    inject_delay: Option<LinkProfile>,
    #[arg(long, default_value_t = 0)]
    inject_seed: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let samples = if let Some(path) = &args.scenario {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("iot-node: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        };
        match ImpactScenario::from_json(&text).and_then(|s| synthesize_voyage(&s)) {
            Ok(v) => v.samples,
            Err(e) => {
                eprintln!("iot-node: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
    } else {
        let path = args.replay.as_ref().expect("clap enforces a source");
        match read_sample_file(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("iot-node: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
    };
    let mut config = IotConfig::new(args.edge, args.device_id);
    config.retries = args.retries;
    config.inject = args.inject_delay;
    config.inject_seed = args.inject_seed;
    match run_iot(IotSource::Samples { samples, pacing: args.pacing }, &config) {
        Ok(stats) => {
            println!("{}", serde_json::to_string(&stats).expect("stats serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("iot-node: {e}");
            if let IotError::RetryExhausted { stats, .. } = &e {
                println!("{}", serde_json::to_string(stats).expect("stats serialize"));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
