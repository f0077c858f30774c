//! Cloud node: stores collision events behind a small REST API.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use signal_hook::consts::{SIGINT, SIGTERM};
use usv_core::latency::LinkProfile;
use usv_pipeline::cloud::{start_cloud, CloudConfig};

#[derive(Parser)]
#[command(about = "Collision event store with a REST API")]
struct Args {
    #[arg(long)]
    listen: String,
    #[arg(long)]
    data: PathBuf,
    /// Response hold, MEAN_MS,STD_MS (Gaussian truncated at zero).
    #[arg(long)]
    inject_delay: Option<LinkProfile>,
    #[arg(long, default_value_t = 0)]
    inject_seed: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut config = CloudConfig::new(args.listen, args.data);
    config.inject = args.inject_delay;
    config.inject_seed = args.inject_seed;
    let term = Arc::new(AtomicBool::new(false));
    for sig in [SIGTERM, SIGINT] {
        if let Err(e) = signal_hook::flag::register(sig, Arc::clone(&term)) {
            eprintln!("cloud-node: cannot install signal handler: {e}");
            return ExitCode::from(1);
        }
    }
    let handle = match start_cloud(config) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("cloud-node: {e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("cloud-node: listening on {}", handle.url());
    while !term.load(Ordering::Relaxed) {
        std::thread::sleep(Duration::from_millis(50));
    }
    match handle.shutdown() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cloud-node: {e}");
            ExitCode::from(1)
        }
    }
}
