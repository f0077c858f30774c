//! Edge node: classifies incoming IoT windows and forwards events to a Cloud.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use signal_hook::consts::{SIGINT, SIGTERM};
use usv_core::classifier::{load_weights, NetworkConfig};
use usv_pipeline::edge::{start_edge, DecisionPolicy, EdgeClassifier, EdgeConfig};

#[derive(Parser)]
#[command(about = "Classify IMU windows and forward collision events")]
struct Args {
    #[arg(long)]
    listen: String,
    #[arg(long)]
    weights: PathBuf,
    /// Cloud base URL, e.g. http://127.0.0.1:8080
    #[arg(long)]
    cloud: String,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    debounce: usize,
    /// Attach the binary scalogram to each event.
    #[arg(long)]
    send_scalograms: bool,
    #[arg(long, default_value = "spool.jsonl")]
    spool: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let weights = match load_weights(&args.weights, &NetworkConfig::mini()) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("edge-node: {}: {e}", args.weights.display());
            return ExitCode::from(1);
        }
    };
    let classifier = match EdgeClassifier::new(weights) {
        Ok(c) => Arc::new(c),
        Err(e) => {
            eprintln!("edge-node: {e}");
            return ExitCode::from(1);
        }
    };
    let mut config = EdgeConfig::new(args.listen, args.cloud);
    config.policy = DecisionPolicy { confidence_threshold: args.threshold, debounce_windows: args.debounce };
    config.send_scalograms = args.send_scalograms;
    config.spool_path = args.spool;
    config.log_windows = true;

    let term = Arc::new(AtomicBool::new(false));
    for sig in [SIGTERM, SIGINT] {
        if let Err(e) = signal_hook::flag::register(sig, Arc::clone(&term)) {
            eprintln!("edge-node: cannot install signal handler: {e}");
            return ExitCode::from(1);
        }
    }
    let handle = match start_edge(config, classifier, None) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("edge-node: {e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("edge-node: listening on {}", handle.addr());
    while !term.load(Ordering::Relaxed) {
        std::thread::sleep(Duration::from_millis(50));
    }
    let summary = handle.shutdown();
    eprintln!("edge-node: shut down after {} windows ({} duplicates)", summary.windows, summary.duplicates);
    ExitCode::SUCCESS
}
