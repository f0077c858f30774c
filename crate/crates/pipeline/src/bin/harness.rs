//! Experiment harness: train weights, run campaigns, compute reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use usv_core::classifier::{load_weights, save_weights, NetworkConfig, TrainHyper};
use usv_core::latency::LatencyProfile;
use usv_pipeline::harness::{
    build_report, report_text, run_campaign, train_on_campaign, write_report, CampaignConfig, RunLog, ScenarioRanges,
};

#[derive(Parser)]
#[command(about = "Train, run and evaluate the three-tier collision pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a labelled campaign through IoT, Edge and Cloud on loopback.
    Run {
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        /// Latency profile JSON; zero delay when omitted.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        seed: u64,
    },
    /// Recompute the report from a run log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        /// Also write report.json, report.txt and confusion.png here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train weights on a generated campaign.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        per_class: usize,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        /// Seed for initialization and shuffling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed of the generated training campaign.
        #[arg(long, default_value_t = 1)]
        campaign_seed: u64,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("harness: {msg}");
    ExitCode::from(1)
}

fn read_profile(path: &Path) -> Result<LatencyProfile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    LatencyProfile::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { per_class, profile, weights, out, seed } => {
            let profile = match profile.as_deref().map(read_profile).transpose() {
                Ok(p) => p.unwrap_or_default(),
                Err(e) => return fail(e),
            };
            let weights = match load_weights(&weights, &NetworkConfig::mini()) {
                Ok(w) => w,
                Err(e) => return fail(format!("{}: {e}", weights.display())),
            };
            let mut config = CampaignConfig::new(per_class, seed, out.join("work"));
            config.profile = profile;
            let log = match run_campaign(&config, weights) {
                Ok(l) => l,
                Err(e) => return fail(e),
            };
            if let Err(e) = std::fs::write(out.join("run_log.json"), serde_json::to_vec_pretty(&log).expect("log serializes")) {
                return fail(e);
            }
            let report = build_report(&log);
            if let Err(e) = write_report(&report, &out) {
                return fail(e);
            }
            print!("{}", report_text(&report));
            ExitCode::SUCCESS
        }
        Command::Metrics { log, out } => {
            let text = match std::fs::read_to_string(&log) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", log.display())),
            };
            let run: RunLog = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => return fail(format!("{}: {e}", log.display())),
            };
            let report = build_report(&run);
            if let Some(dir) = out {
                if let Err(e) = write_report(&report, &dir) {
                    return fail(e);
                }
            }
            print!("{}", report_text(&report));
            ExitCode::SUCCESS
        }
        Command::Train { out, per_class, epochs, lr, batch, seed, campaign_seed } => {
            let hyper = TrainHyper { lr, epochs, batch, seed, ..Default::default() };
            let outcome = train_on_campaign(per_class, &ScenarioRanges::default(), campaign_seed, &hyper, |e, loss| {
                eprintln!("epoch {:>3}/{epochs}: loss {loss:.4}", e + 1)
            });
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            if let Err(e) = save_weights(&outcome.weights, &out) {
                return fail(format!("{}: {e}", out.display()));
            }
            eprintln!(
                "harness: wrote {} (training loss {:.4}, accuracy {:.3})",
                out.display(),
                outcome.final_loss,
                outcome.final_accuracy
            );
            ExitCode::SUCCESS
        }
    }
}
