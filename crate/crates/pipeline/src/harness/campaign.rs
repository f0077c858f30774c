//! Labelled synthetic campaigns and their end-to-end execution.

use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use usv_core::classifier::{train_with_progress, ClassProbs, Example, NetworkConfig, TrainHyper, TrainOutcome, Weights};
use usv_core::latency::LatencyProfile;
use usv_core::signal::{synthesize_voyage, window_stream, ImpactScenario, SampleWindow, WindowSpec};
use usv_core::wavelet::{window_scalogram, MorletBank};
use usv_core::ImpactLabel;

use crate::cloud::{start_cloud, CloudConfig};
use crate::edge::{start_edge, DeliveryState, EdgeClassifier, EdgeConfig, EdgeObservation};
use crate::iot::{run_iot, IotConfig, IotError, IotSource};

/// Uniform sampling ranges for randomized impact parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRanges {
    pub impact_t_s: (f64, f64),
    pub amplitude: (f64, f64),
    pub decay_s: (f64, f64),
    pub carrier_hz: (f64, f64),
    pub sea_state_sigma: (f64, f64),
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        Self {
            impact_t_s: (1.0, 4.0),
            amplitude: (4.0, 12.0),
            decay_s: (0.2, 0.8),
            carrier_hz: (2.0, 8.0),
            sea_state_sigma: (0.1, 0.5),
        }
    }
}

/// One generated scenario and its single 5 s window.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub scenario: ImpactScenario,
    pub window: SampleWindow,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// `per_class` randomized scenarios for each label, in seeded shuffled order.
/// Trial `i` becomes window `i`, starting at `5 i` seconds.
pub fn generate_campaign(per_class: usize, ranges: &ScenarioRanges, seed: u64) -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenarios = Vec::with_capacity(per_class * 4);
    for &label in &ImpactLabel::ALL {
        for _ in 0..per_class {
            scenarios.push(ImpactScenario {
                label,
                impact_t_s: draw(&mut rng, ranges.impact_t_s),
                amplitude: draw(&mut rng, ranges.amplitude),
                decay_s: draw(&mut rng, ranges.decay_s),
                carrier_hz: draw(&mut rng, ranges.carrier_hz),
                sea_state_sigma: draw(&mut rng, ranges.sea_state_sigma),
                duration_s: 5.0,
                rng_seed: rng.random(),
            });
        }
    }
    scenarios.shuffle(&mut rng);
    scenarios
        .into_iter()
        .enumerate()
        .map(|(index, scenario)| {
            let voyage = synthesize_voyage(&scenario).expect("ranges produce valid scenarios");
            let mut window = window_stream(&voyage.samples, &WindowSpec::default())
                .expect("synthetic stream is well formed")
                .remove(0);
            let offset = index as u64 * 5_000_000_000;
            window.window_seq = index as u64;
            window.start_t_ns += offset;
            window.samples.iter_mut().for_each(|s| s.t_ns += offset);
            Trial { index, scenario, window }
        })
        .collect()
}

/// Scalogram training examples for `trials`.
pub fn examples(trials: &[Trial]) -> Vec<Example> {
    let bank = MorletBank::standard();
    trials
        .iter()
        .map(|t| Example::from_scalogram(&window_scalogram(&bank, &t.window).expect("valid window"), t.scenario.label))
        .collect()
}

/// Trains the mini network on a freshly generated campaign.
pub fn train_on_campaign(
    per_class: usize,
    ranges: &ScenarioRanges,
    campaign_seed: u64,
    hyper: &TrainHyper,
    progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome, usv_core::classifier::ClassifierError> {
    let data = examples(&generate_campaign(per_class, ranges, campaign_seed));
    train_with_progress(&NetworkConfig::mini(), &data, hyper, progress)
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub per_class: usize,
    pub seed: u64,
    pub ranges: ScenarioRanges,
    pub profile: LatencyProfile,
    pub device_id: u32,
    /// Spacing between window releases; derived from the profile when unset.
    pub interval: Option<Duration>,
    /// Directory for the cloud store and edge spool.
    pub work_dir: PathBuf,
    /// Upper bound on waiting for all deliveries after the IoT session ends.
    pub settle_timeout: Duration,
}

impl CampaignConfig {
    pub fn new(per_class: usize, seed: u64, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            per_class,
            seed,
            ranges: ScenarioRanges::default(),
            profile: LatencyProfile::default(),
            device_id: 1,
            interval: None,
            work_dir: work_dir.into(),
            settle_timeout: Duration::from_secs(120),
        }
    }

    pub fn window_interval(&self) -> Duration {
        self.interval.unwrap_or_else(|| {
            let l = self.profile.iot_edge;
            Duration::from_secs_f64((l.mean_ms + 2.0 * l.std_ms + 100.0) / 1e3)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub truth: ImpactLabel,
    /// Absent when the window never reached the Edge.
    pub predicted: Option<ImpactLabel>,
    pub probs: Option<ClassProbs>,
    pub alert: Option<ImpactLabel>,
    pub iot_processing_ms: Option<f64>,
    pub iot_edge_ms: Option<f64>,
    pub edge_processing_ms: Option<f64>,
    pub cwt_ms: Option<f64>,
    pub cnn_ms: Option<f64>,
    pub edge_cloud_rtt_ms: Option<f64>,
    pub delivery: Option<DeliveryState>,
    pub delivery_attempts: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub seed: u64,
    pub per_class: usize,
    pub profile: LatencyProfile,
    pub weights_config_hash: String,
    pub windows_dropped: u64,
    pub reconnects: u64,
    pub trials: Vec<TrialRecord>,
}

pub const RUN_LOG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{tier} failed to start: {reason}")]
    TierStart { tier: &'static str, reason: String },
    #[error("iot session failed: {0}")]
    Iot(#[from] IotError),
    #[error("timed out waiting for {0} deliveries")]
    Settle(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Pipes a generated campaign through Cloud, Edge and IoT on loopback.
pub fn run_campaign(config: &CampaignConfig, weights: Weights<f32>) -> Result<RunLog, HarnessError> {
    let trials = generate_campaign(config.per_class, &config.ranges, config.seed);
    run_trials(config, &trials, weights)
}

pub fn run_trials(config: &CampaignConfig, trials: &[Trial], weights: Weights<f32>) -> Result<RunLog, HarnessError> {
    std::fs::create_dir_all(&config.work_dir)?;
    let weights_config_hash = hex(&weights.config().hash());
    let classifier = EdgeClassifier::new(weights).map_err(|e| HarnessError::TierStart { tier: "edge", reason: e.to_string() })?;

    let mut cloud_cfg = CloudConfig::new("127.0.0.1:0", config.work_dir.join("cloud"));
    cloud_cfg.inject = Some(config.profile.edge_cloud);
    cloud_cfg.inject_seed = config.seed ^ 0xC10D;
    let cloud = start_cloud(cloud_cfg).map_err(|e| HarnessError::TierStart { tier: "cloud", reason: e.to_string() })?;

    let (obs_tx, obs_rx) = mpsc::channel();
    let mut edge_cfg = EdgeConfig::new("127.0.0.1:0", cloud.url());
    edge_cfg.spool_path = config.work_dir.join("spool.jsonl");
    let edge = match start_edge(edge_cfg, Arc::new(classifier), Some(obs_tx)) {
        Ok(e) => e,
        Err(e) => {
            let _ = cloud.shutdown();
            return Err(HarnessError::TierStart { tier: "edge", reason: e.to_string() });
        }
    };

    let mut iot_cfg = IotConfig::new(edge.addr().to_string(), config.device_id);
    iot_cfg.inject = Some(config.profile.iot_edge).filter(|p| !p.is_zero());
    iot_cfg.inject_seed = config.seed ^ 0x107;
    let source = IotSource::Windows { windows: trials.iter().map(|t| t.window.clone()).collect(), interval: config.window_interval() };
    let session = run_iot(source, &iot_cfg);

    let mut records: Vec<TrialRecord> = trials
        .iter()
        .map(|t| TrialRecord {
            index: t.index,
            truth: t.scenario.label,
            predicted: None,
            probs: None,
            alert: None,
            iot_processing_ms: None,
            iot_edge_ms: None,
            edge_processing_ms: None,
            cwt_ms: None,
            cnn_ms: None,
            edge_cloud_rtt_ms: None,
            delivery: None,
            delivery_attempts: None,
        })
        .collect();

    let expected = session.as_ref().map(|s| s.windows_delivered as usize).unwrap_or(0);
    let deadline = Instant::now() + config.settle_timeout;
    let (mut windows, mut deliveries) = (0usize, 0usize);
    while windows < expected || deliveries < windows {
        let Some(left) = deadline.checked_duration_since(Instant::now()) else { break };
        match obs_rx.recv_timeout(left) {
            Ok(EdgeObservation::Window(w)) => {
                if let Some(r) = records.get_mut(w.window_seq as usize) {
                    windows += 1;
                    r.predicted = Some(w.label);
                    r.probs = Some(w.probs);
                    r.alert = w.alert;
                    r.iot_processing_ms = Some(w.iot_processing_ms);
                    r.iot_edge_ms = Some(w.iot_edge_ms);
                    r.edge_processing_ms = Some(w.timings.total_ms);
                    r.cwt_ms = Some(w.timings.cwt_ms);
                    r.cnn_ms = Some(w.timings.cnn_ms);
                }
            }
            Ok(EdgeObservation::Delivery(d)) => {
                if let Some(r) = records.get_mut(d.window_seq as usize) {
                    deliveries += 1;
                    r.edge_cloud_rtt_ms = d.rtt_ms;
                    r.delivery = Some(d.state);
                    r.delivery_attempts = Some(d.attempts);
                }
            }
            Ok(EdgeObservation::Closed { .. }) => {}
            Err(_) => break,
        }
    }
    edge.shutdown();
    let _ = cloud.shutdown();
    let stats = session?;
    if windows < expected || deliveries < windows {
        return Err(HarnessError::Settle(expected.max(windows) - deliveries.min(windows)));
    }
    Ok(RunLog {
        schema_version: RUN_LOG_VERSION,
        seed: config.seed,
        per_class: config.per_class,
        profile: config.profile,
        weights_config_hash,
        windows_dropped: stats.windows_dropped,
        reconnects: stats.reconnects,
        trials: records,
    })
}
