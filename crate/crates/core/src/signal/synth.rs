//! Parameterized synthetic voyage generator standing in for a physical
//! test basin.
//!
//! The baseline is band-limited Gaussian sea-state noise. An impact adds a
//! decaying sinusoid `A * exp(-(t - t0) / decay) * sin(2π f (t - t0))` for
//! `t >= t0`, projected onto the six axes by a per-label [`AxisPattern`].

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{sample_time_ns, window_stream, ImuSample, WindowSpec, RATE_HZ};
use crate::label::ImpactLabel;

/// rad/s of angular response per m/s² of linear transient, and the matching
/// ratio for angular-rate noise.
pub const ANGULAR_SCALE: f64 = 0.1;

/// Noise corner frequency; matches the top of the scalogram band.
const NOISE_CUTOFF_HZ: f64 = 10.0;
const NOISE_BURN_IN: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactScenario {
    pub label: ImpactLabel,
    pub impact_t_s: f64,
    pub amplitude: f64,
    pub decay_s: f64,
    pub carrier_hz: f64,
    pub sea_state_sigma: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
}

impl Default for ImpactScenario {
    fn default() -> Self {
        Self {
            label: ImpactLabel::None,
            impact_t_s: 2.5,
            amplitude: 8.0,
            decay_s: 0.5,
            carrier_hz: 4.0,
            sea_state_sigma: 0.3,
            duration_s: 5.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("carrier_hz must lie in (0, 10), got {0}")]
    Carrier(f64),
    #[error("amplitude must be >= 0, got {0}")]
    Amplitude(f64),
    #[error("duration_s must be >= 5, got {0}")]
    Duration(f64),
    #[error("decay_s must be > 0, got {0}")]
    Decay(f64),
    #[error("sea_state_sigma must be >= 0, got {0}")]
    Sigma(f64),
    #[error("impact_t_s must be finite and >= 0, got {0}")]
    ImpactTime(f64),
    #[error("scenario JSON: {0}")]
    Json(String),
}

impl ImpactScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.carrier_hz > 0.0 && self.carrier_hz < 10.0) {
            return Err(ScenarioError::Carrier(self.carrier_hz));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(ScenarioError::Amplitude(self.amplitude));
        }
        if !(self.duration_s >= 5.0 && self.duration_s.is_finite()) {
            return Err(ScenarioError::Duration(self.duration_s));
        }
        if !(self.decay_s > 0.0 && self.decay_s.is_finite()) {
            return Err(ScenarioError::Decay(self.decay_s));
        }
        if !(self.sea_state_sigma >= 0.0 && self.sea_state_sigma.is_finite()) {
            return Err(ScenarioError::Sigma(self.sea_state_sigma));
        }
        if !(self.impact_t_s >= 0.0 && self.impact_t_s.is_finite()) {
            return Err(ScenarioError::ImpactTime(self.impact_t_s));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Self = serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * f64::from(RATE_HZ)).round() as usize
    }
}

/// Per-axis gains applied to the impact transient. Linear entries are unit
/// gains on m/s²; angular entries are multiplied by [`ANGULAR_SCALE`].
///
/// The sensor is modelled as mounted off the centerline toward starboard, so
/// near-side (starboard) strikes also couple into heave and yaw. Without that
/// asymmetry port and starboard would be exact sign mirrors and their
/// magnitude scalograms identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisPattern {
    pub lin: [f64; 3],
    pub ang: [f64; 3],
}

impl AxisPattern {
    pub fn for_label(label: ImpactLabel) -> Self {
        match label {
            ImpactLabel::Bow => Self { lin: [-1.0, 0.0, 0.0], ang: [0.0, -0.5, 0.0] },
            ImpactLabel::Port => Self { lin: [0.0, 1.0, 0.0], ang: [0.6, 0.0, 0.0] },
            ImpactLabel::Starboard => Self { lin: [0.0, -1.0, 0.45], ang: [-0.6, 0.0, -0.5] },
            ImpactLabel::None => Self { lin: [0.0; 3], ang: [0.0; 3] },
        }
    }

    fn gain(&self, axis: usize) -> f64 {
        if axis < 3 {
            self.lin[axis]
        } else {
            self.ang[axis - 3] * ANGULAR_SCALE
        }
    }
}

/// A generated stream plus the ground truth of each default-geometry window.
#[derive(Debug, Clone, PartialEq)]
pub struct Voyage {
    pub samples: Vec<ImuSample>,
    pub window_labels: Vec<ImpactLabel>,
}

/// One RBJ low-pass biquad (direct form I).
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff_hz: f64, rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - cos) / 2.0 / a0, (1.0 - cos) / a0, (1.0 - cos) / 2.0 / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            x: [0.0; 2],
            y: [0.0; 2],
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.b[1] * self.x[0] + self.b[2] * self.x[1] - self.a[0] * self.y[0] - self.a[1] * self.y[1];
        self.x = [x, self.x[0]];
        self.y = [y, self.y[0]];
        y
    }
}

/// 4th-order Butterworth low-pass as two cascaded biquads.
#[derive(Debug, Clone, Copy)]
struct Butterworth4 {
    stages: [Biquad; 2],
}

impl Butterworth4 {
    fn new(cutoff_hz: f64, rate_hz: f64) -> Self {
        // Pole-pair quality factors 1 / (2 sin((2k-1)π/8)).
        let q1 = 1.0 / (2.0 * (PI / 8.0).sin());
        let q2 = 1.0 / (2.0 * (3.0 * PI / 8.0).sin());
        Self { stages: [Biquad::lowpass(cutoff_hz, rate_hz, q1), Biquad::lowpass(cutoff_hz, rate_hz, q2)] }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.stages[0].step(x);
        self.stages[1].step(y)
    }

    /// Output standard deviation for unit-variance white input.
    fn noise_gain(cutoff_hz: f64, rate_hz: f64) -> f64 {
        let mut f = Self::new(cutoff_hz, rate_hz);
        let mut energy = 0.0;
        for i in 0..4096 {
            let h = f.step(if i == 0 { 1.0 } else { 0.0 });
            energy += h * h;
        }
        energy.sqrt()
    }
}

fn shaped_noise(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    let rate = f64::from(RATE_HZ);
    let mut filter = Butterworth4::new(NOISE_CUTOFF_HZ, rate);
    let scale = sigma / Butterworth4::noise_gain(NOISE_CUTOFF_HZ, rate);
    let mut out = Vec::with_capacity(n);
    for i in 0..NOISE_BURN_IN + n {
        let w: f64 = StandardNormal.sample(rng);
        let y = filter.step(w);
        if i >= NOISE_BURN_IN {
            out.push(y * scale);
        }
    }
    out
}

/// Impact transient value at `t` seconds for onset `t0`.
pub fn transient(scenario: &ImpactScenario, t: f64) -> f64 {
    let dt = t - scenario.impact_t_s;
    if dt < 0.0 {
        return 0.0;
    }
    scenario.amplitude * (-dt / scenario.decay_s).exp() * (2.0 * PI * scenario.carrier_hz * dt).sin()
}

/// Generates a deterministic stream for `scenario` at 100 Hz.
pub fn synthesize_voyage(scenario: &ImpactScenario) -> Result<Voyage, ScenarioError> {
    scenario.validate()?;
    let n = scenario.sample_count();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let mut axes: Vec<Vec<f64>> = (0..6)
        .map(|axis| {
            let sigma = if axis < 3 { scenario.sea_state_sigma } else { scenario.sea_state_sigma * ANGULAR_SCALE };
            if sigma == 0.0 {
                vec![0.0; n]
            } else {
                shaped_noise(&mut rng, n, sigma)
            }
        })
        .collect();

    let pattern = AxisPattern::for_label(scenario.label);
    if scenario.label.is_impact() {
        for i in 0..n {
            let t = i as f64 / f64::from(RATE_HZ);
            let v = transient(scenario, t);
            if v == 0.0 {
                continue;
            }
            for (axis, values) in axes.iter_mut().enumerate() {
                let g = pattern.gain(axis);
                if g != 0.0 {
                    values[i] += g * v;
                }
            }
        }
    }

    let samples: Vec<ImuSample> = (0..n)
        .map(|i| {
            ImuSample::new(
                sample_time_ns(i, RATE_HZ),
                [axes[0][i], axes[1][i], axes[2][i]],
                [axes[3][i], axes[4][i], axes[5][i]],
            )
        })
        .collect();

    let spec = WindowSpec::default();
    let window_labels = window_stream(&samples, &spec)
        .expect("generated stream is monotonic and finite")
        .iter()
        .map(|w| {
            if scenario.label.is_impact() && w.contains_time(scenario.impact_t_s) {
                scenario.label
            } else {
                ImpactLabel::None
            }
        })
        .collect();

    Ok(Voyage { samples, window_labels })
}
