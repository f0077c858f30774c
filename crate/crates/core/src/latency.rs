//! Per-link latency profiles and the truncated-Gaussian delay sampler.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkProfile {
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl LinkProfile {
    pub const ZERO: Self = Self { mean_ms: 0.0, std_ms: 0.0 };

    pub fn new(mean_ms: f64, std_ms: f64) -> Self {
        Self { mean_ms, std_ms }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mean_ms.is_finite() && self.mean_ms >= 0.0) {
            return Err(format!("mean_ms must be finite and >= 0, got {}", self.mean_ms));
        }
        if !(self.std_ms.is_finite() && self.std_ms >= 0.0) {
            return Err(format!("std_ms must be finite and >= 0, got {}", self.std_ms));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.mean_ms == 0.0 && self.std_ms == 0.0
    }

    /// Mean of `N(mean, std²)` conditioned on being ≥ 0.
    pub fn truncated_mean(&self) -> f64 {
        if self.std_ms == 0.0 {
            return self.mean_ms;
        }
        let alpha = -self.mean_ms / self.std_ms;
        let pdf = (-0.5 * alpha * alpha).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let survival = 0.5 * libm::erfc(alpha / std::f64::consts::SQRT_2);
        self.mean_ms + self.std_ms * pdf / survival
    }
}

/// Parses `"MEAN_MS,STD_MS"`.
impl std::str::FromStr for LinkProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, d) = s.split_once(',').ok_or_else(|| format!("expected MEAN_MS,STD_MS, got {s:?}"))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        let p = Self::new(num(m)?, num(d)?);
        p.validate()?;
        Ok(p)
    }
}

/// Delay profile for both network links.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyProfile {
    pub iot_edge: LinkProfile,
    pub edge_cloud: LinkProfile,
}

impl LatencyProfile {
    pub fn validate(&self) -> Result<(), String> {
        self.iot_edge.validate().map_err(|e| format!("iot_edge.{e}"))?;
        self.edge_cloud.validate().map_err(|e| format!("edge_cloud.{e}"))
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let p: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        p.validate()?;
        Ok(p)
    }
}

/// Seeded draws from a Gaussian truncated at zero (by rejection).
#[derive(Debug, Clone)]
pub struct DelaySampler {
    link: LinkProfile,
    normal: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl DelaySampler {
    pub fn new(link: LinkProfile, seed: u64) -> Self {
        let normal = (link.std_ms > 0.0).then(|| Normal::new(link.mean_ms, link.std_ms).expect("validated profile"));
        Self { link, normal, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn link(&self) -> LinkProfile {
        self.link
    }

    pub fn sample_ms(&mut self) -> f64 {
        match &self.normal {
            None => self.link.mean_ms.max(0.0),
            Some(n) => loop {
                let v = n.sample(&mut self.rng);
                if v >= 0.0 {
                    break v;
                }
            },
        }
    }

    pub fn sample(&mut self) -> Duration {
        Duration::from_secs_f64(self.sample_ms() / 1e3)
    }
}
