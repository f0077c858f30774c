//! Per-window inference and the alert decision rule.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use usv_core::classifier::{forward, ClassProbs, ClassifierError, NetworkConfig, Weights};
use usv_core::signal::{SampleWindow, RATE_HZ, WINDOW_SAMPLES};
use usv_core::wavelet::{window_scalogram, MorletBank, Scalogram, WaveletError};
use usv_core::ImpactLabel;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("window has {got} samples at {rate} Hz, expected {WINDOW_SAMPLES} at {RATE_HZ} Hz")]
    Window { got: usize, rate: u16 },
    #[error("weights are for a {0}-channel {1}x{2} input, not a scalogram")]
    Shape(usize, usize, usize),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub cwt_ms: f64,
    pub cnn_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub probs: ClassProbs,
    pub scalogram: Scalogram,
    pub timings: StageTimings,
}

/// Scalogram front end plus network; shared read-only between connections.
pub struct EdgeClassifier {
    bank: MorletBank,
    weights: Weights<f32>,
}

impl EdgeClassifier {
    pub fn new(weights: Weights<f32>) -> Result<Self, ClassifyError> {
        let c = weights.config();
        let want = NetworkConfig::mini();
        if (c.input_channels, c.input_height, c.input_width) != (want.input_channels, want.input_height, want.input_width) {
            return Err(ClassifyError::Shape(c.input_channels, c.input_height, c.input_width));
        }
        Ok(Self { bank: MorletBank::standard(), weights })
    }

    pub fn weights(&self) -> &Weights<f32> {
        &self.weights
    }

    pub fn classify_window(&self, window: &SampleWindow) -> Result<Classification, ClassifyError> {
        if window.samples.len() != WINDOW_SAMPLES || window.rate_hz != RATE_HZ {
            return Err(ClassifyError::Window { got: window.samples.len(), rate: window.rate_hz });
        }
        let t0 = Instant::now();
        let scalogram = window_scalogram(&self.bank, window)?;
        let t1 = Instant::now();
        let probs = forward(&self.weights, scalogram.as_slice())?;
        let t2 = Instant::now();
        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        Ok(Classification {
            probs,
            scalogram,
            timings: StageTimings { cwt_ms: ms(t1 - t0), cnn_ms: ms(t2 - t1), total_ms: ms(t2 - t0) },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionPolicy {
    pub confidence_threshold: f64,
    /// Previous decisions that must agree before an alert fires.
    pub debounce_windows: usize,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self { confidence_threshold: 0.5, debounce_windows: 0 }
    }
}

impl DecisionPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(format!("threshold {} outside [0, 1]", self.confidence_threshold));
        }
        Ok(())
    }
}

/// Alert label for `probs`, given the argmax labels of earlier windows
/// (oldest first).
pub fn decide(probs: &ClassProbs, policy: &DecisionPolicy, recent: &[ImpactLabel]) -> Option<ImpactLabel> {
    let label = probs.argmax();
    if label == ImpactLabel::None || probs.max() < policy.confidence_threshold {
        return None;
    }
    let k = policy.debounce_windows;
    if recent.len() < k || !recent[recent.len() - k..].iter().all(|&l| l == label) {
        return None;
    }
    Some(label)
}

/// Per-stream decision state for debouncing.
#[derive(Debug, Clone)]
pub struct Decider {
    policy: DecisionPolicy,
    history: std::collections::VecDeque<ImpactLabel>,
}

impl Decider {
    pub fn new(policy: DecisionPolicy) -> Self {
        Self { policy, history: Default::default() }
    }

    pub fn observe(&mut self, probs: &ClassProbs) -> Option<ImpactLabel> {
        let alert = decide(probs, &self.policy, self.history.make_contiguous());
        self.history.push_back(probs.argmax());
        if self.history.len() > self.policy.debounce_windows {
            self.history.pop_front();
        }
        alert
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ImpactLabel::{Bow, Port};

    #[test]
    fn decision_examples() {
        let p = DecisionPolicy::default();
        assert_eq!(decide(&ClassProbs([0.7, 0.1, 0.1, 0.1]), &p, &[]), Some(Bow));
        assert_eq!(decide(&ClassProbs([0.05, 0.03, 0.02, 0.9]), &p, &[]), None);
        assert_eq!(decide(&ClassProbs([0.5, 0.5, 0.0, 0.0]), &p, &[]), Some(Bow));
        assert_eq!(decide(&ClassProbs([0.4, 0.3, 0.2, 0.1]), &p, &[]), None);
    }

    #[test]
    fn debounce_requires_agreeing_history() {
        let p = DecisionPolicy { confidence_threshold: 0.5, debounce_windows: 2 };
        let bow = ClassProbs([0.8, 0.1, 0.05, 0.05]);
        assert_eq!(decide(&bow, &p, &[Bow]), None);
        assert_eq!(decide(&bow, &p, &[Port, Bow]), None);
        assert_eq!(decide(&bow, &p, &[Port, Bow, Bow]), Some(Bow));
        let mut d = Decider::new(p);
        assert_eq!((d.observe(&bow), d.observe(&bow), d.observe(&bow)), (None, None, Some(Bow)));
    }

    fn probs() -> impl Strategy<Value = ClassProbs> {
        proptest::array::uniform4(0.001f64..1.0).prop_map(|v| {
            let s: f64 = v.iter().sum();
            ClassProbs(v.map(|x| x / s))
        })
    }

    proptest! {
        #[test]
        fn raising_threshold_never_creates_alert(p in probs(), lo in 0.0f64..1.0, hi in 0.0f64..1.0, k in 0usize..3) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let recent = vec![p.argmax(); 3];
            let a = decide(&p, &DecisionPolicy { confidence_threshold: lo, debounce_windows: k }, &recent);
            let b = decide(&p, &DecisionPolicy { confidence_threshold: hi, debounce_windows: k }, &recent);
            prop_assert!(!(a.is_none() && b.is_some()));
        }
    }
}
