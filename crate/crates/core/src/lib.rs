//! Core building blocks for a three-tier IMU collision-detection pipeline:
//! sample streams and windowing, Morlet scalograms, a miniature
//! inverted-residual classifier, the IoT→Edge wire format, collision event
//! records and the evaluation metrics.

pub mod classifier;
pub mod clock;
pub mod event;
pub mod label;
pub mod latency;
pub mod metrics;
pub mod protocol;
pub mod signal;
pub mod wavelet;

pub use label::ImpactLabel;
