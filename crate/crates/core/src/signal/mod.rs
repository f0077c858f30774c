//! IMU sample model and sliding-window segmentation.

mod replay;
mod synth;

pub use replay::{parse_sample_file, read_sample_file, replay_file, write_sample_file, Pacing, ReplayStream};
pub use synth::{synthesize_voyage, AxisPattern, ImpactScenario, ScenarioError, Voyage};

use serde::{Deserialize, Serialize};

/// Nominal IMU sampling rate.
pub const RATE_HZ: u16 = 100;
/// Samples per classification window (5 s at 100 Hz).
pub const WINDOW_SAMPLES: usize = 500;
/// Stride between consecutive windows (3 s at 100 Hz).
pub const WINDOW_STRIDE: usize = 300;

/// One 6-axis proprioceptive reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t_ns: u64,
    /// Linear acceleration, m/s².
    pub lin_acc: [f64; 3],
    /// Angular velocity, rad/s.
    pub ang_vel: [f64; 3],
}

impl ImuSample {
    pub fn new(t_ns: u64, lin_acc: [f64; 3], ang_vel: [f64; 3]) -> Self {
        Self { t_ns, lin_acc, ang_vel }
    }

    /// Axis `k` in channel order: lin_acc x,y,z then ang_vel x,y,z.
    pub fn axis(&self, k: usize) -> f64 {
        if k < 3 {
            self.lin_acc[k]
        } else {
            self.ang_vel[k - 3]
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lin_acc.iter().chain(self.ang_vel.iter()).all(|v| v.is_finite())
    }
}

/// A fixed-length run of consecutive samples; the unit of transport and
/// classification.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub device_id: u32,
    pub window_seq: u64,
    pub start_t_ns: u64,
    pub rate_hz: u16,
    pub samples: Vec<ImuSample>,
}

impl SampleWindow {
    /// Values of one axis across the window.
    pub fn channel(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.axis(axis)).collect()
    }

    pub fn start_s(&self) -> f64 {
        self.start_t_ns as f64 / 1e9
    }

    /// Whether `t_s` (seconds on the stream clock) falls inside the window span.
    pub fn contains_time(&self, t_s: f64) -> bool {
        let start = self.start_s();
        let span = self.samples.len() as f64 / f64::from(self.rate_hz);
        t_s >= start && t_s < start + span
    }
}

/// Window geometry. Offset is the stride between window starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub rate_hz: u16,
    pub window_s: f64,
    pub offset_s: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { rate_hz: RATE_HZ, window_s: 5.0, offset_s: 3.0 }
    }
}

impl WindowSpec {
    pub fn window_len(&self) -> usize {
        (self.window_s * f64::from(self.rate_hz)).round() as usize
    }

    pub fn stride(&self) -> usize {
        (self.offset_s * f64::from(self.rate_hz)).round() as usize
    }

    /// Number of complete windows in a stream of `n` samples.
    pub fn window_count(&self, n: usize) -> usize {
        let len = self.window_len();
        if n < len {
            0
        } else {
            (n - len) / self.stride() + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StreamError {
    #[error("timestamps not strictly increasing at sample {index} ({prev_ns} -> {t_ns})")]
    NonMonotonic { index: usize, prev_ns: u64, t_ns: u64 },
    #[error("non-finite reading at sample {index}")]
    NonFinite { index: usize },
    #[error("invalid window geometry: {0}")]
    Geometry(String),
}

fn check_spec(spec: &WindowSpec) -> Result<(), StreamError> {
    if spec.rate_hz == 0 || spec.window_len() == 0 || spec.stride() == 0 {
        return Err(StreamError::Geometry(format!("{spec:?}")));
    }
    Ok(())
}

/// Cuts an ordered sample stream into complete overlapping windows.
///
/// Window `k` covers sample indices `[k*stride, k*stride + len)`; a trailing
/// partial window is dropped. Windows carry device id 0 and sequence `k`.
pub fn window_stream(samples: &[ImuSample], spec: &WindowSpec) -> Result<Vec<SampleWindow>, StreamError> {
    check_spec(spec)?;
    for (i, s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(StreamError::NonFinite { index: i });
        }
        if i > 0 && s.t_ns <= samples[i - 1].t_ns {
            return Err(StreamError::NonMonotonic { index: i, prev_ns: samples[i - 1].t_ns, t_ns: s.t_ns });
        }
    }
    let len = spec.window_len();
    let stride = spec.stride();
    let windows = (0..spec.window_count(samples.len()))
        .map(|k| {
            let begin = k * stride;
            let chunk = &samples[begin..begin + len];
            SampleWindow {
                device_id: 0,
                window_seq: k as u64,
                start_t_ns: chunk[0].t_ns,
                rate_hz: spec.rate_hz,
                samples: chunk.to_vec(),
            }
        })
        .collect();
    Ok(windows)
}

/// Incremental form of [`window_stream`] for live acquisition.
#[derive(Debug)]
pub struct Windower {
    device_id: u32,
    spec: WindowSpec,
    buf: std::collections::VecDeque<ImuSample>,
    next_seq: u64,
    seen: usize,
    last_t_ns: Option<u64>,
    /// Samples still to skip before the next window begins (when stride > len).
    skip: usize,
}

impl Windower {
    pub fn new(device_id: u32, spec: WindowSpec) -> Result<Self, StreamError> {
        check_spec(&spec)?;
        Ok(Self {
            device_id,
            spec,
            buf: std::collections::VecDeque::with_capacity(spec.window_len()),
            next_seq: 0,
            seen: 0,
            last_t_ns: None,
            skip: 0,
        })
    }

    /// Feeds one sample; returns a window when one completes.
    pub fn push(&mut self, sample: ImuSample) -> Result<Option<SampleWindow>, StreamError> {
        let index = self.seen;
        if !sample.is_finite() {
            return Err(StreamError::NonFinite { index });
        }
        if let Some(prev) = self.last_t_ns {
            if sample.t_ns <= prev {
                return Err(StreamError::NonMonotonic { index, prev_ns: prev, t_ns: sample.t_ns });
            }
        }
        self.last_t_ns = Some(sample.t_ns);
        self.seen += 1;
        if self.skip > 0 {
            self.skip -= 1;
            return Ok(None);
        }
        self.buf.push_back(sample);
        let len = self.spec.window_len();
        if self.buf.len() < len {
            return Ok(None);
        }
        let samples: Vec<ImuSample> = self.buf.iter().copied().collect();
        let window = SampleWindow {
            device_id: self.device_id,
            window_seq: self.next_seq,
            start_t_ns: samples[0].t_ns,
            rate_hz: self.spec.rate_hz,
            samples,
        };
        self.next_seq += 1;
        let stride = self.spec.stride();
        if stride >= len {
            self.buf.clear();
            self.skip = stride - len;
        } else {
            self.buf.drain(..stride);
        }
        Ok(Some(window))
    }
}

/// Uniformly sampled stream timestamps: sample `i` at `i / rate` seconds.
pub fn sample_time_ns(index: usize, rate_hz: u16) -> u64 {
    (index as u64 * 1_000_000_000) / u64::from(rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<ImuSample> {
        (0..n)
            .map(|i| ImuSample::new(sample_time_ns(i, 100), [i as f64, 0.0, 0.0], [0.0; 3]))
            .collect()
    }

    #[test]
    fn eleven_hundred_samples_give_three_windows() {
        let w = window_stream(&ramp(1100), &WindowSpec::default()).unwrap();
        let starts: Vec<f64> = w.iter().map(|w| w.samples[0].lin_acc[0]).collect();
        assert_eq!(starts, vec![0.0, 300.0, 600.0]);
        assert!(w.iter().all(|w| w.samples.len() == WINDOW_SAMPLES));
        assert_eq!(w[1].start_t_ns - w[0].start_t_ns, 3_000_000_000);
    }

    #[test]
    fn short_stream_has_no_window() {
        assert!(window_stream(&ramp(499), &WindowSpec::default()).unwrap().is_empty());
        let one = window_stream(&ramp(500), &WindowSpec::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].samples.len(), 500);
    }

    #[test]
    fn rejects_non_monotonic_timestamps() {
        let mut s = ramp(600);
        s[42].t_ns = s[41].t_ns;
        assert!(matches!(
            window_stream(&s, &WindowSpec::default()),
            Err(StreamError::NonMonotonic { index: 42, .. })
        ));
    }

    #[test]
    fn rejects_nan() {
        let mut s = ramp(600);
        s[7].ang_vel[2] = f64::NAN;
        assert_eq!(window_stream(&s, &WindowSpec::default()), Err(StreamError::NonFinite { index: 7 }));
    }

    #[test]
    fn streaming_windower_matches_batch() {
        let samples = ramp(1734);
        let batch = window_stream(&samples, &WindowSpec::default()).unwrap();
        let mut w = Windower::new(0, WindowSpec::default()).unwrap();
        let live: Vec<_> = samples.iter().filter_map(|s| w.push(*s).unwrap()).collect();
        assert_eq!(batch, live);
    }

    #[test]
    fn windower_with_gap_stride() {
        let spec = WindowSpec { rate_hz: 100, window_s: 1.0, offset_s: 1.5 };
        let samples = ramp(420);
        let batch = window_stream(&samples, &spec).unwrap();
        let mut w = Windower::new(0, spec).unwrap();
        let live: Vec<_> = samples.iter().filter_map(|s| w.push(*s).unwrap()).collect();
        assert_eq!(batch, live);
        assert_eq!(batch.len(), 3);
    }
}
