//! Sample file format and paced replay.
//!
//! One record per line: `t_ns, ax, ay, az, gx, gy, gz` as decimal text.
//! Blank lines are ignored.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use super::{ImuSample, RATE_HZ};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Emission pacing: real time, `N`x accelerated, or unpaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    RealTime,
    Accelerated(f64),
    Max,
}

impl Pacing {
    /// Delay between consecutive samples at `rate_hz`, or `None` when unpaced.
    pub fn period(self, rate_hz: u16) -> Option<Duration> {
        let nominal = 1.0 / f64::from(rate_hz);
        match self {
            Pacing::RealTime => Some(Duration::from_secs_f64(nominal)),
            Pacing::Accelerated(n) if n.is_finite() && n > 0.0 => Some(Duration::from_secs_f64(nominal / n)),
            _ => None,
        }
    }
}

impl FromStr for Pacing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "realtime" | "real-time" | "x1" => Ok(Pacing::RealTime),
            "max" | "inf" => Ok(Pacing::Max),
            _ => {
                let n = s
                    .strip_prefix('x')
                    .and_then(|n| n.parse::<f64>().ok())
                    .filter(|n| *n > 0.0)
                    .ok_or_else(|| format!("bad pacing `{s}` (expected realtime, xN or max)"))?;
                Ok(if n.is_infinite() { Pacing::Max } else { Pacing::Accelerated(n) })
            }
        }
    }
}

impl fmt::Display for Pacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pacing::RealTime => f.write_str("realtime"),
            Pacing::Accelerated(n) => write!(f, "x{n}"),
            Pacing::Max => f.write_str("max"),
        }
    }
}

pub fn parse_sample_file(text: &str) -> Result<Vec<ImuSample>, ReplayError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(ReplayError::Parse { line, reason: format!("expected 7 fields, found {}", fields.len()) });
        }
        let t_ns = fields[0]
            .parse::<u64>()
            .map_err(|e| ReplayError::Parse { line, reason: format!("t_ns `{}`: {e}", fields[0]) })?;
        let mut v = [0.0f64; 6];
        for (k, f) in fields[1..].iter().enumerate() {
            v[k] = f.parse::<f64>().map_err(|e| ReplayError::Parse { line, reason: format!("field {} `{f}`: {e}", k + 2) })?;
            if !v[k].is_finite() {
                return Err(ReplayError::Parse { line, reason: format!("field {} is not finite", k + 2) });
            }
        }
        out.push(ImuSample::new(t_ns, [v[0], v[1], v[2]], [v[3], v[4], v[5]]));
    }
    Ok(out)
}


pub fn read_sample_file(path: impl AsRef<Path>) -> Result<Vec<ImuSample>, ReplayError> {
    parse_sample_file(&fs::read_to_string(path)?)
}

pub fn write_sample_file(path: impl AsRef<Path>, samples: &[ImuSample]) -> io::Result<()> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    for s in samples {
        // `{:?}` on f64 prints the shortest representation that round-trips.
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.t_ns, s.lin_acc[0], s.lin_acc[1], s.lin_acc[2], s.ang_vel[0], s.ang_vel[1], s.ang_vel[2]
        )?;
    }
    w.flush()
}

/// Iterator that releases samples on a fixed schedule: sample `i` becomes
/// available `(i + 1) * period` after the first call to `next`.
#[derive(Debug)]
pub struct ReplayStream {
    samples: std::vec::IntoIter<ImuSample>,
    period: Option<Duration>,
    origin: Option<Instant>,
    emitted: u32,
}

impl ReplayStream {
    pub fn new(samples: Vec<ImuSample>, pacing: Pacing, rate_hz: u16) -> Self {
        Self { samples: samples.into_iter(), period: pacing.period(rate_hz), origin: None, emitted: 0 }
    }
}

impl Iterator for ReplayStream {
    type Item = ImuSample;

    fn next(&mut self) -> Option<ImuSample> {
        let sample = self.samples.next()?;
        if let Some(period) = self.period {
            let origin = *self.origin.get_or_insert_with(Instant::now);
            self.emitted += 1;
            let due = origin + period * self.emitted;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        Some(sample)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.samples.size_hint()
    }
}

/// Reads a sample file and returns its records after pacing them out.
pub fn replay_file(path: impl AsRef<Path>, pacing: Pacing) -> Result<Vec<ImuSample>, ReplayError> {
    let samples = read_sample_file(path)?;
    Ok(ReplayStream::new(samples, pacing, RATE_HZ).collect())
}
