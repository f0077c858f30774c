//! IoT node: acquires samples, cuts windows and streams them to the Edge.
//!
//! One acquisition thread feeds a [`DropOldestQueue`] of windows; the calling
//! thread sends them stop-and-wait, retiring each window only when the Edge
//! acknowledges it. A broken connection is re-established with exponential
//! backoff and the unacknowledged window is resent.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use usv_core::clock::{elapsed_ms, monotonic_ns};
use usv_core::latency::{DelaySampler, LinkProfile};
use usv_core::protocol::{self, ProtocolError, WindowPacket};
use usv_core::signal::{ImuSample, Pacing, SampleWindow, StreamError, WindowSpec, Windower, RATE_HZ};

use crate::queue::DropOldestQueue;

pub const QUEUE_CAPACITY: usize = 16;
const BACKOFF_START: Duration = Duration::from_millis(500);
const BACKOFF_CAP: Duration = Duration::from_secs(8);

/// Where windows come from.
pub enum IotSource {
    /// Raw samples cut into 5 s / 3 s-offset windows, released at `pacing`.
    Samples { samples: Vec<ImuSample>, pacing: Pacing },
    /// Prebuilt windows, one every `interval`.
    Windows { windows: Vec<SampleWindow>, interval: Duration },
}

impl IotSource {
    fn window_total(&self) -> usize {
        match self {
            IotSource::Samples { samples, .. } => WindowSpec::default().window_count(samples.len()),
            IotSource::Windows { windows, .. } => windows.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IotConfig {
    pub edge: String,
    pub device_id: u32,
    /// Reconnect attempts allowed after a failed connection.
    pub retries: u32,
    /// Sender-side delay applied to every packet after stamping `t_sent_ns`.
    pub inject: Option<LinkProfile>,
    pub inject_seed: u64,
    pub queue_capacity: usize,
    pub connect_timeout: Duration,
    /// Upper bound on waiting for one acknowledgement.
    pub ack_timeout: Duration,
}

impl IotConfig {
    pub fn new(edge: impl Into<String>, device_id: u32) -> Self {
        Self {
            edge: edge.into(),
            device_id,
            retries: 5,
            inject: None,
            inject_seed: 0,
            queue_capacity: QUEUE_CAPACITY,
            connect_timeout: Duration::from_secs(2),
            ack_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentWindow {
    pub window_seq: u64,
    pub t_acquired_ns: u64,
    pub t_sent_ns: u64,
    /// `t_sent_ns - t_acquired_ns`, milliseconds.
    pub iot_processing_ms: f64,
    /// Injected link delay, milliseconds.
    pub injected_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub windows_acquired: u64,
    pub windows_delivered: u64,
    /// Windows evicted from the full send queue.
    pub windows_dropped: u64,
    pub reconnects: u64,
    /// Packets written more than once because an ack was lost.
    pub resends: u64,
    pub sent: Vec<SentWindow>,
}

#[derive(Debug, thiserror::Error)]
pub enum IotError {
    #[error("cannot resolve edge address {0}")]
    Address(String),
    #[error("retry budget exhausted after {attempts} connection attempts; {unsent} windows unsent")]
    RetryExhausted { attempts: u32, unsent: usize, stats: Box<SessionStats> },
    #[error("bad input stream: {0}")]
    Stream(#[from] StreamError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
}

impl IotError {
    /// Process exit code for the `iot-node` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            IotError::RetryExhausted { .. } => 2,
            _ => 1,
        }
    }
}

struct Acquired {
    window: SampleWindow,
    t_acquired_ns: u64,
}

fn acquire(source: IotSource, device_id: u32, queue: &DropOldestQueue<Acquired>, stop: &AtomicBool) -> Result<u64, StreamError> {
    let mut count = 0;
    let mut emit = |window: SampleWindow| {
        queue.push(Acquired { window, t_acquired_ns: monotonic_ns() });
        count += 1;
    };
    match source {
        IotSource::Samples { samples, pacing } => {
            let mut windower = Windower::new(device_id, WindowSpec::default())?;
            let period = pacing.period(RATE_HZ);
            let origin = Instant::now();
            for (i, s) in samples.into_iter().enumerate() {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                if let Some(p) = period {
                    let due = origin + p * (i as u32 + 1);
                    if let Some(wait) = due.checked_duration_since(Instant::now()) {
                        thread::sleep(wait);
                    }
                }
                if let Some(w) = windower.push(s)? {
                    emit(w);
                }
            }
        }
        IotSource::Windows { windows, interval } => {
            let origin = Instant::now();
            for (i, mut w) in windows.into_iter().enumerate() {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let due = origin + interval * i as u32;
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
                w.device_id = device_id;
                emit(w);
            }
        }
    }
    Ok(count)
}

struct Link {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

fn connect_once(addrs: &[SocketAddr], config: &IotConfig) -> Option<Link> {
    for a in addrs {
        if let Ok(s) = TcpStream::connect_timeout(a, config.connect_timeout) {
            let _ = s.set_nodelay(true);
            let _ = s.set_read_timeout(Some(config.ack_timeout));
            let r = s.try_clone().ok()?;
            return Some(Link { reader: BufReader::new(r), writer: BufWriter::new(s) });
        }
    }
    None
}

/// Connects, retrying with 0.5 s doubling backoff (capped at 8 s).
/// Returns the number of attempts made on failure.
fn connect(addrs: &[SocketAddr], config: &IotConfig) -> Result<Link, u32> {
    let mut backoff = BACKOFF_START;
    let mut attempts = 0;
    loop {
        attempts += 1;
        if let Some(link) = connect_once(addrs, config) {
            return Ok(link);
        }
        if attempts > config.retries {
            return Err(attempts);
        }
        thread::sleep(backoff);
        backoff = (backoff * 2).min(BACKOFF_CAP);
    }
}

fn send_and_await_ack(link: &mut Link, bytes: &[u8], seq: u64) -> Result<(), ProtocolError> {
    protocol::write_frame(&mut link.writer, bytes)?;
    let acked = protocol::read_ack(&mut link.reader)?;
    if acked != seq {
        return Err(ProtocolError::AckMismatch { expected: seq, got: acked });
    }
    Ok(())
}

/// Streams every window from `source` to the Edge at `config.edge`.
pub fn run_iot(source: IotSource, config: &IotConfig) -> Result<SessionStats, IotError> {
    let addrs: Vec<SocketAddr> = config
        .edge
        .to_socket_addrs()
        .map_err(|_| IotError::Address(config.edge.clone()))?
        .collect();
    if addrs.is_empty() {
        return Err(IotError::Address(config.edge.clone()));
    }
    let total = source.window_total();
    let queue = Arc::new(DropOldestQueue::<Acquired>::new(config.queue_capacity));
    let stop = Arc::new(AtomicBool::new(false));
    let acquisition = {
        let (queue, stop) = (Arc::clone(&queue), Arc::clone(&stop));
        let device_id = config.device_id;
        thread::spawn(move || {
            let r = acquire(source, device_id, &queue, &stop);
            queue.close();
            r
        })
    };

    let mut stats = SessionStats::default();
    let mut sampler = config.inject.map(|p| DelaySampler::new(p, config.inject_seed));
    let outcome = (|| -> Result<(), IotError> {
        let mut link = connect(&addrs, config).map_err(|attempts| IotError::RetryExhausted {
            attempts,
            unsent: total,
            stats: Box::default(),
        })?;
        while let Some(item) = queue.pop() {
            let mut packet = WindowPacket::from_window(&item.window, item.t_acquired_ns);
            let seq = packet.window_seq;
            let t_sent_ns = monotonic_ns();
            packet.t_sent_ns = t_sent_ns;
            let bytes = packet.encode()?;
            let injected_ms = sampler.as_mut().map_or(0.0, |s| s.sample_ms());
            if injected_ms > 0.0 {
                thread::sleep(Duration::from_secs_f64(injected_ms / 1e3));
            }
            let mut tries = 0;
            while let Err(e) = send_and_await_ack(&mut link, &bytes, seq) {
                if matches!(e, ProtocolError::AckMismatch { .. }) {
                    return Err(e.into());
                }
                tries += 1;
                stats.reconnects += 1;
                link = connect(&addrs, config).map_err(|attempts| IotError::RetryExhausted {
                    attempts,
                    unsent: total.saturating_sub(stats.windows_delivered as usize),
                    stats: Box::default(),
                })?;
            }
            stats.resends += tries;
            stats.windows_delivered += 1;
            stats.sent.push(SentWindow {
                window_seq: seq,
                t_acquired_ns: item.t_acquired_ns,
                t_sent_ns,
                iot_processing_ms: elapsed_ms(item.t_acquired_ns, t_sent_ns),
                injected_ms,
            });
        }
        Ok(())
    })();

    stop.store(true, Ordering::Relaxed);
    queue.close();
    let acquired = acquisition.join().expect("acquisition thread panicked");
    stats.windows_dropped = queue.dropped();
    match outcome {
        Err(IotError::RetryExhausted { attempts, unsent, .. }) => {
            stats.windows_acquired = *acquired.as_ref().unwrap_or(&0);
            Err(IotError::RetryExhausted { attempts, unsent, stats: Box::new(stats) })
        }
        Err(e) => Err(e),
        Ok(()) => {
            stats.windows_acquired = acquired?;
            Ok(stats)
        }
    }
}
