//! TCP listener and per-connection processing loop.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::Sender;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use usv_core::classifier::ClassProbs;
use usv_core::clock::{elapsed_ms, monotonic_ns};
use usv_core::event::CollisionEvent;
use usv_core::protocol::{self, WindowPacket};
use usv_core::ImpactLabel;

use super::classify::{Decider, DecisionPolicy, EdgeClassifier, StageTimings};
use super::dispatch::{Dispatcher, Forwarder, RetryPolicy, Spool, Submitter};
use super::EdgeObservation;

#[derive(Debug, Clone)]
pub struct EdgeConfig {
    pub listen: String,
    pub cloud_url: String,
    pub policy: DecisionPolicy,
    pub send_scalograms: bool,
    pub spool_path: PathBuf,
    pub dispatch_capacity: usize,
    pub retry: RetryPolicy,
    /// Print one JSON object per window on standard output.
    pub log_windows: bool,
}

impl EdgeConfig {
    pub fn new(listen: impl Into<String>, cloud_url: impl Into<String>) -> Self {
        Self {
            listen: listen.into(),
            cloud_url: cloud_url.into(),
            policy: DecisionPolicy::default(),
            send_scalograms: false,
            spool_path: PathBuf::from("spool.jsonl"),
            dispatch_capacity: 256,
            retry: RetryPolicy::default(),
            log_windows: false,
        }
    }
}

/// Per-window log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub device_id: u32,
    pub window_seq: u64,
    pub event_id: uuid::Uuid,
    pub label: ImpactLabel,
    pub probs: ClassProbs,
    pub alert: Option<ImpactLabel>,
    pub timings: StageTimings,
    pub t_acquired_ns: u64,
    pub t_sent_ns: u64,
    pub t_received_ns: u64,
    /// IoT-side `t_sent - t_acquired`.
    pub iot_processing_ms: f64,
    /// One-way `t_received - t_sent`; meaningful when both nodes share a clock.
    pub iot_edge_ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub windows: u64,
    pub duplicates: u64,
    pub dropped_connections: u64,
}

#[derive(Default)]
struct Counters {
    windows: AtomicU64,
    duplicates: AtomicU64,
    dropped_connections: AtomicU64,
}

struct Shared {
    classifier: Arc<EdgeClassifier>,
    config: EdgeConfig,
    submitter: Submitter,
    observer: Option<Sender<EdgeObservation>>,
    /// Last `(window_seq, t_acquired_ns)` accepted per device.
    last_seen: Mutex<HashMap<u32, (u64, u64)>>,
    counters: Counters,
    stdout: Mutex<()>,
}

pub struct EdgeHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
    conns: Arc<Mutex<Vec<(TcpStream, JoinHandle<()>)>>>,
    dispatcher: Option<Dispatcher>,
    shared: Arc<Shared>,
}

impl EdgeHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn windows_processed(&self) -> u64 {
        self.shared.counters.windows.load(Ordering::Relaxed)
    }

    /// Stops accepting, closes connections, spools any queued events and
    /// flushes the spool.
    pub fn shutdown(mut self) -> EdgeSummary {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        let conns: Vec<_> = std::mem::take(&mut *self.conns.lock().unwrap());
        for (s, _) in &conns {
            let _ = s.shutdown(Shutdown::Both);
        }
        for (_, h) in conns {
            let _ = h.join();
        }
        let summary = EdgeSummary {
            windows: self.shared.counters.windows.load(Ordering::Relaxed),
            duplicates: self.shared.counters.duplicates.load(Ordering::Relaxed),
            dropped_connections: self.shared.counters.dropped_connections.load(Ordering::Relaxed),
        };
        drop(self.shared);
        if let Some(d) = self.dispatcher.take() {
            d.shutdown();
        }
        summary
    }
}

/// Binds the listener and starts the accept loop and dispatcher.
pub fn start_edge(
    config: EdgeConfig,
    classifier: Arc<EdgeClassifier>,
    observer: Option<Sender<EdgeObservation>>,
) -> io::Result<EdgeHandle> {
    config.policy.validate().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let listener = TcpListener::bind(&config.listen)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let dispatcher = Dispatcher::start(
        Forwarder::new(&config.cloud_url, config.retry),
        Spool::open(&config.spool_path)?,
        config.dispatch_capacity,
        observer.clone(),
    )?;
    let shared = Arc::new(Shared {
        classifier,
        submitter: dispatcher.submitter(),
        config,
        observer,
        last_seen: Mutex::new(HashMap::new()),
        counters: Counters::default(),
        stdout: Mutex::new(()),
    });
    let stop = Arc::new(AtomicBool::new(false));
    let conns = Arc::new(Mutex::new(Vec::new()));
    let accept = {
        let (stop, conns, shared) = (Arc::clone(&stop), Arc::clone(&conns), Arc::clone(&shared));
        thread::Builder::new().name("edge-accept".into()).spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let _ = stream.set_nonblocking(false);
                        let _ = stream.set_nodelay(true);
                        let Ok(ctl) = stream.try_clone() else { continue };
                        let shared = Arc::clone(&shared);
                        let h = thread::spawn(move || handle_connection(stream, peer, &shared));
                        let mut c = conns.lock().unwrap();
                        c.retain(|(_, h): &(TcpStream, JoinHandle<()>)| !h.is_finished());
                        c.push((ctl, h));
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                    Err(e) => {
                        eprintln!("edge: accept failed: {e}");
                        thread::sleep(Duration::from_millis(50));
                    }
                }
            }
        })?
    };
    Ok(EdgeHandle { addr, stop, accept: Some(accept), conns, dispatcher: Some(dispatcher), shared })
}

fn handle_connection(stream: TcpStream, peer: SocketAddr, shared: &Shared) {
    let ctl = stream.try_clone();
    let result = serve(stream, shared);
    // The accept loop holds a clone of the socket, so close it explicitly.
    if let Ok(s) = ctl {
        let _ = s.shutdown(Shutdown::Both);
    }
    let reason = match result {
        Ok(()) => None,
        Err(e) => {
            shared.counters.dropped_connections.fetch_add(1, Ordering::Relaxed);
            eprintln!("edge: dropping connection from {peer}: {e}");
            Some(e)
        }
    };
    if let Some(o) = &shared.observer {
        let _ = o.send(EdgeObservation::Closed { peer: peer.to_string(), reason });
    }
}

fn serve(stream: TcpStream, shared: &Shared) -> Result<(), String> {
    let mut reader = BufReader::new(stream.try_clone().map_err(|e| e.to_string())?);
    let mut writer = BufWriter::new(stream);
    let mut decider = Decider::new(shared.config.policy);
    loop {
        let packet = match protocol::read_frame(&mut reader) {
            Ok(Some(p)) => p,
            Ok(None) => return Ok(()),
            Err(e) => return Err(e.to_string()),
        };
        let t_received_ns = monotonic_ns();
        let key = (packet.window_seq, packet.t_acquired_ns);
        let duplicate = {
            let mut seen = shared.last_seen.lock().unwrap();
            let dup = seen.get(&packet.device_id) == Some(&key);
            seen.insert(packet.device_id, key);
            dup
        };
        if duplicate {
            shared.counters.duplicates.fetch_add(1, Ordering::Relaxed);
        } else {
            process(&packet, t_received_ns, &mut decider, shared)?;
        }
        protocol::write_ack(&mut writer, packet.window_seq).map_err(|e| e.to_string())?;
    }
}

fn process(packet: &WindowPacket, t_received_ns: u64, decider: &mut Decider, shared: &Shared) -> Result<(), String> {
    let window = packet.to_window();
    let c = shared.classifier.classify_window(&window).map_err(|e| format!("window {}: {e}", packet.window_seq))?;
    let alert = decider.observe(&c.probs);
    let event = CollisionEvent {
        event_id: uuid::Uuid::new_v4(),
        device_id: packet.device_id,
        window_seq: packet.window_seq,
        t_window_start_ns: packet.start_t_ns,
        label: c.probs.argmax(),
        probs: c.probs,
        scalogram_digest: c.scalogram.digest(),
        edge_processing_ms: c.timings.total_ms,
        human_validation: None,
        scalogram_b64: shared
            .config
            .send_scalograms
            .then(|| base64::engine::general_purpose::STANDARD.encode(c.scalogram.to_fixture_bytes())),
    };
    let record = WindowRecord {
        device_id: packet.device_id,
        window_seq: packet.window_seq,
        event_id: event.event_id,
        label: event.label,
        probs: c.probs,
        alert,
        timings: c.timings,
        t_acquired_ns: packet.t_acquired_ns,
        t_sent_ns: packet.t_sent_ns,
        t_received_ns,
        iot_processing_ms: elapsed_ms(packet.t_acquired_ns, packet.t_sent_ns),
        iot_edge_ms: elapsed_ms(packet.t_sent_ns, t_received_ns),
    };
    shared.counters.windows.fetch_add(1, Ordering::Relaxed);
    if shared.config.log_windows {
        let _guard = shared.stdout.lock().unwrap();
        let mut out = io::stdout().lock();
        let _ = serde_json::to_writer(&mut out, &record);
        let _ = out.write_all(b"\n");
        let _ = out.flush();
    }
    if let Some(o) = &shared.observer {
        let _ = o.send(EdgeObservation::Window(record));
    }
    shared.submitter.submit(event);
    Ok(())
}
