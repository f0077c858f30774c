//! Edge→Cloud event forwarding with bounded retries and a local spool.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use usv_core::event::CollisionEvent;

use super::EdgeObservation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub retries: u32,
    pub spacing: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { retries: 3, spacing: Duration::from_millis(200), timeout: Duration::from_secs(5) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryState {
    Delivered,
    /// Cloud answered 4xx; kept in the spool for inspection.
    Rejected,
    Spooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub event_id: uuid::Uuid,
    pub device_id: u32,
    pub window_seq: u64,
    pub state: DeliveryState,
    pub attempts: u32,
    /// Round-trip time of the successful attempt.
    pub rtt_ms: Option<f64>,
    pub status: Option<u16>,
}

enum Attempt {
    Status(u16, f64),
    Failed(String),
}

/// Blocking HTTP client for `POST {base}/events`.
pub struct Forwarder {
    agent: ureq::Agent,
    url: String,
    retry: RetryPolicy,
}

impl Forwarder {
    pub fn new(cloud_base: &str, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(retry.timeout))
            .build()
            .into();
        Self { agent, url: format!("{}/events", cloud_base.trim_end_matches('/')), retry }
    }

    fn attempt(&self, body: &[u8]) -> Attempt {
        let t0 = Instant::now();
        let result = self.agent.post(&self.url).header("content-type", "application/json").send(body);
        match result {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let _ = resp.body_mut().read_to_vec();
                Attempt::Status(status, t0.elapsed().as_secs_f64() * 1e3)
            }
            Err(e) => Attempt::Failed(e.to_string()),
        }
    }

    /// Posts `event`, retrying on 5xx, timeouts and connection errors.
    /// Never spools; a non-delivered result is reported as `Spooled`.
    pub fn forward_event(&self, event: &CollisionEvent) -> DeliveryRecord {
        let body = serde_json::to_vec(event).expect("event serializes");
        let mut rec = DeliveryRecord {
            event_id: event.event_id,
            device_id: event.device_id,
            window_seq: event.window_seq,
            state: DeliveryState::Spooled,
            attempts: 0,
            rtt_ms: None,
            status: None,
        };
        for k in 0..=self.retry.retries {
            if k > 0 {
                thread::sleep(self.retry.spacing);
            }
            rec.attempts += 1;
            match self.attempt(&body) {
                Attempt::Status(s, rtt) if (200..300).contains(&s) => {
                    rec.state = DeliveryState::Delivered;
                    rec.rtt_ms = Some(rtt);
                    rec.status = Some(s);
                    return rec;
                }
                Attempt::Status(s, _) if (400..500).contains(&s) => {
                    rec.state = DeliveryState::Rejected;
                    rec.status = Some(s);
                    return rec;
                }
                Attempt::Status(s, _) => rec.status = Some(s),
                Attempt::Failed(reason) => eprintln!("edge: POST {} failed: {reason}", self.url),
            }
        }
        rec
    }
}

/// Append-only JSON-lines file of undelivered events.
pub struct Spool {
    path: PathBuf,
    file: BufWriter<File>,
}

impl Spool {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file: BufWriter::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &CollisionEvent) -> io::Result<()> {
        serde_json::to_writer(&mut self.file, event)?;
        self.file.write_all(b"\n")?;
        self.file.flush()
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.file.flush()?;
        self.file.get_ref().sync_data()
    }

    /// Removes and returns every spooled event.
    pub fn take_all(&mut self) -> io::Result<Vec<CollisionEvent>> {
        self.file.flush()?;
        let events = read_spool(&self.path)?;
        self.file = BufWriter::new(OpenOptions::new().write(true).truncate(true).open(&self.path)?);
        Ok(events)
    }
}

pub fn read_spool(path: impl AsRef<Path>) -> io::Result<Vec<CollisionEvent>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}

/// Background forwarder fed by a bounded queue.
pub struct Dispatcher {
    tx: Option<SyncSender<CollisionEvent>>,
    spool: Arc<Mutex<Spool>>,
    draining: Arc<AtomicBool>,
    observer: Option<Sender<EdgeObservation>>,
    handle: Option<JoinHandle<()>>,
}

fn settle(
    forwarder: &Forwarder,
    spool: &Mutex<Spool>,
    event: &CollisionEvent,
    observer: &Option<Sender<EdgeObservation>>,
) {
    let rec = forwarder.forward_event(event);
    if rec.state != DeliveryState::Delivered {
        if let Err(e) = spool.lock().unwrap().append(event) {
            eprintln!("edge: spool write failed: {e}");
        }
    }
    if let Some(o) = observer {
        let _ = o.send(EdgeObservation::Delivery(rec));
    }
}

impl Dispatcher {
    pub fn start(
        forwarder: Forwarder,
        spool: Spool,
        capacity: usize,
        observer: Option<Sender<EdgeObservation>>,
    ) -> io::Result<Self> {
        let spool = Arc::new(Mutex::new(spool));
        let leftovers = spool.lock().unwrap().take_all()?;
        let (tx, rx): (SyncSender<CollisionEvent>, Receiver<CollisionEvent>) = mpsc::sync_channel(capacity);
        let draining = Arc::new(AtomicBool::new(false));
        let handle = {
            let (spool, draining, observer) = (Arc::clone(&spool), Arc::clone(&draining), observer.clone());
            thread::Builder::new().name("edge-dispatch".into()).spawn(move || {
                for ev in &leftovers {
                    settle(&forwarder, &spool, ev, &None);
                }
                for ev in rx {
                    if draining.load(Ordering::Relaxed) {
                        let _ = spool.lock().unwrap().append(&ev);
                        if let Some(o) = &observer {
                            let _ = o.send(EdgeObservation::Delivery(spooled(&ev, 0)));
                        }
                    } else {
                        settle(&forwarder, &spool, &ev, &observer);
                    }
                }
                if let Err(e) = spool.lock().unwrap().flush() {
                    eprintln!("edge: spool flush failed: {e}");
                }
            })?
        };
        Ok(Self { tx: Some(tx), spool, draining, observer, handle: Some(handle) })
    }

    /// Cloneable handle for queueing events from other threads.
    pub fn submitter(&self) -> Submitter {
        Submitter { tx: self.tx.clone().expect("dispatcher running"), spool: Arc::clone(&self.spool), observer: self.observer.clone() }
    }

    /// Spools whatever is still queued, flushes the spool and stops.
    pub fn shutdown(mut self) {
        self.draining.store(true, Ordering::Relaxed);
        self.tx.take();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[derive(Clone)]
pub struct Submitter {
    tx: SyncSender<CollisionEvent>,
    spool: Arc<Mutex<Spool>>,
    observer: Option<Sender<EdgeObservation>>,
}

impl Submitter {
    /// Queues `event` without blocking; a full queue spools it directly.
    pub fn submit(&self, event: CollisionEvent) {
        match self.tx.try_send(event) {
            Ok(()) => {}
            Err(TrySendError::Full(ev)) | Err(TrySendError::Disconnected(ev)) => {
                if let Err(e) = self.spool.lock().unwrap().append(&ev) {
                    eprintln!("edge: spool write failed: {e}");
                }
                if let Some(o) = &self.observer {
                    let _ = o.send(EdgeObservation::Delivery(spooled(&ev, 0)));
                }
            }
        }
    }
}

fn spooled(ev: &CollisionEvent, attempts: u32) -> DeliveryRecord {
    DeliveryRecord {
        event_id: ev.event_id,
        device_id: ev.device_id,
        window_seq: ev.window_seq,
        state: DeliveryState::Spooled,
        attempts,
        rtt_ms: None,
        status: None,
    }
}
