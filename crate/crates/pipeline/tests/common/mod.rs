#![allow(dead_code)]

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use usv_core::classifier::{ClassProbs, NetworkConfig, Weights};
use usv_core::event::CollisionEvent;
use usv_core::protocol::{self, WindowPacket};
use usv_core::signal::{synthesize_voyage, window_stream, ImpactScenario, SampleWindow, WindowSpec};
use usv_core::ImpactLabel;

pub fn untrained_weights() -> Weights<f32> {
    Weights::init(&NetworkConfig::mini(), 7)
}

/// `n` consecutive windows of one synthetic voyage, tagged with `device`.
pub fn windows(n: usize, device: u32, seed: u64) -> Vec<SampleWindow> {
    let scenario = ImpactScenario {
        label: ImpactLabel::Port,
        impact_t_s: 4.0,
        duration_s: 5.0 + 3.0 * (n as f64 - 1.0),
        rng_seed: seed,
        ..Default::default()
    };
    let samples = synthesize_voyage(&scenario).unwrap().samples;
    let mut out = window_stream(&samples, &WindowSpec::default()).unwrap();
    out.truncate(n);
    for w in &mut out {
        w.device_id = device;
    }
    assert_eq!(out.len(), n);
    out
}

pub fn probs_for(label: ImpactLabel) -> ClassProbs {
    let mut p = [0.1; 4];
    p[label.index()] = 0.7;
    ClassProbs(p)
}

pub fn event(label: ImpactLabel, edge_ms: f64) -> CollisionEvent {
    CollisionEvent {
        event_id: uuid::Uuid::new_v4(),
        device_id: 1,
        window_seq: 0,
        t_window_start_ns: 0,
        label,
        probs: probs_for(label),
        scalogram_digest: "ab".repeat(32),
        edge_processing_ms: edge_ms,
        human_validation: None,
        scalogram_b64: None,
    }
}

/// Minimal blocking HTTP client returning status and body text.
pub struct Http {
    agent: ureq::Agent,
    pub base: String,
}

impl Http {
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        Self { agent, base: base.into() }
    }

    fn finish(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, String) {
        let mut r = r.expect("http request");
        let status = r.status().as_u16();
        (status, r.body_mut().with_config().limit(256 << 20).read_to_string().expect("response body"))
    }

    pub fn get(&self, path: &str) -> (u16, String) {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn post(&self, path: &str, body: &str) -> (u16, String) {
        Self::finish(self.agent.post(format!("{}{path}", self.base)).header("content-type", "application/json").send(body))
    }

    pub fn patch(&self, path: &str, body: &str) -> (u16, String) {
        Self::finish(self.agent.patch(format!("{}{path}", self.base)).header("content-type", "application/json").send(body))
    }

    pub fn get_json(&self, path: &str) -> serde_json::Value {
        let (s, b) = self.get(path);
        assert_eq!(s, 200, "GET {path}: {b}");
        serde_json::from_str(&b).unwrap()
    }
}

/// TCP listener that decodes frames, acknowledges them and records them.
/// A packet repeating the device's previous `(seq, t_acquired_ns)` is
/// acknowledged but only counted, as the real edge does.
pub struct FakeEdge {
    pub addr: SocketAddr,
    pub received: Arc<Mutex<Vec<WindowPacket>>>,
    pub resends: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl FakeEdge {
    pub fn start(addr: &str) -> Self {
        Self::start_with(addr, Arc::new(Mutex::new(Vec::new())), Arc::new(AtomicUsize::new(0)), usize::MAX)
    }

    /// Serves until `limit` packets have been acknowledged in total, then
    /// closes the listener and every connection.
    pub fn start_with(
        addr: &str,
        received: Arc<Mutex<Vec<WindowPacket>>>,
        resends: Arc<AtomicUsize>,
        limit: usize,
    ) -> Self {
        let listener = TcpListener::bind(addr).unwrap();
        listener.set_nonblocking(true).unwrap();
        let addr = listener.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let (received, resends, stop) = (Arc::clone(&received), Arc::clone(&resends), Arc::clone(&stop));
            thread::spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let Ok((stream, _)) = listener.accept() else {
                        thread::sleep(Duration::from_millis(5));
                        continue;
                    };
                    stream.set_nonblocking(false).unwrap();
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut writer = BufWriter::new(stream);
                    while let Ok(Some(p)) = protocol::read_frame(&mut reader) {
                        let seq = p.window_seq;
                        let total = {
                            let mut r = received.lock().unwrap();
                            let again = r.iter().rev().find(|q| q.device_id == p.device_id).is_some_and(|q| {
                                (q.window_seq, q.t_acquired_ns) == (p.window_seq, p.t_acquired_ns)
                            });
                            if again {
                                resends.fetch_add(1, Ordering::Relaxed);
                            } else {
                                r.push(p);
                            }
                            r.len()
                        };
                        if protocol::write_ack(&mut writer, seq).is_err() {
                            break;
                        }
                        if total >= limit {
                            let _ = writer.get_ref().shutdown(Shutdown::Both);
                            return;
                        }
                    }
                }
            })
        };
        Self { addr, received, resends, stop, thread: Some(thread) }
    }

    pub fn seqs(&self) -> Vec<u64> {
        self.received.lock().unwrap().iter().map(|p| p.window_seq).collect()
    }

    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for FakeEdge {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

/// Forwards TCP traffic to `upstream` and severs the first connection once
/// `cut_after` client bytes have passed through. Later connections are
/// forwarded untouched.
pub struct CuttingProxy {
    pub addr: SocketAddr,
    pub cuts: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
}

impl CuttingProxy {
    pub fn start(upstream: SocketAddr, cut_after: usize) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let addr = listener.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let cuts = Arc::new(AtomicUsize::new(0));
        {
            let (stop, cuts) = (Arc::clone(&stop), Arc::clone(&cuts));
            thread::spawn(move || {
                let mut first = true;
                while !stop.load(Ordering::Relaxed) {
                    let Ok((client, _)) = listener.accept() else {
                        thread::sleep(Duration::from_millis(5));
                        continue;
                    };
                    client.set_nonblocking(false).unwrap();
                    let server = TcpStream::connect(upstream).unwrap();
                    let limit = if first { cut_after } else { usize::MAX };
                    first = false;
                    let cuts = Arc::clone(&cuts);
                    thread::spawn(move || pipe_pair(client, server, limit, &cuts));
                }
            });
        }
        Self { addr, cuts, stop }
    }
}

impl Drop for CuttingProxy {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

fn pipe_pair(client: TcpStream, server: TcpStream, limit: usize, cuts: &AtomicUsize) {
    let (mut c_read, mut s_write) = (client.try_clone().unwrap(), server.try_clone().unwrap());
    let (mut s_read, mut c_write) = (server.try_clone().unwrap(), client.try_clone().unwrap());
    let back = thread::spawn(move || {
        let _ = std::io::copy(&mut s_read, &mut c_write);
        let _ = c_write.shutdown(Shutdown::Both);
    });
    let mut passed = 0usize;
    let mut buf = [0u8; 8192];
    loop {
        let n = match c_read.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        let allowed = n.min(limit - passed);
        if s_write.write_all(&buf[..allowed]).is_err() {
            break;
        }
        passed += allowed;
        if passed >= limit {
            cuts.fetch_add(1, Ordering::Relaxed);
            break;
        }
    }
    let _ = client.shutdown(Shutdown::Both);
    let _ = server.shutdown(Shutdown::Both);
    let _ = back.join();
}

/// HTTP/1.1 responder that answers successive requests with the scripted
/// status codes (the last one repeats) and counts requests.
pub struct ScriptedServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
}

impl ScriptedServer {
    pub fn start(statuses: Vec<u16>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        {
            let (requests, stop) = (Arc::clone(&requests), Arc::clone(&stop));
            thread::spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let Ok((stream, _)) = listener.accept() else {
                        thread::sleep(Duration::from_millis(2));
                        continue;
                    };
                    stream.set_nonblocking(false).unwrap();
                    let k = requests.fetch_add(1, Ordering::Relaxed);
                    let status = statuses[k.min(statuses.len() - 1)];
                    answer(stream, status);
                }
            });
        }
        Self { url, requests, stop }
    }
}

impl Drop for ScriptedServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

fn answer(stream: TcpStream, status: u16) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut head = Vec::new();
    let mut byte = [0u8; 1];
    while !head.ends_with(b"\r\n\r\n") {
        if reader.read_exact(&mut byte).is_err() {
            return;
        }
        head.push(byte[0]);
    }
    let head = String::from_utf8_lossy(&head).to_ascii_lowercase();
    let len = head
        .lines()
        .find_map(|l| l.strip_prefix("content-length:"))
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let mut body = vec![0u8; len];
    let _ = reader.read_exact(&mut body);
    let mut w = stream;
    let _ = write!(w, "HTTP/1.1 {status} Scripted\r\ncontent-type: application/json\r\ncontent-length: 2\r\nconnection: close\r\n\r\n{{}}");
    let _ = w.flush();
}

/// An address nothing listens on.
pub fn dead_addr() -> SocketAddr {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap()
}
