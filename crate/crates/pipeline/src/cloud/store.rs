//! Append-only JSON-lines event store with an in-memory index.
//!
//! `events.jsonl` holds one record per line: either a stored event
//! (`"kind": "event"`) or a validation update (`"kind": "validation"`).
//! The index is rebuilt by replaying the file on open.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use usv_core::event::CollisionEvent;
use usv_core::ImpactLabel;
use uuid::Uuid;

pub const STORE_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationAudit {
    pub t_ns: u64,
    pub human_validation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEvent {
    #[serde(flatten)]
    pub event: CollisionEvent,
    /// Cloud monotonic clock at ingestion.
    pub t_received_ns: u64,
    pub source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub validation_audit: Vec<ValidationAudit>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Event(StoredEvent),
    Validation { event_id: Uuid, t_ns: u64, human_validation: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Query {
    pub device: Option<u32>,
    pub label: Option<ImpactLabel>,
    pub since: Option<u64>,
    pub until: Option<u64>,
    pub limit: usize,
}

pub const DEFAULT_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub total: u64,
    pub counts: HashMap<ImpactLabel, u64>,
    /// Events per hour between the first ingestion and `now`.
    pub events_per_hour: Option<f64>,
    pub mean_edge_processing_ms: Option<f64>,
}

pub enum Insert {
    Created,
    Duplicate,
}

pub struct Store {
    path: PathBuf,
    file: BufWriter<File>,
    events: Vec<StoredEvent>,
    index: HashMap<Uuid, usize>,
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(STORE_FILE);
        let mut events = Vec::new();
        let mut index = HashMap::new();
        if path.exists() {
            for (n, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: Record = serde_json::from_str(&line).map_err(|e| {
                    io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
                })?;
                match rec {
                    Record::Event(ev) => {
                        if !index.contains_key(&ev.event.event_id) {
                            index.insert(ev.event.event_id, events.len());
                            events.push(ev);
                        }
                    }
                    Record::Validation { event_id, t_ns, human_validation } => {
                        if let Some(&i) = index.get(&event_id) {
                            apply_validation(&mut events[i], t_ns, human_validation);
                        }
                    }
                }
            }
        }
        let file = BufWriter::new(OpenOptions::new().create(true).append(true).open(&path)?);
        Ok(Self { path, file, events, index })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn append(&mut self, rec: &Record) -> io::Result<()> {
        serde_json::to_writer(&mut self.file, rec)?;
        self.file.write_all(b"\n")?;
        self.file.flush()
    }

    /// Persists `ev` unless its id is already stored.
    pub fn insert(&mut self, ev: StoredEvent) -> io::Result<Insert> {
        if self.index.contains_key(&ev.event.event_id) {
            return Ok(Insert::Duplicate);
        }
        let rec = Record::Event(ev);
        self.append(&rec)?;
        let Record::Event(ev) = rec else { unreachable!() };
        self.index.insert(ev.event.event_id, self.events.len());
        self.events.push(ev);
        Ok(Insert::Created)
    }

    pub fn get(&self, id: &Uuid) -> Option<&StoredEvent> {
        self.index.get(id).map(|&i| &self.events[i])
    }

    /// Sets `human_validation`; `Ok(None)` when the id is unknown.
    pub fn validate(&mut self, id: &Uuid, text: String, t_ns: u64) -> io::Result<Option<&StoredEvent>> {
        let Some(&i) = self.index.get(id) else { return Ok(None) };
        self.append(&Record::Validation { event_id: *id, t_ns, human_validation: text.clone() })?;
        apply_validation(&mut self.events[i], t_ns, text);
        Ok(Some(&self.events[i]))
    }

    /// Matching records ordered by ingestion time.
    pub fn query(&self, q: &Query) -> Vec<&StoredEvent> {
        let mut out: Vec<&StoredEvent> = self
            .events
            .iter()
            .filter(|e| q.device.is_none_or(|d| e.event.device_id == d))
            .filter(|e| q.label.is_none_or(|l| e.event.label == l))
            .filter(|e| q.since.is_none_or(|s| e.t_received_ns >= s))
            .filter(|e| q.until.is_none_or(|u| e.t_received_ns <= u))
            .collect();
        out.sort_by_key(|e| e.t_received_ns);
        out.truncate(q.limit);
        out
    }

    pub fn stats(&self, now_ns: u64) -> Stats {
        let mut counts: HashMap<ImpactLabel, u64> = ImpactLabel::ALL.iter().map(|&l| (l, 0)).collect();
        let mut sum = 0.0f64;
        for e in &self.events {
            *counts.get_mut(&e.event.label).unwrap() += 1;
            sum += e.event.edge_processing_ms;
        }
        let n = self.events.len();
        let first = self.events.iter().map(|e| e.t_received_ns).min();
        let events_per_hour = first.map(|f| {
            let hours = (now_ns.saturating_sub(f) as f64 / 3.6e12).max(1.0 / 3600.0);
            n as f64 / hours
        });
        Stats {
            total: n as u64,
            counts,
            events_per_hour,
            mean_edge_processing_ms: (n > 0).then(|| sum / n as f64),
        }
    }
}

fn apply_validation(ev: &mut StoredEvent, t_ns: u64, text: String) {
    ev.event.human_validation = Some(text.clone());
    ev.validation_audit.push(ValidationAudit { t_ns, human_validation: text });
}
