//! Structured event journal: one JSON object per line, flushed per event.
//!
//! The journal is the node's machine-readable log. The evaluation harness
//! reconstructs send/receive/delivery timelines from it, and the acceptance
//! checks assert hop counts, previous-node chains, deletion reasons, and
//! transmission counts against it.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Event names used by the node. Kept as constants so harness and pipeline
/// cannot drift apart.
pub mod event {
    pub const STARTED: &str = "started";
    pub const SHUTDOWN: &str = "shutdown";
    pub const CREATED: &str = "created";
    pub const RECEIVED: &str = "received";
    pub const DUPLICATE: &str = "duplicate";
    pub const DELIVERED: &str = "delivered";
    pub const SENT: &str = "sent";
    pub const SEND_FAILED: &str = "send_failed";
    pub const DELETED: &str = "deleted";
    pub const REPORT_SENT: &str = "report_sent";
    pub const ADMIN_RECEIVED: &str = "admin_received";
    pub const PEER_APPEARED: &str = "peer_appeared";
    pub const PEER_DISAPPEARED: &str = "peer_disappeared";
    pub const GC: &str = "gc";
    pub const SAMPLE: &str = "sample";
}

/// One journal line. Only fields relevant to the event are populated.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct JournalEvent {
    /// Unix microseconds.
    pub ts_us: u64,
    pub event: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dst: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prev_node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refers_to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes_in: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes_out: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpu_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl JournalEvent {
    pub fn new(event: &str) -> JournalEvent {
        JournalEvent { ts_us: now_unix_micros(), event: event.into(), ..Default::default() }
    }

    pub fn bundle(mut self, key: impl Into<String>) -> Self {
        self.bundle = Some(key.into());
        self
    }

    pub fn peer(mut self, peer: impl Into<String>) -> Self {
        self.peer = Some(peer.into());
        self
    }

    pub fn reason(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }
}

pub fn now_unix_micros() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as u64).unwrap_or(0)
}

/// Line-oriented journal writer, safe for concurrent use.
pub struct Journal {
    node: String,
    writer: Mutex<BufWriter<File>>,
}

impl Journal {
    pub fn open(path: &Path, node: &str) -> std::io::Result<Journal> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Journal { node: node.into(), writer: Mutex::new(BufWriter::new(file)) })
    }

    pub fn emit(&self, mut event: JournalEvent) {
        event.node = Some(self.node.clone());
        log::debug!("journal: {} {:?}", event.event, event.bundle);
        let mut writer = self.writer.lock().unwrap();
        // a torn final line from a crash is tolerated by readers
        if serde_json::to_writer(&mut *writer, &event).is_ok() {
            let _ = writer.write_all(b"\n");
            let _ = writer.flush();
        }
    }
}

/// Read all events from a journal file, skipping a torn trailing line.
pub fn read_events(path: &Path) -> std::io::Result<Vec<JournalEvent>> {
    let file = File::open(path)?;
    let mut events = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JournalEvent>(&line) {
            Ok(event) => events.push(event),
            Err(_) => break,
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emit_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let journal = Journal::open(&path, "dtn:n1").unwrap();
        journal.emit(JournalEvent::new(event::STARTED));
        journal.emit(JournalEvent::new(event::RECEIVED).bundle("dtn:b2-0-23"));
        let events = read_events(&path).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].event, event::STARTED);
        assert_eq!(events[0].node.as_deref(), Some("dtn:n1"));
        assert_eq!(events[1].bundle.as_deref(), Some("dtn:b2-0-23"));
    }

    #[test]
    fn torn_tail_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let journal = Journal::open(&path, "dtn:n1").unwrap();
        journal.emit(JournalEvent::new(event::STARTED));
        drop(journal);
        use std::io::Write as _;
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"ts_us\":12,\"eve").unwrap();
        drop(f);
        let events = read_events(&path).unwrap();
        assert_eq!(events.len(), 1);
    }
}
