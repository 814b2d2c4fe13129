//! Per-endpoint delivery queues for the application agent.
//!
//! Fetching drains: an entry is returned exactly once across all fetches,
//! however clients interleave. A global seen-set enforces at-most-once
//! delivery per bundle id even if the pipeline were to offer a duplicate.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::sync::Mutex;

use base64::Engine;
use serde::{Deserialize, Serialize};

/// The field-subset view of a delivered bundle handed to applications.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MailboxEntry {
    /// Rendered bundle id.
    pub id: String,
    pub source: String,
    pub destination: String,
    /// `(dtn_time, sequence)`.
    pub creation: (u64, u64),
    pub payload_b64: String,
}

impl MailboxEntry {
    pub fn from_bundle(bundle: &bp7::Bundle) -> MailboxEntry {
        MailboxEntry {
            id: bundle.id().to_string(),
            source: bundle.primary.source().to_string(),
            destination: bundle.primary.destination().to_string(),
            creation: (bundle.primary.creation().dtn_time, bundle.primary.creation().sequence),
            payload_b64: base64::engine::general_purpose::STANDARD
                .encode(bundle.payload().unwrap_or(&[])),
        }
    }

    pub fn payload(&self) -> Option<Vec<u8>> {
        base64::engine::general_purpose::STANDARD.decode(&self.payload_b64).ok()
    }
}

#[derive(Debug, Default)]
struct MailState {
    registered: BTreeSet<String>,
    queues: BTreeMap<String, VecDeque<MailboxEntry>>,
    seen: HashSet<String>,
}

#[derive(Debug, Default)]
pub struct Mailboxes {
    inner: Mutex<MailState>,
}

/// Fetch addressed an endpoint nobody registered.
#[derive(Debug, PartialEq, Eq)]
pub struct UnregisteredEndpoint(pub String);

impl Mailboxes {
    pub fn new(initial: impl IntoIterator<Item = String>) -> Mailboxes {
        let mut state = MailState::default();
        for endpoint in initial {
            state.registered.insert(endpoint);
        }
        Mailboxes { inner: Mutex::new(state) }
    }

    /// Idempotent registration. Returns true when the endpoint was new.
    pub fn register(&self, endpoint: &str) -> bool {
        self.inner.lock().unwrap().registered.insert(endpoint.to_string())
    }

    pub fn is_registered(&self, endpoint: &str) -> bool {
        self.inner.lock().unwrap().registered.contains(endpoint)
    }

    pub fn registered(&self) -> Vec<String> {
        self.inner.lock().unwrap().registered.iter().cloned().collect()
    }

    /// Queue an entry for its endpoint. Returns false when this bundle id
    /// was already delivered once (the entry is then dropped).
    pub fn deliver(&self, entry: MailboxEntry) -> bool {
        let mut state = self.inner.lock().unwrap();
        if !state.seen.insert(entry.id.clone()) {
            return false;
        }
        state.queues.entry(entry.destination.clone()).or_default().push_back(entry);
        true
    }

    /// Remove and return everything queued for `endpoint`, or for all
    /// registered endpoints when `None`.
    pub fn drain(
        &self,
        endpoint: Option<&str>,
    ) -> Result<Vec<MailboxEntry>, UnregisteredEndpoint> {
        let mut state = self.inner.lock().unwrap();
        match endpoint {
            Some(endpoint) => {
                if !state.registered.contains(endpoint) {
                    return Err(UnregisteredEndpoint(endpoint.to_string()));
                }
                Ok(state
                    .queues
                    .get_mut(endpoint)
                    .map(|q| q.drain(..).collect())
                    .unwrap_or_default())
            }
            None => {
                let mut out = Vec::new();
                for queue in state.queues.values_mut() {
                    out.extend(queue.drain(..));
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, dest: &str) -> MailboxEntry {
        MailboxEntry {
            id: id.into(),
            source: "dtn:src".into(),
            destination: dest.into(),
            creation: (0, 1),
            payload_b64: base64::engine::general_purpose::STANDARD.encode(b"hi"),
        }
    }

    #[test]
    fn drain_is_destructive() {
        let boxes = Mailboxes::new(["dtn:a".to_string()]);
        assert!(boxes.deliver(entry("k1", "dtn:a")));
        let got = boxes.drain(Some("dtn:a")).unwrap();
        assert_eq!(got.len(), 1);
        assert!(boxes.drain(Some("dtn:a")).unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_are_dropped() {
        let boxes = Mailboxes::new(["dtn:a".to_string()]);
        assert!(boxes.deliver(entry("k1", "dtn:a")));
        assert!(!boxes.deliver(entry("k1", "dtn:a")));
        assert_eq!(boxes.drain(None).unwrap().len(), 1);
    }

    #[test]
    fn unregistered_fetch_is_an_error() {
        let boxes = Mailboxes::new([]);
        assert_eq!(
            boxes.drain(Some("dtn:nope")).unwrap_err(),
            UnregisteredEndpoint("dtn:nope".into())
        );
    }

    #[test]
    fn concurrent_drains_partition_entries() {
        use std::sync::Arc;
        let boxes = Arc::new(Mailboxes::new(["dtn:a".to_string()]));
        for i in 0..200 {
            boxes.deliver(entry(&format!("k{i}"), "dtn:a"));
        }
        let mut handles = Vec::new();
        for _ in 0..4 {
            let boxes = boxes.clone();
            handles.push(std::thread::spawn(move || boxes.drain(Some("dtn:a")).unwrap()));
        }
        let mut all: Vec<String> = Vec::new();
        for h in handles {
            all.extend(h.join().unwrap().into_iter().map(|e| e.id));
        }
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 200, "every entry exactly once across drains");
    }
}
