//! Known peers and how to reach them: statically pinned entries from the
//! config plus whatever discovery hears. Pinned peers never expire.

use std::collections::BTreeMap;
use std::sync::Mutex;

use bp7::EndpointId;

use crate::cla::ClaDescriptor;

#[derive(Debug, Clone)]
pub struct PeerInfo {
    pub eid: EndpointId,
    pub clas: Vec<ClaDescriptor>,
    pub pinned: bool,
}

#[derive(Debug, Default)]
pub struct PeerTable {
    inner: Mutex<BTreeMap<String, PeerInfo>>,
}

impl PeerTable {
    pub fn new(static_peers: Vec<(EndpointId, ClaDescriptor)>) -> PeerTable {
        let mut map = BTreeMap::new();
        for (eid, cla) in static_peers {
            let entry = map.entry(eid.to_string()).or_insert_with(|| PeerInfo {
                eid: eid.clone(),
                clas: Vec::new(),
                pinned: true,
            });
            entry.clas.push(cla);
        }
        PeerTable { inner: Mutex::new(map) }
    }

    /// Record a discovered peer. Returns true when the peer was new.
    pub fn upsert_discovered(&self, eid: &EndpointId, cla_texts: &[String]) -> bool {
        let clas: Vec<ClaDescriptor> =
            cla_texts.iter().filter_map(|t| t.parse().ok()).collect();
        let mut map = self.inner.lock().unwrap();
        match map.get_mut(&eid.to_string()) {
            Some(info) => {
                if !info.pinned {
                    info.clas = clas;
                }
                false
            }
            None => {
                map.insert(eid.to_string(), PeerInfo { eid: eid.clone(), clas, pinned: false });
                true
            }
        }
    }

    /// Drop a discovered peer. Pinned peers stay. Returns true when removed.
    pub fn remove_discovered(&self, eid: &EndpointId) -> bool {
        let mut map = self.inner.lock().unwrap();
        if map.get(&eid.to_string()).is_some_and(|info| !info.pinned) {
            map.remove(&eid.to_string());
            true
        } else {
            false
        }
    }

    /// MTCP address (`host:port`) for a peer, if it announced one.
    pub fn resolve_mtcp(&self, eid_text: &str) -> Option<String> {
        let map = self.inner.lock().unwrap();
        map.get(eid_text)?.clas.iter().find(|c| c.is_mtcp()).map(|c| c.socket_addr_text())
    }

    pub fn snapshot(&self) -> Vec<PeerInfo> {
        self.inner.lock().unwrap().values().cloned().collect()
    }
}
