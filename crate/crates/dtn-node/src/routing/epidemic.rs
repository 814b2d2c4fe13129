//! Epidemic routing: forward every bundle to every live peer that does not
//! hold it yet, memorizing both senders and receivers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use bp7::EndpointId;

use super::{RoutingAgent, RoutingEvent, SentToStore};

pub struct EpidemicRouting {
    sent_to: Arc<dyn SentToStore>,
    /// Live peers keyed by rendered EID for deterministic selection order.
    live: BTreeMap<String, EndpointId>,
    /// Sender/receiver memory for bundles the store does not (or no longer
    /// does) track — e.g. duplicates of tombstoned bundles.
    overlay: HashMap<String, BTreeSet<String>>,
}

impl EpidemicRouting {
    pub fn new(sent_to: Arc<dyn SentToStore>) -> EpidemicRouting {
        EpidemicRouting { sent_to, live: BTreeMap::new(), overlay: HashMap::new() }
    }

    fn remember(&mut self, key: &str, peer: &EndpointId) {
        let peer_text = peer.to_string();
        if !self.sent_to.add_sent_to(key, &peer_text) {
            // store did not take it (unknown id): keep state lazily here
            if self.sent_to.sent_to(key).is_none() {
                self.overlay.entry(key.to_string()).or_default().insert(peer_text);
            }
        }
    }
}

impl RoutingAgent for EpidemicRouting {
    fn note_event(&mut self, event: RoutingEvent<'_>) {
        match event {
            RoutingEvent::BundleReceived { key, from: Some(sender) } => {
                self.remember(key, sender);
            }
            RoutingEvent::BundleReceived { .. } => {}
            RoutingEvent::BundleSent { key, to } => {
                self.remember(key, to);
            }
            RoutingEvent::PeerAppeared { peer } => {
                self.live.insert(peer.to_string(), peer.clone());
            }
            RoutingEvent::PeerDisappeared { peer } => {
                self.live.remove(&peer.to_string());
            }
        }
    }

    fn select_peers(&self, key: &str) -> Vec<EndpointId> {
        let mut excluded = self.sent_to.sent_to(key).unwrap_or_default();
        if let Some(extra) = self.overlay.get(key) {
            excluded.extend(extra.iter().cloned());
        }
        self.live
            .iter()
            .filter(|(text, _)| !excluded.contains(*text))
            .map(|(_, eid)| eid.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::MemorySentTo;

    fn eid(s: &str) -> EndpointId {
        s.parse().unwrap()
    }

    fn agent() -> EpidemicRouting {
        EpidemicRouting::new(Arc::new(MemorySentTo::default()))
    }

    #[test]
    fn excludes_the_sender() {
        let mut r = agent();
        r.note_event(RoutingEvent::PeerAppeared { peer: &eid("dtn:a") });
        r.note_event(RoutingEvent::PeerAppeared { peer: &eid("dtn:b") });
        r.note_event(RoutingEvent::BundleReceived { key: "k1", from: Some(&eid("dtn:a")) });
        assert_eq!(r.select_peers("k1"), vec![eid("dtn:b")]);
    }

    #[test]
    fn sent_is_a_set() {
        let mut r = agent();
        r.note_event(RoutingEvent::PeerAppeared { peer: &eid("dtn:b") });
        r.note_event(RoutingEvent::BundleSent { key: "k1", to: &eid("dtn:b") });
        r.note_event(RoutingEvent::BundleSent { key: "k1", to: &eid("dtn:b") });
        assert!(r.select_peers("k1").is_empty());
    }

    #[test]
    fn disappeared_peers_are_not_selected() {
        let mut r = agent();
        r.note_event(RoutingEvent::PeerAppeared { peer: &eid("dtn:a") });
        r.note_event(RoutingEvent::PeerDisappeared { peer: &eid("dtn:a") });
        assert!(r.select_peers("k1").is_empty());
    }

    #[test]
    fn fresh_bundle_goes_everywhere_in_eid_order() {
        let mut r = agent();
        r.note_event(RoutingEvent::PeerAppeared { peer: &eid("dtn:b") });
        r.note_event(RoutingEvent::PeerAppeared { peer: &eid("dtn:a") });
        assert_eq!(r.select_peers("fresh"), vec![eid("dtn:a"), eid("dtn:b")]);
    }

    #[test]
    fn matches_brute_force_set_difference() {
        // received-from A, sent-to B, live {A, B, C} -> C
        let mut r = agent();
        for p in ["dtn:a", "dtn:b", "dtn:c"] {
            r.note_event(RoutingEvent::PeerAppeared { peer: &eid(p) });
        }
        r.note_event(RoutingEvent::BundleReceived { key: "k", from: Some(&eid("dtn:a")) });
        r.note_event(RoutingEvent::BundleSent { key: "k", to: &eid("dtn:b") });

        let live: BTreeSet<String> = ["dtn:a", "dtn:b", "dtn:c"].iter().map(|s| s.to_string()).collect();
        let held: BTreeSet<String> = ["dtn:a", "dtn:b"].iter().map(|s| s.to_string()).collect();
        let expected: Vec<EndpointId> = live.difference(&held).map(|s| eid(s)).collect();
        assert_eq!(r.select_peers("k"), expected);
        assert_eq!(r.select_peers("k"), vec![eid("dtn:c")]);
    }
}
