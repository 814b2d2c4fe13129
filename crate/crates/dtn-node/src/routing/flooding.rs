//! Flood-all routing: every live peer, every time. Exists to prove the
//! routing interface is substitutable; it deliberately skips the
//! sent-to bookkeeping that makes epidemic routing loop-free.

use std::collections::BTreeMap;

use bp7::EndpointId;

use super::{RoutingAgent, RoutingEvent};

#[derive(Debug, Default)]
pub struct FloodingRouting {
    live: BTreeMap<String, EndpointId>,
}

impl RoutingAgent for FloodingRouting {
    fn note_event(&mut self, event: RoutingEvent<'_>) {
        match event {
            RoutingEvent::PeerAppeared { peer } => {
                self.live.insert(peer.to_string(), peer.clone());
            }
            RoutingEvent::PeerDisappeared { peer } => {
                self.live.remove(&peer.to_string());
            }
            RoutingEvent::BundleReceived { .. } | RoutingEvent::BundleSent { .. } => {}
        }
    }

    fn select_peers(&self, _key: &str) -> Vec<EndpointId> {
        self.live.values().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_selects_all_live_peers() {
        let mut r = FloodingRouting::default();
        let a: EndpointId = "dtn:a".parse().unwrap();
        let b: EndpointId = "dtn:b".parse().unwrap();
        r.note_event(RoutingEvent::PeerAppeared { peer: &a });
        r.note_event(RoutingEvent::PeerAppeared { peer: &b });
        r.note_event(RoutingEvent::BundleSent { key: "k", to: &a });
        assert_eq!(r.select_peers("k"), vec![a, b]);
    }
}
