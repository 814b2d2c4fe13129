//! Routing: the decision interface the pipeline programs against, plus the
//! epidemic implementation (and a flood-all reference used to demonstrate
//! drop-in substitution).

pub mod epidemic;
pub mod flooding;

use std::collections::BTreeSet;

use bp7::EndpointId;
use thiserror::Error;

pub use epidemic::EpidemicRouting;
pub use flooding::FloodingRouting;

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("routing: unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
}

/// What the pipeline tells the router. Bundle keys are rendered bundle ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoutingEvent<'a> {
    /// A bundle arrived; `from` is the sending node when known.
    BundleReceived { key: &'a str, from: Option<&'a EndpointId> },
    /// A bundle was handed to a CLA successfully.
    BundleSent { key: &'a str, to: &'a EndpointId },
    PeerAppeared { peer: &'a EndpointId },
    PeerDisappeared { peer: &'a EndpointId },
}

/// A forwarding decision maker. The core pipeline is written against this
/// interface alone.
pub trait RoutingAgent: Send {
    fn note_event(&mut self, event: RoutingEvent<'_>);

    /// Peers that should receive the bundle now, ordered by rendered EID.
    /// Empty means "hold in store and retry later".
    fn select_peers(&self, key: &str) -> Vec<EndpointId>;
}

/// Where a router persists which peers already hold a bundle. Backed by the
/// bundle store in the node (single source of truth, survives restarts) and
/// by a plain map in tests.
pub trait SentToStore: Send + Sync {
    /// Record that `peer` holds `key`; returns false when already recorded
    /// or the bundle is unknown.
    fn add_sent_to(&self, key: &str, peer: &str) -> bool;
    fn sent_to(&self, key: &str) -> Option<BTreeSet<String>>;
}

impl SentToStore for crate::store::BundleStore {
    fn add_sent_to(&self, key: &str, peer: &str) -> bool {
        crate::store::BundleStore::add_sent_to(self, key, peer)
    }

    fn sent_to(&self, key: &str) -> Option<BTreeSet<String>> {
        crate::store::BundleStore::sent_to(self, key)
    }
}

/// In-memory sent-to state for tests and simulations.
#[derive(Debug, Default)]
pub struct MemorySentTo {
    map: std::sync::Mutex<std::collections::HashMap<String, BTreeSet<String>>>,
}

impl SentToStore for MemorySentTo {
    fn add_sent_to(&self, key: &str, peer: &str) -> bool {
        self.map.lock().unwrap().entry(key.to_string()).or_default().insert(peer.to_string())
    }

    fn sent_to(&self, key: &str) -> Option<BTreeSet<String>> {
        self.map.lock().unwrap().get(key).cloned()
    }
}

/// Instantiate the configured routing algorithm.
pub fn make_agent(
    name: &str,
    sent_to: std::sync::Arc<dyn SentToStore>,
) -> Result<Box<dyn RoutingAgent>, RoutingError> {
    match name {
        "epidemic" => Ok(Box::new(EpidemicRouting::new(sent_to))),
        "flooding" => Ok(Box::new(FloodingRouting::default())),
        other => Err(RoutingError::UnknownAlgorithm(other.into())),
    }
}
