//! Node configuration: a flat, commented key/value (TOML) file mirroring the
//! runtime knobs, all overridable from the command line.

use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use bp7::EndpointId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cla::ClaDescriptor;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: bad node_id {value:?}: {reason}")]
    BadNodeId { value: String, reason: String },
    #[error("config: bad endpoint {value:?}: {reason}")]
    BadEndpoint { value: String, reason: String },
    #[error("config: bad peer {value:?}: {reason}")]
    BadPeer { value: String, reason: String },
    #[error("config: bad address {value:?}")]
    BadAddress { value: String },
    #[error("config: unknown routing algorithm {0:?}")]
    UnknownRouting(String),
    #[error("config: {0}")]
    Invalid(String),
}

fn default_node_id() -> String {
    "dtn:node1".into()
}
fn default_store_path() -> PathBuf {
    PathBuf::from("./dtn-store")
}
fn default_mtcp_bind() -> String {
    "0.0.0.0".into()
}
fn default_mtcp_port() -> u16 {
    4556
}
fn default_agent_bind() -> String {
    "127.0.0.1".into()
}
fn default_agent_port() -> u16 {
    8080
}
fn default_true() -> bool {
    true
}
fn default_discovery_port() -> u16 {
    35039
}
fn default_discovery_interval_ms() -> u64 {
    2000
}
fn default_retry_interval_ms() -> u64 {
    5000
}
fn default_gc_interval_ms() -> u64 {
    1000
}
fn default_hop_limit() -> u64 {
    64
}
fn default_lifetime_us() -> u64 {
    3_600_000_000
}
fn default_routing() -> String {
    "epidemic".into()
}
fn default_clock() -> String {
    "system".into()
}
fn default_idle_close_secs() -> u64 {
    30
}

/// Everything a node needs to run. All keys have defaults, so an empty file
/// (or none at all) yields a working single-node daemon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    /// This node's EID, e.g. `dtn:n1`. Must be a dtn-scheme node id.
    #[serde(default = "default_node_id")]
    pub node_id: String,
    /// Directory for the bundle store (created if missing).
    #[serde(default = "default_store_path")]
    pub store_path: PathBuf,
    /// Structured journal file; defaults to `<store_path>/journal.jsonl`.
    #[serde(default)]
    pub journal_path: Option<PathBuf>,
    #[serde(default = "default_mtcp_bind")]
    pub mtcp_bind: String,
    #[serde(default = "default_mtcp_port")]
    pub mtcp_port: u16,
    #[serde(default = "default_agent_bind")]
    pub agent_bind: String,
    #[serde(default = "default_agent_port")]
    pub agent_port: u16,
    #[serde(default = "default_true")]
    pub discovery_enabled: bool,
    #[serde(default = "default_discovery_port")]
    pub discovery_port: u16,
    #[serde(default = "default_discovery_interval_ms")]
    pub discovery_interval_ms: u64,
    /// Beacon destinations. Empty means the default multicast group and the
    /// limited broadcast address on `discovery_port`.
    #[serde(default)]
    pub discovery_targets: Vec<String>,
    /// Statically pinned peers as `EID@mtcp://host:port`; these bypass
    /// discovery and never expire.
    #[serde(default)]
    pub peers: Vec<String>,
    /// Application endpoints registered at startup (the node id is always
    /// registered implicitly).
    #[serde(default)]
    pub endpoints: Vec<String>,
    #[serde(default = "default_retry_interval_ms")]
    pub retry_interval_ms: u64,
    #[serde(default = "default_gc_interval_ms")]
    pub gc_interval_ms: u64,
    /// Hop limit placed on locally created bundles.
    #[serde(default = "default_hop_limit")]
    pub hop_limit: u64,
    /// Lifetime for locally created bundles, microseconds.
    #[serde(default = "default_lifetime_us")]
    pub default_lifetime_us: u64,
    /// Send-side pacing in bits per second; 0 disables pacing.
    #[serde(default)]
    pub link_bandwidth_bits: u64,
    /// Routing algorithm: `epidemic` or `flooding`.
    #[serde(default = "default_routing")]
    pub routing: String,
    /// `system` for wall-clock creation timestamps, `none` to emulate a node
    /// without a real-time clock (creation time 0 plus bundle-age blocks).
    #[serde(default = "default_clock")]
    pub clock: String,
    /// Idle seconds after which a pooled MTCP connection is closed.
    #[serde(default = "default_idle_close_secs")]
    pub idle_close_secs: u64,
    /// Host to advertise in discovery beacons. Defaults to the MTCP bind
    /// host, or 127.0.0.1 when bound to the wildcard address.
    #[serde(default)]
    pub advertise_host: Option<String>,
}

impl Default for NodeConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config must deserialize")
    }
}

impl NodeConfig {
    pub fn from_file(path: &Path) -> Result<NodeConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn node_eid(&self) -> Result<EndpointId, ConfigError> {
        let eid: EndpointId = self.node_id.parse().map_err(|e| ConfigError::BadNodeId {
            value: self.node_id.clone(),
            reason: format!("{e}"),
        })?;
        if !eid.is_node_id() {
            return Err(ConfigError::BadNodeId {
                value: self.node_id.clone(),
                reason: "must be a dtn-scheme node id without a service path".into(),
            });
        }
        Ok(eid)
    }

    pub fn endpoint_eids(&self) -> Result<Vec<EndpointId>, ConfigError> {
        self.endpoints
            .iter()
            .map(|text| {
                text.parse().map_err(|e| ConfigError::BadEndpoint {
                    value: text.clone(),
                    reason: format!("{e}"),
                })
            })
            .collect()
    }

    /// Parse the static peer list into `(node EID, CLA)` pairs.
    pub fn static_peers(&self) -> Result<Vec<(EndpointId, ClaDescriptor)>, ConfigError> {
        self.peers
            .iter()
            .map(|entry| {
                let (eid_text, cla_text) =
                    entry.split_once('@').ok_or_else(|| ConfigError::BadPeer {
                        value: entry.clone(),
                        reason: "expected EID@mtcp://host:port".into(),
                    })?;
                let eid: EndpointId = eid_text.parse().map_err(|e| ConfigError::BadPeer {
                    value: entry.clone(),
                    reason: format!("{e}"),
                })?;
                let cla: ClaDescriptor = cla_text.parse().map_err(|e| ConfigError::BadPeer {
                    value: entry.clone(),
                    reason: format!("{e}"),
                })?;
                Ok((eid, cla))
            })
            .collect()
    }

    pub fn mtcp_addr(&self) -> Result<SocketAddr, ConfigError> {
        resolve(&self.mtcp_bind, self.mtcp_port)
    }

    pub fn agent_addr(&self) -> Result<SocketAddr, ConfigError> {
        resolve(&self.agent_bind, self.agent_port)
    }

    /// Beacon destination addresses: the configured overrides, or the
    /// default multicast group plus limited broadcast.
    pub fn discovery_target_addrs(&self) -> Result<Vec<SocketAddr>, ConfigError> {
        if self.discovery_targets.is_empty() {
            return Ok(vec![
                SocketAddr::from(([224, 23, 23, 23], self.discovery_port)),
                SocketAddr::from(([255, 255, 255, 255], self.discovery_port)),
            ]);
        }
        self.discovery_targets
            .iter()
            .map(|t| {
                t.to_socket_addrs()
                    .ok()
                    .and_then(|mut addrs| addrs.next())
                    .ok_or_else(|| ConfigError::BadAddress { value: t.clone() })
            })
            .collect()
    }

    pub fn journal_file(&self) -> PathBuf {
        self.journal_path.clone().unwrap_or_else(|| self.store_path.join("journal.jsonl"))
    }

    /// Host other nodes should dial to reach this node's MTCP listener.
    pub fn advertised_host(&self) -> String {
        if let Some(host) = &self.advertise_host {
            return host.clone();
        }
        if self.mtcp_bind == "0.0.0.0" || self.mtcp_bind == "::" {
            "127.0.0.1".into()
        } else {
            self.mtcp_bind.clone()
        }
    }

    pub fn clockless(&self) -> Result<bool, ConfigError> {
        match self.clock.as_str() {
            "system" => Ok(false),
            "none" => Ok(true),
            other => Err(ConfigError::Invalid(format!("unknown clock source {other:?}"))),
        }
    }

    /// Validate every field that later startup steps rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.node_eid()?;
        self.endpoint_eids()?;
        self.static_peers()?;
        self.mtcp_addr()?;
        self.agent_addr()?;
        self.discovery_target_addrs()?;
        self.clockless()?;
        if self.discovery_interval_ms == 0 {
            return Err(ConfigError::Invalid("discovery_interval_ms must be > 0".into()));
        }
        if self.retry_interval_ms == 0 || self.gc_interval_ms == 0 {
            return Err(ConfigError::Invalid("retry and gc intervals must be > 0".into()));
        }
        if !matches!(self.routing.as_str(), "epidemic" | "flooding") {
            return Err(ConfigError::UnknownRouting(self.routing.clone()));
        }
        Ok(())
    }
}

fn resolve(host: &str, port: u16) -> Result<SocketAddr, ConfigError> {
    (host, port)
        .to_socket_addrs()
        .ok()
        .and_then(|mut addrs| addrs.next())
        .ok_or_else(|| ConfigError::BadAddress { value: format!("{host}:{port}") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_complete() {
        let cfg = NodeConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.mtcp_port, 4556);
        assert_eq!(cfg.agent_port, 8080);
        assert_eq!(cfg.hop_limit, 64);
        assert!(cfg.discovery_enabled);
    }

    #[test]
    fn flat_keys_roundtrip() {
        let mut cfg = NodeConfig::default();
        cfg.node_id = "dtn:n7".into();
        cfg.peers = vec!["dtn:n8@mtcp://127.0.0.1:4557".into()];
        cfg.endpoints = vec!["dtn:n7/inbox".into()];
        let text = cfg.to_toml();
        let back: NodeConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.node_id, "dtn:n7");
        let peers = back.static_peers().unwrap();
        assert_eq!(peers[0].0, "dtn:n8".parse().unwrap());
        assert_eq!(peers[0].1.to_string(), "mtcp://127.0.0.1:4557");
    }

    #[test]
    fn node_id_must_be_a_node() {
        let mut cfg = NodeConfig::default();
        cfg.node_id = "dtn:sink/lux".into();
        assert!(matches!(cfg.node_eid(), Err(ConfigError::BadNodeId { .. })));
        cfg.node_id = "not an eid".into();
        assert!(cfg.node_eid().is_err());
    }

    #[test]
    fn bad_peer_syntax_is_rejected() {
        let mut cfg = NodeConfig::default();
        cfg.peers = vec!["dtn:n2".into()];
        assert!(matches!(cfg.static_peers(), Err(ConfigError::BadPeer { .. })));
        cfg.peers = vec!["dtn:n2@tcp://1.2.3.4:1".into()];
        assert!(cfg.static_peers().is_err());
    }
}
