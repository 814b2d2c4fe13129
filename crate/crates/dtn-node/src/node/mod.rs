//! The running node: wires store, CLAs, discovery, routing, pipeline, and
//! agent together and supervises their threads.

mod clock;
mod mailbox;
mod peers;
mod pipeline;

pub use mailbox::{MailboxEntry, Mailboxes, UnregisteredEndpoint};
pub use peers::{PeerInfo, PeerTable};

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use bp7::{Bundle, BundleBuilder, BundleFlags, EndpointId};
use serde::Serialize;
use thiserror::Error;

use crate::agent::AgentServer;
use crate::cla::mtcp::{MtcpListener, MtcpSender};
use crate::cla::ClaError;
use crate::config::{ConfigError, NodeConfig};
use crate::discovery::{Announcer, BeaconListener, DiscoveryError, PeerEvent, DEFAULT_MULTICAST_GROUP};
use crate::journal::{event, Journal, JournalEvent};
use crate::metrics::NodeMetrics;
use crate::pacing::TokenBucket;
use crate::routing::{make_agent, RoutingAgent, RoutingError, RoutingEvent};
use crate::store::{BundleStore, StoreError};

use clock::CreationClock;

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("journal: {0}")]
    Journal(std::io::Error),
    #[error(transparent)]
    Cla(#[from] ClaError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("agent: {0}")]
    Agent(std::io::Error),
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("invalid destination: {0}")]
    BadDestination(#[from] bp7::EidParseError),
    #[error("bundle invalid: {0}")]
    Build(#[from] bp7::ValidationError),
    #[error("payload of {0} bytes exceeds the bundle size guard")]
    TooLarge(usize),
    #[error("node is shutting down")]
    Shutdown,
}

/// Options for locally created bundles.
#[derive(Debug, Clone)]
pub struct SubmitOptions {
    pub lifetime_micros: Option<u64>,
    /// Request a delivery report (the default, matching the builder).
    pub report_delivery: bool,
    /// Additional report-request flags.
    pub extra_flags: BundleFlags,
}

impl Default for SubmitOptions {
    fn default() -> Self {
        SubmitOptions {
            lifetime_micros: None,
            report_delivery: true,
            extra_flags: BundleFlags::empty(),
        }
    }
}

/// A status report another node sent us, surfaced over the agent API.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReceivedReport {
    pub at_unix_micros: u64,
    /// Bundle the report is about.
    pub refers_to: String,
    /// Asserted lifecycle events (`received`, `forwarded`, ...).
    pub kinds: Vec<String>,
    pub reason_code: u64,
    pub reason: String,
    /// Node that generated the report.
    pub report_source: String,
}

pub(crate) enum PipelineMsg {
    Inbound { bundle: Bundle, from: SocketAddr },
    Created { bundle: Bundle },
}

pub(crate) struct NodeState {
    pub cfg: NodeConfig,
    pub node_eid: EndpointId,
    pub node_eid_text: String,
    pub store: Arc<BundleStore>,
    pub journal: Journal,
    pub metrics: Arc<NodeMetrics>,
    pub routing: Mutex<Box<dyn RoutingAgent>>,
    pub peers: PeerTable,
    pub mailboxes: Mailboxes,
    pub clock: CreationClock,
    pub sender: MtcpSender,
    pub pipeline_tx: mpsc::Sender<PipelineMsg>,
    pub forward_tx: mpsc::Sender<String>,
    pub shutdown: Arc<AtomicBool>,
    pub reports: Mutex<Vec<ReceivedReport>>,
    pub mtcp_port: u16,
}

/// A running DTN node. Dropping it shuts everything down cleanly.
pub struct Node {
    state: Arc<NodeState>,
    threads: Vec<JoinHandle<()>>,
    mtcp_listener: Option<MtcpListener>,
    announcer: Option<Announcer>,
    beacon_listener: Option<BeaconListener>,
    agent: Option<AgentServer>,
    agent_addr: SocketAddr,
}

impl Node {
    /// Validate the configuration, bind every socket, and start all
    /// processing threads. On error the diagnostic names the failing module.
    pub fn start(cfg: NodeConfig) -> Result<Node, NodeError> {
        cfg.validate()?;
        let node_eid = cfg.node_eid()?;
        let node_eid_text = node_eid.to_string();

        std::fs::create_dir_all(&cfg.store_path)
            .map_err(|e| StoreError::Io { path: cfg.store_path.clone(), source: e })?;
        let store = Arc::new(BundleStore::open(&cfg.store_path)?);
        let journal = Journal::open(&cfg.journal_file(), &node_eid_text).map_err(NodeError::Journal)?;
        let clock = CreationClock::open(cfg.store_path.join("creation_state"), cfg.clockless()?);
        let metrics = Arc::new(NodeMetrics::new());

        let mut endpoints = vec![node_eid_text.clone()];
        endpoints.extend(cfg.endpoint_eids()?.iter().map(|e| e.to_string()));
        let mailboxes = Mailboxes::new(endpoints);

        let mut routing = make_agent(&cfg.routing, store.clone())?;
        let static_peers = cfg.static_peers()?;
        for (eid, _) in &static_peers {
            routing.note_event(RoutingEvent::PeerAppeared { peer: eid });
        }
        let peers = PeerTable::new(static_peers);

        let pacer = if cfg.link_bandwidth_bits > 0 {
            Some(Arc::new(TokenBucket::new(cfg.link_bandwidth_bits)))
        } else {
            None
        };
        let sender =
            MtcpSender::new(pacer, metrics.clone(), Duration::from_secs(cfg.idle_close_secs));

        let shutdown = Arc::new(AtomicBool::new(false));
        let (pipeline_tx, pipeline_rx) = mpsc::channel::<PipelineMsg>();
        let (forward_tx, forward_rx) = mpsc::channel::<String>();

        // inbound CLA frames feed the pipeline directly
        let inbound_tx = pipeline_tx.clone();
        let sink: Arc<dyn Fn(Bundle, SocketAddr) + Send + Sync> = Arc::new(move |bundle, from| {
            let _ = inbound_tx.send(PipelineMsg::Inbound { bundle, from });
        });
        let mtcp_listener =
            MtcpListener::spawn(cfg.mtcp_addr()?, sink, metrics.clone(), shutdown.clone())?;
        let mtcp_port = mtcp_listener.local_addr.port();

        let state = Arc::new(NodeState {
            node_eid,
            node_eid_text,
            store,
            journal,
            metrics,
            routing: Mutex::new(routing),
            peers,
            mailboxes,
            clock,
            sender,
            pipeline_tx,
            forward_tx,
            shutdown: shutdown.clone(),
            reports: Mutex::new(Vec::new()),
            mtcp_port,
            cfg: cfg.clone(),
        });

        let mut threads = Vec::new();

        // pipeline: consumes newly created and inbound bundles
        {
            let state = state.clone();
            threads.push(spawn_named("pipeline", move || {
                loop {
                    match pipeline_rx.recv_timeout(Duration::from_millis(50)) {
                        Ok(PipelineMsg::Inbound { bundle, from }) => {
                            pipeline::process_inbound(&state, bundle, from);
                        }
                        Ok(PipelineMsg::Created { bundle }) => {
                            pipeline::process_created(&state, bundle);
                        }
                        Err(mpsc::RecvTimeoutError::Timeout) => {
                            if state.shutdown.load(Ordering::Relaxed) {
                                return;
                            }
                        }
                        Err(mpsc::RecvTimeoutError::Disconnected) => return,
                    }
                }
            }));
        }

        // forwarder: transmission attempts, one bundle at a time
        {
            let state = state.clone();
            threads.push(spawn_named("forwarder", move || {
                loop {
                    match forward_rx.recv_timeout(Duration::from_millis(50)) {
                        Ok(key) => pipeline::forward_one(&state, &key),
                        Err(mpsc::RecvTimeoutError::Timeout) => {
                            if state.shutdown.load(Ordering::Relaxed) {
                                return;
                            }
                        }
                        Err(mpsc::RecvTimeoutError::Disconnected) => return,
                    }
                }
            }));
        }

        // retry cycle: re-attempt forward-pending bundles
        {
            let state = state.clone();
            let interval = Duration::from_millis(cfg.retry_interval_ms);
            threads.push(spawn_named("retry", move || loop {
                if sleep_with_shutdown(&state.shutdown, interval) {
                    return;
                }
                for desc in state.store.pending(&[crate::store::Constraint::ForwardPending]) {
                    let _ = state.forward_tx.send(desc.key);
                }
                state.sender.sweep_idle();
            }));
        }

        // gc cycle: expiry deletions (with reports) and tombstone upkeep
        {
            let state = state.clone();
            let interval = Duration::from_millis(cfg.gc_interval_ms);
            threads.push(spawn_named("gc", move || loop {
                if sleep_with_shutdown(&state.shutdown, interval) {
                    return;
                }
                pipeline::gc_cycle(&state);
            }));
        }

        // sampler: 1 Hz counters into the journal
        {
            let state = state.clone();
            threads.push(spawn_named("sampler", move || loop {
                if sleep_with_shutdown(&state.shutdown, Duration::from_secs(1)) {
                    return;
                }
                let mut ev = JournalEvent::new(event::SAMPLE);
                ev.bytes_in = Some(state.metrics.bytes_in());
                ev.bytes_out = Some(state.metrics.bytes_out());
                ev.cpu_ms = Some(crate::metrics::process_cpu_ms());
                state.journal.emit(ev);
            }));
        }

        // discovery
        let mut announcer = None;
        let mut beacon_listener = None;
        if cfg.discovery_enabled {
            let clas = vec![format!("mtcp://{}:{}", cfg.advertised_host(), mtcp_port)];
            announcer = Some(Announcer::spawn(
                state.node_eid.clone(),
                clas,
                Duration::from_millis(cfg.discovery_interval_ms),
                cfg.discovery_target_addrs()?,
                shutdown.clone(),
            )?);

            let (peer_tx, peer_rx) = mpsc::channel::<PeerEvent>();
            let events: Arc<dyn Fn(PeerEvent) + Send + Sync> = Arc::new(move |ev| {
                let _ = peer_tx.send(ev);
            });
            let group = if cfg.discovery_targets.is_empty() {
                Some(DEFAULT_MULTICAST_GROUP)
            } else {
                None
            };
            beacon_listener = Some(BeaconListener::spawn(
                cfg.discovery_port,
                group,
                state.node_eid.clone(),
                Duration::from_millis(cfg.discovery_interval_ms),
                events,
                shutdown.clone(),
            )?);

            let state = state.clone();
            threads.push(spawn_named("peer-events", move || loop {
                match peer_rx.recv_timeout(Duration::from_millis(100)) {
                    Ok(ev) => pipeline::handle_peer_event(&state, ev),
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        if state.shutdown.load(Ordering::Relaxed) {
                            return;
                        }
                    }
                    Err(mpsc::RecvTimeoutError::Disconnected) => return,
                }
            }));
        }

        let (agent, agent_addr) = AgentServer::spawn(state.clone(), cfg.agent_addr()?)?;

        let mut started = JournalEvent::new(event::STARTED);
        started.detail =
            Some(format!("mtcp={} agent={} routing={}", mtcp_port, agent_addr, cfg.routing));
        state.journal.emit(started);
        log::info!(
            "node {} up: mtcp port {mtcp_port}, agent {agent_addr}, store {}",
            state.node_eid_text,
            cfg.store_path.display()
        );

        Ok(Node {
            state,
            threads,
            mtcp_listener: Some(mtcp_listener),
            announcer,
            beacon_listener,
            agent: Some(agent),
            agent_addr,
        })
    }

    pub fn node_id(&self) -> &EndpointId {
        &self.state.node_eid
    }

    pub fn mtcp_port(&self) -> u16 {
        self.state.mtcp_port
    }

    pub fn agent_addr(&self) -> SocketAddr {
        self.agent_addr
    }

    pub fn store(&self) -> &Arc<BundleStore> {
        &self.state.store
    }

    pub fn journal_path(&self) -> PathBuf {
        self.state.cfg.journal_file()
    }

    /// Create and inject a new bundle from this node. Returns its id.
    pub fn submit(
        &self,
        destination: &str,
        payload: Vec<u8>,
        opts: SubmitOptions,
    ) -> Result<String, SubmitError> {
        self.state.submit(destination, payload, opts)
    }

    /// Destructively fetch mailbox entries.
    pub fn fetch(
        &self,
        endpoint: Option<&str>,
    ) -> Result<Vec<MailboxEntry>, UnregisteredEndpoint> {
        self.state.mailboxes.drain(endpoint)
    }

    pub fn register(&self, endpoint: &str) -> bool {
        self.state.mailboxes.register(endpoint)
    }

    /// Status reports other nodes sent us.
    pub fn reports(&self) -> Vec<ReceivedReport> {
        self.state.reports.lock().unwrap().clone()
    }

    pub fn peers(&self) -> Vec<PeerInfo> {
        self.state.peers.snapshot()
    }

    /// Graceful shutdown: stop accepting, finish queued work, close the
    /// store consistently.
    pub fn shutdown(&mut self) {
        if self.state.shutdown.swap(true, Ordering::Relaxed) {
            return;
        }
        self.state.journal.emit(JournalEvent::new(event::SHUTDOWN));
        if let Some(mut listener) = self.mtcp_listener.take() {
            listener.stop();
        }
        if let Some(mut announcer) = self.announcer.take() {
            announcer.stop();
        }
        if let Some(mut listener) = self.beacon_listener.take() {
            listener.stop();
        }
        if let Some(mut agent) = self.agent.take() {
            agent.stop();
        }
        for handle in self.threads.drain(..) {
            let _ = handle.join();
        }
        self.state.sender.close_all();
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl NodeState {
    pub(crate) fn submit(
        &self,
        destination: &str,
        payload: Vec<u8>,
        opts: SubmitOptions,
    ) -> Result<String, SubmitError> {
        if payload.len() > bp7::MAX_BUNDLE_SIZE - 4096 {
            return Err(SubmitError::TooLarge(payload.len()));
        }
        if self.shutdown.load(Ordering::Relaxed) {
            return Err(SubmitError::Shutdown);
        }
        let destination: EndpointId = destination.parse()?;
        let mut flags = opts.extra_flags;
        if opts.report_delivery {
            flags |= BundleFlags::REPORT_DELIVERY;
        }
        let bundle = BundleBuilder::new(destination, self.node_eid.clone())
            .payload(payload)
            .flags(flags)
            .lifetime_micros(opts.lifetime_micros.unwrap_or(self.cfg.default_lifetime_us))
            .hop_limit(Some(self.cfg.hop_limit))
            .creation(self.clock.next_creation())
            .build()?;
        let key = bundle.id().to_string();
        self.pipeline_tx
            .send(PipelineMsg::Created { bundle })
            .map_err(|_| SubmitError::Shutdown)?;
        Ok(key)
    }
}

fn spawn_named(name: &str, f: impl FnOnce() + Send + 'static) -> JoinHandle<()> {
    std::thread::Builder::new().name(name.into()).spawn(f).expect("spawn node thread")
}

/// Sleep `total` in short slices; true when shutdown was requested.
fn sleep_with_shutdown(flag: &AtomicBool, total: Duration) -> bool {
    let deadline = std::time::Instant::now() + total;
    loop {
        if flag.load(Ordering::Relaxed) {
            return true;
        }
        let now = std::time::Instant::now();
        if now >= deadline {
            return false;
        }
        std::thread::sleep((deadline - now).min(Duration::from_millis(25)));
    }
}
