//! UDP beacon peer discovery.
//!
//! The announcer broadcasts this node's CLAs every interval; the listener
//! reports foreign beacons as peer-appeared events and expires peers unheard
//! for three intervals. Beacons are a CBOR array
//! `[node-EID, [cla-strings], sequence]`.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use bp7::cbor::{ArrayLen, Reader, Writer};
use bp7::EndpointId;
use thiserror::Error;

pub const DEFAULT_MULTICAST_GROUP: Ipv4Addr = Ipv4Addr::new(224, 23, 23, 23);

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("discovery: socket setup failed: {0}")]
    Socket(#[from] std::io::Error),
    #[error("discovery: beacon must announce at least one CLA")]
    NoClas,
    #[error("discovery: malformed beacon: {0}")]
    Malformed(String),
}

/// One announcement of a node and the CLAs it listens on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Beacon {
    pub node_id: EndpointId,
    pub clas: Vec<String>,
    pub sequence: u64,
}

impl Beacon {
    pub fn new(node_id: EndpointId, clas: Vec<String>, sequence: u64) -> Result<Beacon, DiscoveryError> {
        if clas.is_empty() {
            return Err(DiscoveryError::NoClas);
        }
        Ok(Beacon { node_id, clas, sequence })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.array(3);
        self.node_id.encode(&mut w);
        w.array(self.clas.len() as u64);
        for cla in &self.clas {
            w.text(cla);
        }
        w.uint(self.sequence);
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Beacon, DiscoveryError> {
        let malformed = |what: &dyn std::fmt::Display| DiscoveryError::Malformed(what.to_string());
        let mut r = Reader::new(bytes);
        match r.array().map_err(|e| malformed(&e))? {
            ArrayLen::Definite(3) => {}
            other => return Err(DiscoveryError::Malformed(format!("outer array {other:?}"))),
        }
        let node_id = EndpointId::decode(&mut r).map_err(|e| malformed(&e))?;
        let n = match r.array().map_err(|e| malformed(&e))? {
            ArrayLen::Definite(n) if n <= 64 => n,
            other => return Err(DiscoveryError::Malformed(format!("cla list {other:?}"))),
        };
        let mut clas = Vec::with_capacity(n as usize);
        for _ in 0..n {
            clas.push(r.text().map_err(|e| malformed(&e))?.to_string());
        }
        let sequence = r.uint().map_err(|e| malformed(&e))?;
        if !r.is_at_end() {
            return Err(DiscoveryError::Malformed("trailing bytes".into()));
        }
        Beacon::new(node_id, clas, sequence)
    }
}

/// Peer lifecycle notifications from the beacon listener.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PeerEvent {
    /// A beacon arrived (first time or refresh); carries the announced CLAs.
    Appeared { node_id: EndpointId, clas: Vec<String> },
    /// No beacon for three intervals.
    Disappeared { node_id: EndpointId },
}

/// Periodic beacon transmitter.
pub struct Announcer {
    thread: Option<JoinHandle<()>>,
    shutdown: Arc<AtomicBool>,
    pub beacons_sent: Arc<AtomicU64>,
}

impl Announcer {
    pub fn spawn(
        node_id: EndpointId,
        clas: Vec<String>,
        interval: Duration,
        targets: Vec<SocketAddr>,
        shutdown: Arc<AtomicBool>,
    ) -> Result<Announcer, DiscoveryError> {
        if clas.is_empty() {
            return Err(DiscoveryError::NoClas);
        }
        // bind failure here is fatal; send errors later are transient
        let socket = UdpSocket::bind((Ipv4Addr::UNSPECIFIED, 0))?;
        socket.set_broadcast(true)?;
        socket.set_multicast_ttl_v4(1).ok();

        let beacons_sent = Arc::new(AtomicU64::new(0));
        let counter = beacons_sent.clone();
        let flag = shutdown.clone();
        let thread = std::thread::Builder::new()
            .name("discovery-announce".into())
            .spawn(move || {
                let mut sequence: u64 = 0;
                loop {
                    if flag.load(Ordering::Relaxed) {
                        return;
                    }
                    let beacon = Beacon { node_id: node_id.clone(), clas: clas.clone(), sequence };
                    let bytes = beacon.encode();
                    for target in &targets {
                        if let Err(e) = socket.send_to(&bytes, target) {
                            log::debug!("discovery: beacon to {target} failed: {e}");
                        }
                    }
                    counter.fetch_add(1, Ordering::Relaxed);
                    sequence = sequence.wrapping_add(1);
                    // sleep in short slices so shutdown stays prompt
                    let deadline = Instant::now() + interval;
                    while Instant::now() < deadline {
                        if flag.load(Ordering::Relaxed) {
                            return;
                        }
                        std::thread::sleep(Duration::from_millis(20).min(interval));
                    }
                }
            })
            .expect("spawn announcer");
        Ok(Announcer { thread: Some(thread), shutdown, beacons_sent })
    }

    pub fn stop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Announcer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Beacon receiver reporting peer events.
pub struct BeaconListener {
    thread: Option<JoinHandle<()>>,
    shutdown: Arc<AtomicBool>,
    pub malformed: Arc<AtomicU64>,
}

impl BeaconListener {
    pub fn spawn(
        port: u16,
        multicast_group: Option<Ipv4Addr>,
        self_id: EndpointId,
        interval: Duration,
        events: Arc<dyn Fn(PeerEvent) + Send + Sync>,
        shutdown: Arc<AtomicBool>,
    ) -> Result<BeaconListener, DiscoveryError> {
        use socket2::{Domain, Protocol, Socket, Type};
        let socket = Socket::new(Domain::IPV4, Type::DGRAM, Some(Protocol::UDP))?;
        socket.set_reuse_address(true)?;
        #[cfg(unix)]
        socket.set_reuse_port(true)?;
        socket.bind(&SocketAddr::from((Ipv4Addr::UNSPECIFIED, port)).into())?;
        let socket: UdpSocket = socket.into();
        if let Some(group) = multicast_group {
            if let Err(e) = socket.join_multicast_v4(&group, &Ipv4Addr::UNSPECIFIED) {
                log::warn!("discovery: multicast join failed ({e}); broadcast/unicast only");
            }
        }
        socket.set_read_timeout(Some(Duration::from_millis(100)))?;

        let malformed = Arc::new(AtomicU64::new(0));
        let counter = malformed.clone();
        let flag = shutdown.clone();
        let expiry = interval * 3;
        let thread = std::thread::Builder::new()
            .name("discovery-listen".into())
            .spawn(move || {
                let mut last_seen: HashMap<String, (EndpointId, Instant)> = HashMap::new();
                let mut buf = [0u8; 2048];
                loop {
                    if flag.load(Ordering::Relaxed) {
                        return;
                    }
                    match socket.recv_from(&mut buf) {
                        Ok((n, _from)) => match Beacon::decode(&buf[..n]) {
                            Ok(beacon) if beacon.node_id == self_id => {} // self-suppression
                            Ok(beacon) => {
                                last_seen.insert(
                                    beacon.node_id.to_string(),
                                    (beacon.node_id.clone(), Instant::now()),
                                );
                                events(PeerEvent::Appeared {
                                    node_id: beacon.node_id,
                                    clas: beacon.clas,
                                });
                            }
                            Err(e) => {
                                log::debug!("discovery: dropped malformed beacon: {e}");
                                counter.fetch_add(1, Ordering::Relaxed);
                            }
                        },
                        Err(e)
                            if e.kind() == std::io::ErrorKind::WouldBlock
                                || e.kind() == std::io::ErrorKind::TimedOut => {}
                        Err(e) => {
                            log::warn!("discovery: recv failed: {e}");
                            std::thread::sleep(Duration::from_millis(100));
                        }
                    }
                    // expire peers unheard for three intervals
                    let now = Instant::now();
                    let expired: Vec<String> = last_seen
                        .iter()
                        .filter(|(_, (_, seen))| now.duration_since(*seen) > expiry)
                        .map(|(k, _)| k.clone())
                        .collect();
                    for key in expired {
                        if let Some((node_id, _)) = last_seen.remove(&key) {
                            events(PeerEvent::Disappeared { node_id });
                        }
                    }
                }
            })
            .expect("spawn beacon listener");
        Ok(BeaconListener { thread: Some(thread), shutdown, malformed })
    }

    pub fn stop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for BeaconListener {
    fn drop(&mut self) {
        self.stop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beacon_roundtrip() {
        let beacon = Beacon::new(
            "dtn:n1".parse().unwrap(),
            vec!["mtcp://10.0.0.1:4556".into(), "mtcp://192.168.0.1:4556".into()],
            42,
        )
        .unwrap();
        assert_eq!(Beacon::decode(&beacon.encode()).unwrap(), beacon);
    }

    #[test]
    fn empty_cla_list_rejected_at_construction() {
        assert!(matches!(
            Beacon::new("dtn:n1".parse().unwrap(), vec![], 0),
            Err(DiscoveryError::NoClas)
        ));
    }

    #[test]
    fn malformed_beacons_are_errors() {
        assert!(Beacon::decode(b"garbage").is_err());
        assert!(Beacon::decode(&[]).is_err());
        // valid EID but wrong shape
        let mut w = Writer::new();
        w.array(1);
        "dtn:n1".parse::<EndpointId>().unwrap().encode(&mut w);
        assert!(Beacon::decode(&w.into_bytes()).is_err());
    }
}
