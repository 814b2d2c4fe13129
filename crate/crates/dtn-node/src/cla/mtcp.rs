//! Minimal TCP convergence layer: unidirectional, one CBOR byte string per
//! bundle on the stream, nothing else.
//!
//! The sender keeps one pooled connection per peer (closed after an idle
//! timeout) and serializes bundles onto it one at a time. The receiver
//! accepts concurrent connections, learns each frame's length from its CBOR
//! head before buffering it, and hands decoded bundles to a sink; a
//! malformed frame closes only the offending connection.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use bp7::{cbor, Bundle, MAX_BUNDLE_SIZE};

use super::ClaError;
use crate::metrics::NodeMetrics;
use crate::pacing::{TokenBucket, CHUNK_BYTES};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(3);
const WRITE_TIMEOUT: Duration = Duration::from_secs(30);
const READ_POLL: Duration = Duration::from_millis(100);
const ACCEPT_POLL: Duration = Duration::from_millis(25);

struct PeerSlot {
    conn: Option<(TcpStream, Instant)>,
}

/// Outbound MTCP with connection reuse and optional send pacing.
pub struct MtcpSender {
    slots: Mutex<HashMap<String, Arc<Mutex<PeerSlot>>>>,
    pacer: Option<Arc<TokenBucket>>,
    metrics: Arc<NodeMetrics>,
    idle_close: Duration,
}

impl MtcpSender {
    pub fn new(
        pacer: Option<Arc<TokenBucket>>,
        metrics: Arc<NodeMetrics>,
        idle_close: Duration,
    ) -> MtcpSender {
        MtcpSender { slots: Mutex::new(HashMap::new()), pacer, metrics, idle_close }
    }

    fn slot(&self, addr: &str) -> Arc<Mutex<PeerSlot>> {
        let mut slots = self.slots.lock().unwrap();
        slots
            .entry(addr.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(PeerSlot { conn: None })))
            .clone()
    }

    /// Send one already-encoded bundle to `addr` (`host:port`). Returns only
    /// after the transport accepted all bytes.
    pub fn send(&self, addr: &str, bundle_bytes: &[u8]) -> Result<(), ClaError> {
        if bundle_bytes.len() > MAX_BUNDLE_SIZE {
            return Err(ClaError::TooLarge(bundle_bytes.len()));
        }
        let slot = self.slot(addr);
        // sends to one peer are serialized; distinct peers proceed in parallel
        let mut slot = slot.lock().unwrap();

        let reusing = match &slot.conn {
            Some((_, last_used)) => last_used.elapsed() <= self.idle_close,
            None => false,
        };
        if !reusing {
            slot.conn = None;
            let stream = connect(addr)?;
            slot.conn = Some((stream, Instant::now()));
        }

        let (stream, _) = slot.conn.as_mut().unwrap();
        match write_frame(stream, bundle_bytes, self.pacer.as_deref(), &self.metrics) {
            Ok(()) => {
                slot.conn.as_mut().unwrap().1 = Instant::now();
                Ok(())
            }
            Err(_) if reusing => {
                // the pooled connection went stale; retry once on a fresh one
                slot.conn = None;
                let mut stream = connect(addr)?;
                match write_frame(&mut stream, bundle_bytes, self.pacer.as_deref(), &self.metrics)
                {
                    Ok(()) => {
                        slot.conn = Some((stream, Instant::now()));
                        Ok(())
                    }
                    Err(source) => Err(ClaError::Dropped { addr: addr.into(), source }),
                }
            }
            Err(source) => {
                slot.conn = None;
                Err(ClaError::Dropped { addr: addr.into(), source })
            }
        }
    }

    /// Close pooled connections idle past the timeout.
    pub fn sweep_idle(&self) {
        let slots = self.slots.lock().unwrap();
        for slot in slots.values() {
            if let Ok(mut slot) = slot.try_lock() {
                if let Some((_, last_used)) = &slot.conn {
                    if last_used.elapsed() > self.idle_close {
                        slot.conn = None;
                    }
                }
            }
        }
    }

    /// Drop every pooled connection.
    pub fn close_all(&self) {
        let slots = self.slots.lock().unwrap();
        for slot in slots.values() {
            if let Ok(mut slot) = slot.lock() {
                slot.conn = None;
            }
        }
    }
}

fn connect(addr: &str) -> Result<TcpStream, ClaError> {
    let unreachable = |source| ClaError::Unreachable { addr: addr.into(), source };
    let sock_addr: SocketAddr = addr
        .parse()
        .or_else(|_| {
            use std::net::ToSocketAddrs;
            addr.to_socket_addrs()
                .map_err(|e| e)
                .and_then(|mut addrs| {
                    addrs.next().ok_or_else(|| std::io::Error::other("no address"))
                })
        })
        .map_err(unreachable)?;
    let stream = TcpStream::connect_timeout(&sock_addr, CONNECT_TIMEOUT).map_err(unreachable)?;
    stream.set_write_timeout(Some(WRITE_TIMEOUT)).map_err(unreachable)?;
    stream.set_nodelay(true).ok();
    Ok(stream)
}

fn write_frame(
    stream: &mut TcpStream,
    bundle_bytes: &[u8],
    pacer: Option<&TokenBucket>,
    metrics: &NodeMetrics,
) -> std::io::Result<()> {
    let mut head = cbor::Writer::new();
    head.bytes_head(bundle_bytes.len() as u64);
    let head = head.into_bytes();
    if let Some(bucket) = pacer {
        bucket.take(head.len());
    }
    stream.write_all(&head)?;
    metrics.add_bytes_out(head.len() as u64);
    for chunk in bundle_bytes.chunks(CHUNK_BYTES) {
        if let Some(bucket) = pacer {
            bucket.take(chunk.len());
        }
        stream.write_all(chunk)?;
        metrics.add_bytes_out(chunk.len() as u64);
    }
    stream.flush()
}

/// Handle to a running MTCP receiver.
pub struct MtcpListener {
    pub local_addr: SocketAddr,
    accept_thread: Option<JoinHandle<()>>,
    conn_threads: Arc<Mutex<Vec<JoinHandle<()>>>>,
    shutdown: Arc<AtomicBool>,
    /// Connections closed due to malformed frames.
    pub decode_errors: Arc<AtomicU64>,
}

impl MtcpListener {
    /// Bind and start accepting. Each decoded bundle is passed to `sink`
    /// together with the sender's transport address.
    pub fn spawn(
        bind: SocketAddr,
        sink: Arc<dyn Fn(Bundle, SocketAddr) + Send + Sync>,
        metrics: Arc<NodeMetrics>,
        shutdown: Arc<AtomicBool>,
    ) -> Result<MtcpListener, ClaError> {
        let listener = TcpListener::bind(bind)
            .map_err(|source| ClaError::Bind { addr: bind.to_string(), source })?;
        let local_addr = listener
            .local_addr()
            .map_err(|source| ClaError::Bind { addr: bind.to_string(), source })?;
        listener
            .set_nonblocking(true)
            .map_err(|source| ClaError::Bind { addr: bind.to_string(), source })?;

        let decode_errors = Arc::new(AtomicU64::new(0));
        let conn_threads: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::new(Mutex::new(Vec::new()));
        let accept_shutdown = shutdown.clone();
        let accept_conns = conn_threads.clone();
        let accept_errors = decode_errors.clone();
        let accept_thread = std::thread::Builder::new()
            .name("mtcp-accept".into())
            .spawn(move || loop {
                if accept_shutdown.load(Ordering::Relaxed) {
                    return;
                }
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let sink = sink.clone();
                        let metrics = metrics.clone();
                        let shutdown = accept_shutdown.clone();
                        let errors = accept_errors.clone();
                        let handle = std::thread::Builder::new()
                            .name(format!("mtcp-conn-{peer}"))
                            .spawn(move || {
                                connection_loop(stream, peer, sink, metrics, shutdown, errors)
                            })
                            .expect("spawn connection thread");
                        accept_conns.lock().unwrap().push(handle);
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(ACCEPT_POLL);
                    }
                    Err(e) => {
                        log::warn!("mtcp: accept failed: {e}");
                        std::thread::sleep(ACCEPT_POLL);
                    }
                }
            })
            .expect("spawn accept thread");

        Ok(MtcpListener {
            local_addr,
            accept_thread: Some(accept_thread),
            conn_threads,
            shutdown,
            decode_errors,
        })
    }

    /// Signal shutdown and join all listener threads.
    pub fn stop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
        let handles: Vec<_> = std::mem::take(&mut *self.conn_threads.lock().unwrap());
        for handle in handles {
            let _ = handle.join();
        }
    }
}

impl Drop for MtcpListener {
    fn drop(&mut self) {
        self.stop();
    }
}

fn connection_loop(
    mut stream: TcpStream,
    peer: SocketAddr,
    sink: Arc<dyn Fn(Bundle, SocketAddr) + Send + Sync>,
    metrics: Arc<NodeMetrics>,
    shutdown: Arc<AtomicBool>,
    errors: Arc<AtomicU64>,
) {
    if stream.set_read_timeout(Some(READ_POLL)).is_err() {
        return;
    }
    let mut buf: Vec<u8> = Vec::new();
    let mut chunk = vec![0u8; CHUNK_BYTES];
    loop {
        // drain complete frames already buffered
        loop {
            match cbor::byte_string_head(&buf) {
                Ok(Some((head_len, content_len))) => {
                    let total = head_len + content_len as usize;
                    if buf.len() < total {
                        break;
                    }
                    match Bundle::decode(&buf[head_len..total]) {
                        Ok(bundle) => {
                            buf.drain(..total);
                            sink(bundle, peer);
                        }
                        Err(e) => {
                            log::warn!("mtcp: bad bundle from {peer}: {e}");
                            errors.fetch_add(1, Ordering::Relaxed);
                            let _ = stream.shutdown(Shutdown::Both);
                            return;
                        }
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    log::warn!("mtcp: bad frame from {peer}: {e}");
                    errors.fetch_add(1, Ordering::Relaxed);
                    let _ = stream.shutdown(Shutdown::Both);
                    return;
                }
            }
        }
        if shutdown.load(Ordering::Relaxed) {
            return;
        }
        match stream.read(&mut chunk) {
            Ok(0) => return, // clean EOF
            Ok(n) => {
                metrics.add_bytes_in(n as u64);
                buf.extend_from_slice(&chunk[..n]);
            }
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut => {}
            Err(_) => return,
        }
    }
}
