//! Multi-daemon topologies on loopback: spawn `dtnd` processes with static
//! pairwise peering, talk to them over their agent APIs, and read their
//! journals.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};

use crate::config::NodeConfig;
use crate::journal::JournalEvent;
use crate::node::MailboxEntry;

/// Node `i` is peered with every `j` where `(i, j)` or `(j, i)` is an edge.
pub fn chain_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect()
}

pub fn full_mesh_edges(n: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j));
        }
    }
    edges
}

#[derive(Debug, Clone)]
pub struct TopologyOptions {
    /// Path to the `dtnd` binary.
    pub dtnd: PathBuf,
    /// Working directory for per-node state (configs, stores, journals).
    pub work_dir: PathBuf,
    pub bandwidth_limit_bits: Option<u64>,
    /// Hop limit per node index; `None` keeps the default.
    pub hop_limit: Option<u64>,
    pub retry_interval_ms: u64,
    pub gc_interval_ms: u64,
}

impl TopologyOptions {
    pub fn new(dtnd: PathBuf, work_dir: PathBuf) -> TopologyOptions {
        TopologyOptions {
            dtnd,
            work_dir,
            bandwidth_limit_bits: None,
            hop_limit: None,
            retry_interval_ms: 1000,
            gc_interval_ms: 500,
        }
    }
}

pub struct NodeProc {
    pub index: usize,
    pub node_id: String,
    pub agent_port: u16,
    pub mtcp_port: u16,
    pub dir: PathBuf,
    child: Option<Child>,
    config_path: PathBuf,
    dtnd: PathBuf,
    stderr_path: PathBuf,
}

impl NodeProc {
    pub fn agent_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.agent_port)
    }

    pub fn journal_path(&self) -> PathBuf {
        self.dir.join("store").join("journal.jsonl")
    }

    pub fn store_path(&self) -> PathBuf {
        self.dir.join("store")
    }

    pub fn events(&self) -> Vec<JournalEvent> {
        crate::journal::read_events(&self.journal_path()).unwrap_or_default()
    }

    pub fn is_running(&mut self) -> bool {
        match self.child.as_mut() {
            Some(child) => child.try_wait().map(|status| status.is_none()).unwrap_or(false),
            None => false,
        }
    }

    /// SIGKILL the daemon, as a crash would.
    pub fn kill(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }

    /// Ask the daemon to exit cleanly (SIGTERM), waiting up to 5 s.
    pub fn terminate(&mut self) {
        if let Some(mut child) = self.child.take() {
            unsafe {
                libc::kill(child.id() as i32, libc::SIGTERM);
            }
            let deadline = Instant::now() + Duration::from_secs(5);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => return,
                    Ok(None) if Instant::now() < deadline => {
                        std::thread::sleep(Duration::from_millis(20))
                    }
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        return;
                    }
                }
            }
        }
    }

    /// Start (or restart) the daemon process from its config file.
    pub fn spawn_process(&mut self) -> Result<()> {
        let stderr = std::fs::File::create(&self.stderr_path)
            .with_context(|| format!("create {}", self.stderr_path.display()))?;
        let child = Command::new(&self.dtnd)
            .arg("run")
            .arg("--config")
            .arg(&self.config_path)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(stderr)
            .spawn()
            .with_context(|| format!("spawn {}", self.dtnd.display()))?;
        self.child = Some(child);
        Ok(())
    }

    /// Block until the agent answers or the deadline passes.
    pub fn wait_ready(&mut self, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        let url = format!("{}/fetch", self.agent_url());
        loop {
            if ureq::get(&url).timeout(Duration::from_millis(500)).call().is_ok() {
                return Ok(());
            }
            if !self.is_running() {
                let stderr = std::fs::read_to_string(&self.stderr_path).unwrap_or_default();
                bail!(
                    "node {} exited during startup; stderr:\n{}",
                    self.node_id,
                    stderr.trim()
                );
            }
            if Instant::now() >= deadline {
                bail!("node {} agent not ready within {timeout:?}", self.node_id);
            }
            std::thread::sleep(Duration::from_millis(25));
        }
    }

    /// POST /send; returns the bundle id.
    pub fn send(
        &self,
        destination: &str,
        payload: &[u8],
        lifetime_us: Option<u64>,
        report: bool,
        report_flags: &[&str],
    ) -> Result<String> {
        use base64::Engine;
        let mut body = serde_json::json!({
            "destination": destination,
            "payload_b64": base64::engine::general_purpose::STANDARD.encode(payload),
            "report": report,
        });
        if let Some(lifetime) = lifetime_us {
            body["lifetime"] = serde_json::json!(lifetime);
        }
        if !report_flags.is_empty() {
            body["report_flags"] = serde_json::json!(report_flags);
        }
        let response = ureq::post(&format!("{}/send", self.agent_url()))
            .timeout(Duration::from_secs(120))
            .send_json(body)
            .map_err(|e| anyhow::anyhow!("send to {}: {e}", self.node_id))?;
        let value: serde_json::Value = response.into_json()?;
        value["id"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| anyhow::anyhow!("send response missing id: {value}"))
    }

    /// GET /fetch for one endpoint (or everything).
    pub fn fetch(&self, endpoint: Option<&str>) -> Result<Vec<MailboxEntry>> {
        let url = match endpoint {
            Some(e) => format!("{}/fetch?endpoint={e}", self.agent_url()),
            None => format!("{}/fetch", self.agent_url()),
        };
        let response = ureq::get(&url).timeout(Duration::from_secs(30)).call()?;
        Ok(response.into_json()?)
    }

    /// GET /reports.
    pub fn reports(&self) -> Result<serde_json::Value> {
        let response = ureq::get(&format!("{}/reports", self.agent_url()))
            .timeout(Duration::from_secs(10))
            .call()?;
        Ok(response.into_json()?)
    }
}

impl Drop for NodeProc {
    fn drop(&mut self) {
        self.kill();
    }
}

pub struct Topology {
    pub nodes: Vec<NodeProc>,
}

impl Topology {
    /// Write configs and spawn one daemon per node, peered along `edges`.
    /// Node ids are `dtn:n1 .. dtn:nN`.
    pub fn spawn(n: usize, edges: &[(usize, usize)], opts: &TopologyOptions) -> Result<Topology> {
        anyhow::ensure!(n >= 1, "need at least one node");
        std::fs::create_dir_all(&opts.work_dir)?;
        let agent_ports = free_ports(n)?;
        let mtcp_ports = free_ports(n)?;

        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let dir = opts.work_dir.join(format!("n{}", i + 1));
            std::fs::create_dir_all(&dir)?;
            let mut cfg = NodeConfig::default();
            cfg.node_id = format!("dtn:n{}", i + 1);
            cfg.store_path = dir.join("store");
            cfg.mtcp_bind = "127.0.0.1".into();
            cfg.mtcp_port = mtcp_ports[i];
            cfg.agent_bind = "127.0.0.1".into();
            cfg.agent_port = agent_ports[i];
            cfg.discovery_enabled = false;
            cfg.retry_interval_ms = opts.retry_interval_ms;
            cfg.gc_interval_ms = opts.gc_interval_ms;
            cfg.link_bandwidth_bits = opts.bandwidth_limit_bits.unwrap_or(0);
            if let Some(limit) = opts.hop_limit {
                cfg.hop_limit = limit;
            }
            cfg.peers = edges
                .iter()
                .filter_map(|&(a, b)| {
                    let other = if a == i {
                        Some(b)
                    } else if b == i {
                        Some(a)
                    } else {
                        None
                    }?;
                    Some(format!(
                        "dtn:n{}@mtcp://127.0.0.1:{}",
                        other + 1,
                        mtcp_ports[other]
                    ))
                })
                .collect();

            let config_path = dir.join("node.toml");
            std::fs::write(&config_path, cfg.to_toml())?;
            nodes.push(NodeProc {
                index: i,
                node_id: cfg.node_id.clone(),
                agent_port: agent_ports[i],
                mtcp_port: mtcp_ports[i],
                dir,
                child: None,
                config_path,
                dtnd: opts.dtnd.clone(),
                stderr_path: opts.work_dir.join(format!("n{}.stderr", i + 1)),
            });
        }
        for node in &mut nodes {
            node.spawn_process()?;
        }
        Ok(Topology { nodes })
    }

    pub fn wait_all_ready(&mut self, timeout: Duration) -> Result<()> {
        for node in &mut self.nodes {
            node.wait_ready(timeout)?;
        }
        Ok(())
    }

    pub fn shutdown(&mut self) {
        for node in &mut self.nodes {
            node.terminate();
        }
    }
}

/// Find `n` distinct free TCP ports by binding ephemeral listeners.
pub fn free_ports(n: usize) -> Result<Vec<u16>> {
    let mut listeners = Vec::with_capacity(n);
    let mut ports = Vec::with_capacity(n);
    for _ in 0..n {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        ports.push(listener.local_addr()?.port());
        listeners.push(listener);
    }
    drop(listeners);
    Ok(ports)
}

/// Locate the sibling `dtnd` binary next to the current executable.
pub fn sibling_dtnd() -> Result<PathBuf> {
    let exe = std::env::current_exe()?;
    let dir = exe.parent().context("executable has no parent dir")?;
    let candidate = dir.join("dtnd");
    if candidate.exists() {
        return Ok(candidate);
    }
    bail!("cannot find dtnd next to {}; pass --dtnd", exe.display())
}

/// The dtnd binary for tests (set by cargo) or next to the executable.
pub fn dtnd_for_tests() -> PathBuf {
    match std::env::var_os("CARGO_BIN_EXE_dtnd") {
        Some(path) => PathBuf::from(path),
        None => sibling_dtnd().expect("dtnd binary"),
    }
}

pub fn unique_work_dir(tag: &str) -> PathBuf {
    let base = std::env::temp_dir().join("dtn-harness");
    let pid = std::process::id();
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_micros())
        .unwrap_or(0);
    base.join(format!("{tag}-{pid}-{stamp}"))
}

/// True if `path` is on the same filesystem as a tmpfs-backed tempdir; the
/// harness does not care, but callers may want to clean up.
pub fn cleanup_dir(path: &Path) {
    let _ = std::fs::remove_dir_all(path);
}
