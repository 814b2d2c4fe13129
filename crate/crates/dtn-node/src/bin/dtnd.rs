//! DTN daemon: stores and exchanges bundles and serves the application
//! agent. `dtnd run` (the default) starts a node from a config file plus
//! command-line overrides; `dtnd fsck` checks a store directory.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use dtn_node::config::NodeConfig;
use dtn_node::store::BundleStore;
use dtn_node::Node;

#[derive(Parser)]
#[command(name = "dtnd", about = "disruption-tolerant networking daemon", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Run the node (the default when no subcommand is given).
    Run(RunArgs),
    /// Check a store directory: every indexed bundle must decode to its id;
    /// orphan files are reaped. Exits nonzero when corruption is found.
    Fsck {
        /// Store directory to check.
        store: PathBuf,
    },
    /// Print the effective configuration and exit.
    Config(RunArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Config file (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Node EID, e.g. dtn:n1.
    #[arg(long)]
    node_id: Option<String>,
    /// Store directory.
    #[arg(long)]
    store: Option<PathBuf>,
    /// MTCP listen port.
    #[arg(long)]
    mtcp_port: Option<u16>,
    /// Agent (HTTP) port.
    #[arg(long)]
    agent_port: Option<u16>,
    /// Static peer as EID@mtcp://host:port; repeatable.
    #[arg(long = "peer")]
    peers: Vec<String>,
    /// Extra registered endpoint; repeatable.
    #[arg(long = "endpoint")]
    endpoints: Vec<String>,
    /// Disable peer discovery.
    #[arg(long)]
    no_discovery: bool,
    /// Send pacing in bits per second (0 = unpaced).
    #[arg(long)]
    bandwidth: Option<u64>,
    /// Hop limit for locally created bundles.
    #[arg(long)]
    hop_limit: Option<u64>,
    /// Retry interval in milliseconds.
    #[arg(long)]
    retry_interval_ms: Option<u64>,
}

impl RunArgs {
    fn effective_config(&self) -> Result<NodeConfig> {
        let mut cfg = match &self.config {
            Some(path) => NodeConfig::from_file(path)?,
            None => NodeConfig::default(),
        };
        if let Some(v) = &self.node_id {
            cfg.node_id = v.clone();
        }
        if let Some(v) = &self.store {
            cfg.store_path = v.clone();
        }
        if let Some(v) = self.mtcp_port {
            cfg.mtcp_port = v;
        }
        if let Some(v) = self.agent_port {
            cfg.agent_port = v;
        }
        if !self.peers.is_empty() {
            cfg.peers.extend(self.peers.iter().cloned());
        }
        if !self.endpoints.is_empty() {
            cfg.endpoints.extend(self.endpoints.iter().cloned());
        }
        if self.no_discovery {
            cfg.discovery_enabled = false;
        }
        if let Some(v) = self.bandwidth {
            cfg.link_bandwidth_bits = v;
        }
        if let Some(v) = self.hop_limit {
            cfg.hop_limit = v;
        }
        if let Some(v) = self.retry_interval_ms {
            cfg.retry_interval_ms = v;
        }
        Ok(cfg)
    }
}

static TERMINATE: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_sig: libc::c_int) {
    TERMINATE.store(true, Ordering::SeqCst);
}

fn install_signal_handlers() {
    unsafe {
        libc::signal(libc::SIGTERM, on_signal as usize);
        libc::signal(libc::SIGINT, on_signal as usize);
    }
}

fn run(args: &RunArgs) -> Result<i32> {
    let cfg = args.effective_config()?;
    let mut node = Node::start(cfg)?;
    install_signal_handlers();
    eprintln!(
        "dtnd: {} listening (mtcp :{}, agent {})",
        node.node_id(),
        node.mtcp_port(),
        node.agent_addr()
    );
    while !TERMINATE.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    eprintln!("dtnd: shutting down");
    node.shutdown();
    Ok(0)
}

fn fsck(store_dir: &PathBuf) -> Result<i32> {
    let store = BundleStore::open(store_dir)?;
    let report = store.fsck()?;
    println!(
        "fsck {}: {} bundles checked, {} orphans reaped, {} corrupt",
        store_dir.display(),
        report.checked,
        report.orphans_reaped,
        report.corrupt.len()
    );
    for key in &report.corrupt {
        println!("corrupt: {key}");
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Run(args)) => run(args),
        Some(Command::Fsck { store }) => fsck(store),
        Some(Command::Config(args)) => args.effective_config().map(|cfg| {
            print!("{}", cfg.to_toml());
            0
        }),
        None => run(&cli.run),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("dtnd: {e}");
            std::process::exit(1);
        }
    }
}
