//! Chain experiment driver: first node sends, last node receives, latency
//! and per-hop times come from the journals.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};

use crate::journal::event;

use super::topo::{chain_edges, Topology, TopologyOptions};
use super::{seeded_payload, ExperimentSpec};

#[derive(Debug, Clone)]
pub struct RunnerOptions {
    pub dtnd: PathBuf,
    pub work_dir: PathBuf,
    /// Remove per-node state after the run.
    pub keep_dirs: bool,
}

/// One repetition's outcome.
#[derive(Debug, Clone)]
pub struct RepetitionRow {
    pub repetition: u32,
    pub delivered: bool,
    pub latency_ms: f64,
    pub hop_count_at_sink: Option<u64>,
    /// Received-event timestamps along the chain (unix micros), source
    /// creation first.
    pub per_hop_us: Vec<u64>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub rows: Vec<RepetitionRow>,
    /// `(node_id, ts_us, bytes_in, bytes_out, cpu_ms)` samples.
    pub samples: Vec<(String, u64, u64, u64, u64)>,
}

impl ExperimentOutcome {
    pub fn delivered_count(&self) -> usize {
        self.rows.iter().filter(|r| r.delivered).count()
    }

    pub fn median_latency_ms(&self) -> Option<f64> {
        let mut latencies: Vec<f64> =
            self.rows.iter().filter(|r| r.delivered).map(|r| r.latency_ms).collect();
        if latencies.is_empty() {
            return None;
        }
        latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(latencies[latencies.len() / 2])
    }

    pub fn mean_latency_ms(&self) -> Option<f64> {
        let delivered: Vec<f64> =
            self.rows.iter().filter(|r| r.delivered).map(|r| r.latency_ms).collect();
        if delivered.is_empty() {
            return None;
        }
        Some(delivered.iter().sum::<f64>() / delivered.len() as f64)
    }

    pub fn stddev_latency_ms(&self) -> Option<f64> {
        let mean = self.mean_latency_ms()?;
        let delivered: Vec<f64> =
            self.rows.iter().filter(|r| r.delivered).map(|r| r.latency_ms).collect();
        let var = delivered.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / delivered.len() as f64;
        Some(var.sqrt())
    }
}

/// How long to wait for one repetition before calling it failed.
pub fn delivery_timeout(spec: &ExperimentSpec) -> Duration {
    let hops = spec.chain_length.max(2) as u64 - 1;
    let paced_secs = match spec.bandwidth_limit_bits {
        Some(rate) if rate > 0 => (spec.payload_bytes * 8 * hops) as f64 / rate as f64,
        _ => 0.0,
    };
    Duration::from_secs_f64(30.0 + paced_secs * 3.0)
}

/// Run a chain experiment end to end: spawn, repeat send+deliver, tear down.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunnerOptions) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let n = spec.chain_length as usize;
    let mut topo_opts = TopologyOptions::new(opts.dtnd.clone(), opts.work_dir.clone());
    topo_opts.bandwidth_limit_bits = spec.bandwidth_limit_bits;
    topo_opts.hop_limit = spec.hop_limit;
    let mut topo = Topology::spawn(n, &chain_edges(n), &topo_opts)
        .context("spawning chain topology")?;
    topo.wait_all_ready(Duration::from_secs(15)).context("waiting for daemons")?;

    let payload = seeded_payload(spec.seed, spec.payload_bytes as usize);
    let sink_id = topo.nodes[n - 1].node_id.clone();
    let timeout = delivery_timeout(spec);

    let mut rows = Vec::with_capacity(spec.repetitions as usize);
    for repetition in 0..spec.repetitions {
        let row = run_repetition(&topo, repetition, &payload, &sink_id, spec, timeout)?;
        if !row.delivered {
            log::warn!("{}: repetition {repetition} timed out", spec.label());
        }
        rows.push(row);
    }

    // collect 1 Hz samples before teardown
    let mut samples = Vec::new();
    for node in &topo.nodes {
        for ev in node.events() {
            if ev.event == event::SAMPLE {
                samples.push((
                    ev.node.clone().unwrap_or_default(),
                    ev.ts_us,
                    ev.bytes_in.unwrap_or(0),
                    ev.bytes_out.unwrap_or(0),
                    ev.cpu_ms.unwrap_or(0),
                ));
            }
        }
    }

    topo.shutdown();
    if !opts.keep_dirs {
        super::topo::cleanup_dir(&opts.work_dir);
    }
    Ok(ExperimentOutcome { spec: spec.clone(), rows, samples })
}

fn run_repetition(
    topo: &Topology,
    repetition: u32,
    payload: &[u8],
    sink_id: &str,
    spec: &ExperimentSpec,
    timeout: Duration,
) -> Result<RepetitionRow> {
    let source = &topo.nodes[0];
    let sink = topo.nodes.last().unwrap();
    let key = source.send(sink_id, payload, spec.lifetime_us, false, &[])?;

    // poll the sink's mailbox for the bundle
    let deadline = Instant::now() + timeout;
    let mut delivered = false;
    while Instant::now() < deadline {
        let entries = sink.fetch(Some(sink_id)).unwrap_or_default();
        let mut matched = false;
        for entry in entries {
            if entry.id == key {
                anyhow::ensure!(
                    entry.payload().as_deref() == Some(payload),
                    "payload mismatch at sink for {key}"
                );
                matched = true;
            }
        }
        if matched {
            delivered = true;
            break;
        }
        std::thread::sleep(Duration::from_millis(10));
    }

    // reconstruct the timeline from journals
    let mut per_hop_us = Vec::new();
    let mut hop_count_at_sink = None;
    let mut created_us = None;
    let mut delivered_us = None;
    for (i, node) in topo.nodes.iter().enumerate() {
        for ev in node.events() {
            if ev.bundle.as_deref() != Some(key.as_str()) {
                continue;
            }
            match ev.event.as_str() {
                event::CREATED if i == 0 => created_us = Some(ev.ts_us),
                event::RECEIVED => {
                    per_hop_us.push(ev.ts_us);
                    if i == topo.nodes.len() - 1 {
                        hop_count_at_sink = ev.hop_count;
                    }
                }
                event::DELIVERED if i == topo.nodes.len() - 1 => {
                    delivered_us = Some(ev.ts_us)
                }
                _ => {}
            }
        }
    }
    let latency_ms = match (created_us, delivered_us) {
        (Some(a), Some(b)) if b >= a => (b - a) as f64 / 1000.0,
        _ => f64::NAN,
    };
    Ok(RepetitionRow {
        repetition,
        delivered: delivered && delivered_us.is_some(),
        latency_ms,
        hop_count_at_sink,
        per_hop_us,
    })
}

/// Append experiment rows to `results.csv` (with header when new).
pub fn write_results_csv(path: &std::path::Path, outcome: &ExperimentOutcome) -> Result<()> {
    let new = !path.exists();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if new {
        writeln!(
            f,
            "label,chain_length,payload_bytes,bandwidth_bits,seed,repetition,delivered,latency_ms,hop_count_at_sink,per_hop_us"
        )?;
    }
    for row in &outcome.rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{:.3},{},{}",
            outcome.spec.label(),
            outcome.spec.chain_length,
            outcome.spec.payload_bytes,
            outcome.spec.bandwidth_limit_bits.unwrap_or(0),
            outcome.spec.seed,
            row.repetition,
            row.delivered,
            row.latency_ms,
            row.hop_count_at_sink.map(|h| h.to_string()).unwrap_or_default(),
            row.per_hop_us.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";"),
        )?;
    }
    Ok(())
}

/// Append counter samples to `samples.csv` (with header when new).
pub fn write_samples_csv(path: &std::path::Path, outcome: &ExperimentOutcome) -> Result<()> {
    let new = !path.exists();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if new {
        writeln!(f, "label,node,ts_us,bytes_in,bytes_out,cpu_ms")?;
    }
    for (node, ts_us, bytes_in, bytes_out, cpu_ms) in &outcome.samples {
        writeln!(
            f,
            "{},{node},{ts_us},{bytes_in},{bytes_out},{cpu_ms}",
            outcome.spec.label()
        )?;
    }
    Ok(())
}
