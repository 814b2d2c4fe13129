//! Evaluation harness: launches daemon processes on loopback in configurable
//! topologies (chains by default), injects seeded payloads through the agent
//! API, and extracts end-to-end latency and per-hop timing from the nodes'
//! journals.
//!
//! Results land in two CSV files:
//!
//! `results.csv`: `label,chain_length,payload_bytes,bandwidth_bits,seed,`
//! `repetition,delivered,latency_ms,hop_count_at_sink,per_hop_us` — one row
//! per repetition, `per_hop_us` a `;`-joined list of received timestamps
//! along the chain.
//!
//! `samples.csv`: `node,ts_us,bytes_in,bytes_out,cpu_ms` — the 1 Hz
//! in-process counters from every node.

pub mod plot;
mod runner;
mod topo;

pub use runner::{
    delivery_timeout, run_experiment, write_results_csv, write_samples_csv, ExperimentOutcome,
    RepetitionRow, RunnerOptions,
};
pub use topo::{
    chain_edges, cleanup_dir, dtnd_for_tests, free_ports, full_mesh_edges, sibling_dtnd,
    unique_work_dir, NodeProc, Topology, TopologyOptions,
};

use serde::{Deserialize, Serialize};

/// One experiment: a chain of daemons, a payload size, and repetitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Number of nodes in the chain (>= 2); hops = chain_length - 1.
    pub chain_length: u32,
    pub payload_bytes: u64,
    pub repetitions: u32,
    /// Per-link send pacing in bits/s; `None` runs unpaced.
    #[serde(default)]
    pub bandwidth_limit_bits: Option<u64>,
    /// Seed for payload generation; the payload is identical across
    /// repetitions.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Hop limit configured on the originating node.
    #[serde(default)]
    pub hop_limit: Option<u64>,
    /// Lifetime of injected bundles, microseconds.
    #[serde(default)]
    pub lifetime_us: Option<u64>,
    #[serde(default)]
    pub label: Option<String>,
}

fn default_seed() -> u64 {
    7
}

impl ExperimentSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            format!("chain{}x{}", self.chain_length, human_bytes(self.payload_bytes))
        })
    }

    pub fn from_file(path: &std::path::Path) -> anyhow::Result<ExperimentSpec> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.chain_length >= 2, "chain_length must be >= 2");
        anyhow::ensure!(self.repetitions >= 1, "repetitions must be >= 1");
        Ok(())
    }
}

/// Deterministic pseudo-random payload from a seed.
pub fn seeded_payload(seed: u64, len: usize) -> Vec<u8> {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut payload = vec![0u8; len];
    rng.fill_bytes(&mut payload);
    payload
}

pub fn human_bytes(n: u64) -> String {
    if n % (1024 * 1024) == 0 {
        format!("{}MiB", n / (1024 * 1024))
    } else if n % 1024 == 0 {
        format!("{}KiB", n / 1024)
    } else {
        format!("{n}B")
    }
}

/// The desk-scale default sweep: chains of {2, 8, 16} nodes crossed with
/// {64 KiB, 1 MiB, 5 MiB} payloads, 10 repetitions each.
pub fn default_sweep() -> Vec<ExperimentSpec> {
    let mut specs = Vec::new();
    for chain_length in [2u32, 8, 16] {
        for payload_bytes in [64 * 1024u64, 1024 * 1024, 5 * 1024 * 1024] {
            specs.push(ExperimentSpec {
                chain_length,
                payload_bytes,
                repetitions: 10,
                bandwidth_limit_bits: None,
                seed: 7,
                hop_limit: None,
                lifetime_us: None,
                label: None,
            });
        }
    }
    specs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payloads_are_deterministic_per_seed() {
        let a = seeded_payload(42, 4096);
        let b = seeded_payload(42, 4096);
        let c = seeded_payload(43, 4096);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 4096);
    }

    #[test]
    fn spec_toml_roundtrip() {
        let spec = ExperimentSpec {
            chain_length: 8,
            payload_bytes: 1024 * 1024,
            repetitions: 10,
            bandwidth_limit_bits: Some(54_000_000),
            seed: 7,
            hop_limit: None,
            lifetime_us: None,
            label: None,
        };
        let text = toml::to_string(&spec).unwrap();
        let back: ExperimentSpec = toml::from_str(&text).unwrap();
        assert_eq!(back.chain_length, 8);
        assert_eq!(back.bandwidth_limit_bits, Some(54_000_000));
        assert_eq!(back.label(), "chain8x1MiB");
    }
}
