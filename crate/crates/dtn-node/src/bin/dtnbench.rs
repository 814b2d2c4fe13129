//! Chain-topology evaluation harness: run one experiment or the default
//! desk-scale sweep, collect CSV results and counter samples, and render
//! latency charts.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dtn_node::harness::{
    self, default_sweep, plot, run_experiment, ExperimentSpec, RunnerOptions,
};

#[derive(Parser)]
#[command(name = "dtnbench", about = "chain-topology evaluation harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment (from --spec or the flags).
    Run(RunCmd),
    /// Run the default sweep: chains {2,8,16} x payloads {64KiB,1MiB,5MiB},
    /// 10 repetitions each.
    Sweep(CommonArgs),
    /// Render a latency-vs-payload SVG chart from results.csv.
    Plot {
        /// results.csv produced by run/sweep.
        #[arg(long, default_value = "dtnbench-out/results.csv")]
        results: PathBuf,
        /// Output SVG path.
        #[arg(long, default_value = "dtnbench-out/latency.svg")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunCmd {
    /// Experiment spec file (TOML). Flags below override nothing when set.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Chain length (nodes) when no spec file is given.
    #[arg(long, default_value_t = 2)]
    chain: u32,
    /// Payload size in bytes.
    #[arg(long, default_value_t = 64 * 1024)]
    payload: u64,
    /// Repetitions.
    #[arg(long, default_value_t = 10)]
    reps: u32,
    /// Per-link pacing in bits/s (unpaced when omitted).
    #[arg(long)]
    bandwidth: Option<u64>,
    /// Payload seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Hop limit on the originating node.
    #[arg(long)]
    hop_limit: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for results.csv and samples.csv.
    #[arg(long, default_value = "dtnbench-out")]
    out: PathBuf,
    /// Path to the dtnd binary (defaults to the one next to dtnbench).
    #[arg(long)]
    dtnd: Option<PathBuf>,
    /// Keep per-node state directories after the run.
    #[arg(long)]
    keep: bool,
}

impl CommonArgs {
    fn runner_options(&self, tag: &str) -> Result<RunnerOptions> {
        let dtnd = match &self.dtnd {
            Some(path) => path.clone(),
            None => harness::sibling_dtnd()?,
        };
        Ok(RunnerOptions { dtnd, work_dir: harness::unique_work_dir(tag), keep_dirs: self.keep })
    }
}

fn execute(spec: &ExperimentSpec, common: &CommonArgs) -> Result<()> {
    let opts = common.runner_options(&spec.label())?;
    eprintln!(
        "running {}: {} nodes, {} bytes, {} reps{}",
        spec.label(),
        spec.chain_length,
        spec.payload_bytes,
        spec.repetitions,
        match spec.bandwidth_limit_bits {
            Some(rate) => format!(", paced {rate} bit/s"),
            None => String::new(),
        }
    );
    let outcome = run_experiment(spec, &opts)?;
    harness::write_results_csv(&common.out.join("results.csv"), &outcome)?;
    harness::write_samples_csv(&common.out.join("samples.csv"), &outcome)?;
    eprintln!(
        "  delivered {}/{} median {} ms (stddev {})",
        outcome.delivered_count(),
        outcome.rows.len(),
        outcome.median_latency_ms().map(|v| format!("{v:.1}")).unwrap_or("-".into()),
        outcome.stddev_latency_ms().map(|v| format!("{v:.1}")).unwrap_or("-".into()),
    );
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run(cmd) => {
            let spec = match &cmd.spec {
                Some(path) => ExperimentSpec::from_file(path)
                    .with_context(|| format!("loading {}", path.display())),
                None => Ok(ExperimentSpec {
                    chain_length: cmd.chain,
                    payload_bytes: cmd.payload,
                    repetitions: cmd.reps,
                    bandwidth_limit_bits: cmd.bandwidth,
                    seed: cmd.seed,
                    hop_limit: cmd.hop_limit,
                    lifetime_us: None,
                    label: None,
                }),
            };
            spec.and_then(|spec| execute(&spec, &cmd.common))
        }
        Command::Sweep(common) => {
            let mut result = Ok(());
            for spec in default_sweep() {
                result = execute(&spec, &common);
                if result.is_err() {
                    break;
                }
            }
            result
        }
        Command::Plot { results, out } => plot::plot_latency(&results, &out).map(|()| {
            eprintln!("wrote {}", out.display());
        }),
    };
    if let Err(e) = result {
        eprintln!("dtnbench: {e:#}");
        std::process::exit(1);
    }
}
