//! Send and receive bundles through a running daemon's agent API.
//!
//! `dtncat send <agent-url> <destination-eid>` reads the payload from
//! standard input and prints the new bundle id. `dtncat fetch <agent-url>
//! [endpoint]` writes each fetched payload to standard output (raw bytes)
//! with metadata on standard error.

use std::io::{Read, Write};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use base64::Engine;
use clap::Parser;

#[derive(Parser)]
#[command(name = "dtncat", about = "send and fetch bundles via a dtnd agent", version)]
enum Cli {
    /// Read stdin and send it as one bundle.
    Send {
        /// Agent base URL, e.g. http://localhost:8080
        url: String,
        /// Destination EID, e.g. dtn:s2
        destination: String,
        /// Lifetime in microseconds (node default when omitted).
        #[arg(long)]
        lifetime: Option<u64>,
        /// Do not request a delivery report.
        #[arg(long)]
        no_report: bool,
    },
    /// Fetch queued bundles; payloads go to stdout, metadata to stderr.
    Fetch {
        /// Agent base URL, e.g. http://localhost:8080
        url: String,
        /// Only this endpoint (all registered endpoints when omitted).
        endpoint: Option<String>,
    },
}

fn agent_error(err: ureq::Error) -> anyhow::Error {
    match err {
        ureq::Error::Status(code, response) => {
            let body = response.into_string().unwrap_or_default();
            let detail = serde_json::from_str::<serde_json::Value>(&body)
                .ok()
                .and_then(|v| v["error"].as_str().map(str::to_string))
                .unwrap_or(body);
            anyhow::anyhow!("agent returned {code}: {detail}")
        }
        other => anyhow::anyhow!("cannot reach agent: {other}"),
    }
}

fn send(url: &str, destination: &str, lifetime: Option<u64>, no_report: bool) -> Result<()> {
    let mut payload = Vec::new();
    std::io::stdin().read_to_end(&mut payload).context("reading stdin")?;
    let mut body = serde_json::json!({
        "destination": destination,
        "payload_b64": base64::engine::general_purpose::STANDARD.encode(&payload),
    });
    if let Some(lifetime) = lifetime {
        body["lifetime"] = serde_json::json!(lifetime);
    }
    if no_report {
        body["report"] = serde_json::json!(false);
    }
    let response = ureq::post(&format!("{url}/send"))
        .timeout(Duration::from_secs(600))
        .send_json(body)
        .map_err(agent_error)?;
    let value: serde_json::Value = response.into_json()?;
    match value["id"].as_str() {
        Some(id) => {
            println!("{id}");
            Ok(())
        }
        None => bail!("agent response missing id: {value}"),
    }
}

fn fetch(url: &str, endpoint: Option<&str>) -> Result<()> {
    let request_url = match endpoint {
        Some(e) => format!("{url}/fetch?endpoint={e}"),
        None => format!("{url}/fetch"),
    };
    let response = ureq::get(&request_url)
        .timeout(Duration::from_secs(600))
        .call()
        .map_err(agent_error)?;
    let entries: Vec<serde_json::Value> = response.into_json()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for entry in entries {
        let payload = entry["payload_b64"]
            .as_str()
            .and_then(|b64| base64::engine::general_purpose::STANDARD.decode(b64).ok())
            .context("entry without decodable payload")?;
        eprintln!(
            "bundle {} from {} to {} ({} bytes)",
            entry["id"].as_str().unwrap_or("?"),
            entry["source"].as_str().unwrap_or("?"),
            entry["destination"].as_str().unwrap_or("?"),
            payload.len()
        );
        out.write_all(&payload)?;
    }
    out.flush()?;
    Ok(())
}

fn main() {
    let result = match Cli::parse() {
        Cli::Send { url, destination, lifetime, no_report } => {
            send(&url, &destination, lifetime, no_report)
        }
        Cli::Fetch { url, endpoint } => fetch(&url, endpoint.as_deref()),
    };
    if let Err(e) = result {
        eprintln!("dtncat: {e}");
        std::process::exit(1);
    }
}
