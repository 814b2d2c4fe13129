//! RESTful application agent.
//!
//! Three routes on HTTP/1.1 with JSON bodies:
//! `POST /send` builds and injects a bundle from a destination EID and a
//! base64 payload; `GET /fetch[?endpoint=EID]` destructively returns queued
//! mailbox entries; `POST /register` adds a delivery endpoint. `GET /reports`
//! surfaces status reports this node received. Errors come back as
//! `{"error": "..."}` with a 400/404 status.

use std::net::SocketAddr;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use base64::Engine;
use bp7::BundleFlags;
use serde::Deserialize;
use tiny_http::{Header, Method, Response, Server};

use crate::node::{NodeError, SubmitError, SubmitOptions};

const WORKERS: usize = 4;
/// Request bodies larger than this are rejected outright.
const MAX_BODY: usize = 512 * 1024 * 1024;

#[derive(Debug, Deserialize)]
struct SendRequest {
    destination: String,
    payload_b64: String,
    /// Lifetime in microseconds; the node default applies when omitted.
    lifetime: Option<u64>,
    /// Request a delivery report (default true).
    report: Option<bool>,
    /// Extra report requests: `reception`, `forwarding`, `delivery`,
    /// `deletion`.
    report_flags: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct RegisterRequest {
    endpoint: String,
}

pub(crate) struct AgentServer {
    server: Arc<Server>,
    threads: Vec<JoinHandle<()>>,
}

impl AgentServer {
    pub(crate) fn spawn(
        state: Arc<crate::node::NodeState>,
        addr: SocketAddr,
    ) -> Result<(AgentServer, SocketAddr), NodeError> {
        let server = Server::http(addr)
            .map_err(|e| NodeError::Agent(std::io::Error::other(e.to_string())))?;
        let local_addr = match server.server_addr() {
            tiny_http::ListenAddr::IP(addr) => addr,
            #[cfg(unix)]
            tiny_http::ListenAddr::Unix(_) => unreachable!("agent binds TCP"),
        };
        let server = Arc::new(server);
        let mut threads = Vec::new();
        for i in 0..WORKERS {
            let server = server.clone();
            let state = state.clone();
            threads.push(
                std::thread::Builder::new()
                    .name(format!("agent-{i}"))
                    .spawn(move || loop {
                        match server.recv_timeout(Duration::from_millis(100)) {
                            Ok(Some(request)) => handle(&state, request),
                            Ok(None) => {
                                if state.shutdown.load(Ordering::Relaxed) {
                                    return;
                                }
                            }
                            Err(_) => return,
                        }
                    })
                    .expect("spawn agent worker"),
            );
        }
        Ok((AgentServer { server, threads }, local_addr))
    }

    pub(crate) fn stop(&mut self) {
        self.server.unblock();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn json_header() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap()
}

fn respond(request: tiny_http::Request, status: u32, body: serde_json::Value) {
    let response = Response::from_string(body.to_string())
        .with_status_code(status as u16)
        .with_header(json_header());
    let _ = request.respond(response);
}

fn error_body(message: impl std::fmt::Display) -> serde_json::Value {
    serde_json::json!({ "error": message.to_string() })
}

fn handle(state: &crate::node::NodeState, mut request: tiny_http::Request) {
    let url = request.url().to_string();
    let (path, query) = match url.split_once('?') {
        Some((p, q)) => (p.to_string(), Some(q.to_string())),
        None => (url, None),
    };
    match (request.method().clone(), path.as_str()) {
        (Method::Post, "/send") => {
            let body = match read_body(&mut request) {
                Ok(body) => body,
                Err(msg) => return respond(request, 400, error_body(msg)),
            };
            match serde_json::from_slice::<SendRequest>(&body) {
                Ok(send) => handle_send(state, request, send),
                Err(e) => respond(request, 400, error_body(format!("bad request body: {e}"))),
            }
        }
        (Method::Post, "/register") => {
            let body = match read_body(&mut request) {
                Ok(body) => body,
                Err(msg) => return respond(request, 400, error_body(msg)),
            };
            match serde_json::from_slice::<RegisterRequest>(&body) {
                Ok(req) => match req.endpoint.parse::<bp7::EndpointId>() {
                    Ok(eid) if !eid.is_null() => {
                        state.mailboxes.register(&eid.to_string());
                        respond(request, 200, serde_json::json!({}));
                    }
                    Ok(_) => respond(request, 400, error_body("cannot register the null endpoint")),
                    Err(e) => respond(request, 400, error_body(e)),
                },
                Err(e) => respond(request, 400, error_body(format!("bad request body: {e}"))),
            }
        }
        (Method::Get, "/fetch") => {
            let endpoint = query.as_deref().and_then(query_endpoint);
            match state.mailboxes.drain(endpoint.as_deref()) {
                Ok(entries) => respond(request, 200, serde_json::json!(entries)),
                Err(e) => respond(request, 404, error_body(format!("endpoint not registered: {}", e.0))),
            }
        }
        (Method::Get, "/reports") => {
            let reports = state.reports.lock().unwrap().clone();
            respond(request, 200, serde_json::json!(reports));
        }
        _ => respond(request, 404, error_body("no such route")),
    }
}

fn handle_send(state: &crate::node::NodeState, request: tiny_http::Request, send: SendRequest) {
    let payload = match base64::engine::general_purpose::STANDARD.decode(&send.payload_b64) {
        Ok(payload) => payload,
        Err(e) => return respond(request, 400, error_body(format!("bad payload_b64: {e}"))),
    };
    let mut opts = SubmitOptions {
        lifetime_micros: send.lifetime,
        report_delivery: send.report.unwrap_or(true),
        extra_flags: BundleFlags::empty(),
    };
    for flag in send.report_flags.iter().flatten() {
        match flag.as_str() {
            "reception" => opts.extra_flags |= BundleFlags::REPORT_RECEPTION,
            "forwarding" => opts.extra_flags |= BundleFlags::REPORT_FORWARDING,
            "delivery" => opts.report_delivery = true,
            "deletion" => opts.extra_flags |= BundleFlags::REPORT_DELETION,
            other => {
                return respond(request, 400, error_body(format!("unknown report flag {other:?}")))
            }
        }
    }
    match state.submit(&send.destination, payload, opts) {
        Ok(id) => respond(request, 200, serde_json::json!({ "id": id })),
        Err(e @ (SubmitError::BadDestination(_) | SubmitError::Build(_) | SubmitError::TooLarge(_))) => {
            respond(request, 400, error_body(e))
        }
        Err(e @ SubmitError::Shutdown) => respond(request, 503, error_body(e)),
    }
}

fn read_body(request: &mut tiny_http::Request) -> Result<Vec<u8>, String> {
    use std::io::Read;
    if let Some(len) = request.body_length() {
        if len > MAX_BODY {
            return Err(format!("body of {len} bytes exceeds limit"));
        }
    }
    let mut body = Vec::new();
    let mut reader = request.as_reader().take(MAX_BODY as u64 + 1);
    reader.read_to_end(&mut body).map_err(|e| format!("cannot read body: {e}"))?;
    if body.len() > MAX_BODY {
        return Err("body exceeds limit".into());
    }
    Ok(body)
}

/// Extract and percent-decode the `endpoint` query parameter.
fn query_endpoint(query: &str) -> Option<String> {
    for pair in query.split('&') {
        let (k, v) = pair.split_once('=')?;
        if k == "endpoint" {
            return Some(percent_decode(v));
        }
    }
    None
}

fn percent_decode(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(byte) = u8::from_str_radix(&text[i + 1..i + 3], 16) {
                out.push(byte);
                i += 3;
                continue;
            }
        }
        out.push(if bytes[i] == b'+' { b' ' } else { bytes[i] });
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}
