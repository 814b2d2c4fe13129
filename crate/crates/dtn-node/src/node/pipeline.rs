//! The bundle processing procedures: reception, dispatch, local delivery,
//! forwarding, deletion, and status reporting.
//!
//! The primary block is never touched here. Forwarding works on a transient
//! copy of the bundle whose extension blocks (hop count, previous node,
//! bundle age) are updated for the outgoing transmission; the stored bundle
//! keeps the form in which it arrived, so repeated attempts never
//! double-count hops or age.

use std::net::SocketAddr;

use bp7::admin::{reason, AdministrativeRecord, StatusKind, StatusReport};
use bp7::{Bundle, BundleBuilder, BundleFlags, EndpointId};

use crate::discovery::PeerEvent;
use crate::journal::{event, JournalEvent};
use crate::node::mailbox::MailboxEntry;
use crate::routing::RoutingEvent;
use crate::store::{Constraint, StoreError};

use super::{NodeState, PipelineMsg, ReceivedReport};

/// A locally created bundle enters the pipeline.
pub(crate) fn process_created(state: &NodeState, bundle: Bundle) {
    let key = bundle.id().to_string();
    let now = state.clock.now_unix_micros();
    let (_, known) = match state.store.push(&bundle, now) {
        Ok(result) => result,
        Err(e) => {
            log::error!("pipeline: cannot store created bundle {key}: {e}");
            return;
        }
    };
    if known {
        log::warn!("pipeline: created bundle {key} already known, ignoring");
        return;
    }
    let mut ev = JournalEvent::new(event::CREATED).bundle(&key);
    ev.src = Some(bundle.primary.source().to_string());
    ev.dst = Some(bundle.primary.destination().to_string());
    ev.bytes = Some(bundle.payload().map_or(0, |p| p.len() as u64));
    state.journal.emit(ev);
    dispatch(state, &key, &bundle);
}

/// A bundle arrived over a convergence layer.
pub(crate) fn process_inbound(state: &NodeState, bundle: Bundle, from: SocketAddr) {
    let key = bundle.id().to_string();
    let now = state.clock.now_unix_micros();
    // the transport peer is an ephemeral address; the previous-node block
    // names the sending node
    let sender_eid = bundle.previous_node().cloned();

    if state.store.is_known(&key) {
        note_received(state, &key, sender_eid.as_ref());
        let mut ev = JournalEvent::new(event::DUPLICATE).bundle(&key);
        ev.peer = Some(from.to_string());
        ev.prev_node = sender_eid.map(|e| e.to_string());
        state.journal.emit(ev);
        return;
    }

    if bundle.is_expired(now, now) {
        let mut ev = JournalEvent::new(event::DELETED).bundle(&key);
        ev.reason = Some(reason::describe(reason::LIFETIME_EXPIRED).into());
        state.journal.emit(ev);
        maybe_report(state, &bundle, StatusKind::Deleted, reason::LIFETIME_EXPIRED, 0);
        return;
    }

    if let Err(e) = state.store.push(&bundle, now) {
        log::error!("pipeline: cannot store inbound bundle {key}: {e}");
        return;
    }
    note_received(state, &key, sender_eid.as_ref());

    let mut ev = JournalEvent::new(event::RECEIVED).bundle(&key);
    ev.src = Some(bundle.primary.source().to_string());
    ev.dst = Some(bundle.primary.destination().to_string());
    ev.peer = Some(from.to_string());
    ev.prev_node = sender_eid.map(|e| e.to_string());
    ev.hop_count = bundle.hop_count().map(|(_, count)| count);
    ev.bytes = Some(bundle.payload().map_or(0, |p| p.len() as u64));
    state.journal.emit(ev);

    if bundle.primary.flags().contains(BundleFlags::REPORT_RECEPTION) {
        let remaining = remaining_lifetime(state, &key);
        maybe_report(state, &bundle, StatusKind::Received, reason::NO_INFORMATION, remaining);
    }

    dispatch(state, &key, &bundle);
}

fn note_received(state: &NodeState, key: &str, sender: Option<&EndpointId>) {
    let mut routing = state.routing.lock().unwrap();
    routing.note_event(RoutingEvent::BundleReceived { key, from: sender });
}

/// Mark the bundle for local delivery, forwarding, or both.
///
/// A bundle addressed to this node's own id is terminal here. Any other
/// destination keeps forwarding — including registered service endpoints,
/// which more than one node may serve.
fn dispatch(state: &NodeState, key: &str, bundle: &Bundle) {
    let dest = bundle.primary.destination().to_string();
    let local = state.mailboxes.is_registered(&dest);
    let forward = dest != state.node_eid_text;

    if local {
        let _ = state.store.add_constraint(key, Constraint::LocalDelivery);
    }
    if forward {
        let _ = state.store.add_constraint(key, Constraint::ForwardPending);
    }
    let _ = state.store.remove_constraint(key, Constraint::DispatchPending);

    if local {
        deliver_local(state, key, bundle);
    }
    if forward {
        let _ = state.forward_tx.send(key.to_string());
    }
}

/// Hand the payload to the matching mailbox, or consume an administrative
/// record internally.
fn deliver_local(state: &NodeState, key: &str, bundle: &Bundle) {
    if bundle.is_admin_record() {
        consume_admin_record(state, key, bundle);
    } else if state.mailboxes.deliver(MailboxEntry::from_bundle(bundle)) {
        let mut ev = JournalEvent::new(event::DELIVERED).bundle(key);
        ev.endpoint = Some(bundle.primary.destination().to_string());
        state.journal.emit(ev);
        if bundle.primary.flags().contains(BundleFlags::REPORT_DELIVERY) {
            let remaining = remaining_lifetime(state, key);
            maybe_report(state, bundle, StatusKind::Delivered, reason::NO_INFORMATION, remaining);
        }
    } else {
        log::debug!("pipeline: suppressed duplicate delivery of {key}");
    }
    let _ = state.store.remove_constraint(key, Constraint::LocalDelivery);
}

fn consume_admin_record(state: &NodeState, key: &str, bundle: &Bundle) {
    let Some(payload) = bundle.payload() else { return };
    match AdministrativeRecord::decode(payload) {
        Ok(AdministrativeRecord::StatusReport(report)) => {
            let kinds: Vec<String> =
                report.asserted_kinds().iter().map(|k| k.to_string()).collect();
            let mut ev = JournalEvent::new(event::ADMIN_RECEIVED).bundle(key);
            ev.refers_to = Some(report.refers_to.to_string());
            ev.kind = Some(kinds.join("+"));
            ev.reason = Some(reason::describe(report.reason).into());
            state.journal.emit(ev);
            state.reports.lock().unwrap().push(ReceivedReport {
                at_unix_micros: state.clock.now_unix_micros(),
                refers_to: report.refers_to.to_string(),
                kinds,
                reason_code: report.reason,
                reason: reason::describe(report.reason).into(),
                report_source: bundle.primary.source().to_string(),
            });
        }
        Ok(AdministrativeRecord::Unknown { record_type, .. }) => {
            log::info!("pipeline: ignoring administrative record type {record_type} in {key}");
        }
        Err(e) => {
            log::warn!("pipeline: malformed administrative record in {key}: {e}");
        }
    }
}

/// One forwarding attempt: refresh extension blocks on an outgoing copy,
/// select peers that do not hold the bundle yet, transmit to each.
pub(crate) fn forward_one(state: &NodeState, key: &str) {
    let (bundle, desc) = match state.store.query(key) {
        Ok(found) => found,
        Err(StoreError::NotFound) => return, // expired or retired meanwhile
        Err(e) => {
            log::warn!("pipeline: cannot load {key} for forwarding: {e}");
            return;
        }
    };
    if !desc.constraints.contains(&Constraint::ForwardPending) {
        return;
    }
    let now = state.clock.now_unix_micros();
    if desc.is_expired(now) {
        delete_bundle(state, key, &bundle, reason::LIFETIME_EXPIRED);
        return;
    }

    // hop limit: the bundle's own limit, checked before transmission
    if let Some((limit, count)) = bundle.hop_count() {
        if count + 1 > limit {
            delete_bundle(state, key, &bundle, reason::HOP_LIMIT_EXCEEDED);
            return;
        }
    }

    let peers = {
        let routing = state.routing.lock().unwrap();
        routing.select_peers(key)
    };
    if peers.is_empty() {
        return; // remains stored for the next retry cycle
    }

    // outgoing copy: stored bundle stays as received
    let mut outgoing = bundle.clone();
    if let Some((limit, count)) = outgoing.hop_count() {
        outgoing.set_hop_count(limit, count + 1);
    }
    outgoing.set_previous_node(state.node_eid.clone());
    let residence = now.saturating_sub(desc.receipt_unix_micros);
    match outgoing.bundle_age_micros() {
        Some(age) => outgoing.set_bundle_age(age + residence),
        None if outgoing.primary.creation().is_clockless() => {
            outgoing.set_bundle_age(residence)
        }
        None => {}
    }
    let bytes = match outgoing.encode() {
        Ok(bytes) => bytes,
        Err(e) => {
            log::error!("pipeline: cannot encode outgoing copy of {key}: {e}");
            return;
        }
    };

    for peer in peers {
        let peer_text = peer.to_string();
        let Some(addr) = state.peers.resolve_mtcp(&peer_text) else {
            log::debug!("pipeline: peer {peer_text} has no mtcp address");
            continue;
        };
        match state.sender.send(&addr, &bytes) {
            Ok(()) => {
                {
                    let mut routing = state.routing.lock().unwrap();
                    routing.note_event(RoutingEvent::BundleSent { key, to: &peer });
                }
                let mut ev = JournalEvent::new(event::SENT).bundle(key).peer(&peer_text);
                ev.bytes = Some(bytes.len() as u64);
                state.journal.emit(ev);
                if bundle.primary.flags().contains(BundleFlags::REPORT_FORWARDING) {
                    let remaining = remaining_lifetime(state, key);
                    maybe_report(
                        state,
                        &bundle,
                        StatusKind::Forwarded,
                        reason::NO_INFORMATION,
                        remaining,
                    );
                }
            }
            Err(e) => {
                // peer not recorded as reached; the retry cycle tries again
                let mut ev = JournalEvent::new(event::SEND_FAILED).bundle(key).peer(&peer_text);
                ev.reason = Some(e.to_string());
                state.journal.emit(ev);
            }
        }
    }
}

/// Delete a stored bundle with a reason, emitting a deletion report if the
/// source asked for one.
fn delete_bundle(state: &NodeState, key: &str, bundle: &Bundle, reason_code: u64) {
    let mut ev = JournalEvent::new(event::DELETED).bundle(key);
    ev.reason = Some(reason::describe(reason_code).into());
    state.journal.emit(ev);
    let remaining = remaining_lifetime(state, key);
    maybe_report(state, bundle, StatusKind::Deleted, reason_code, remaining);
    let _ = state.store.delete(key, state.clock.now_unix_micros());
}

/// Expire bundles, reap drained descriptors, purge old tombstones.
pub(crate) fn gc_cycle(state: &NodeState) {
    let now = state.clock.now_unix_micros();
    for key in state.store.expired_keys(now) {
        match state.store.query(&key) {
            Ok((bundle, _)) => delete_bundle(state, &key, &bundle, reason::LIFETIME_EXPIRED),
            Err(_) => {
                let _ = state.store.delete(&key, now);
            }
        }
    }
    let retired = state.store.gc(now);
    if !retired.is_empty() {
        for (id, _) in &retired {
            let mut ev = JournalEvent::new(event::DELETED).bundle(id.to_string());
            ev.reason = Some("retired".into());
            state.journal.emit(ev);
        }
        let mut ev = JournalEvent::new(event::GC);
        ev.removed = Some(retired.len() as u64);
        state.journal.emit(ev);
    }
}

pub(crate) fn handle_peer_event(state: &NodeState, ev: PeerEvent) {
    match ev {
        PeerEvent::Appeared { node_id, clas } => {
            let new = state.peers.upsert_discovered(&node_id, &clas);
            {
                let mut routing = state.routing.lock().unwrap();
                routing.note_event(RoutingEvent::PeerAppeared { peer: &node_id });
            }
            if new {
                state
                    .journal
                    .emit(JournalEvent::new(event::PEER_APPEARED).peer(node_id.to_string()));
                // a fresh contact: try everything we are still carrying
                for desc in state.store.pending(&[Constraint::ForwardPending]) {
                    let _ = state.forward_tx.send(desc.key);
                }
            }
        }
        PeerEvent::Disappeared { node_id } => {
            if state.peers.remove_discovered(&node_id) {
                let mut routing = state.routing.lock().unwrap();
                routing.note_event(RoutingEvent::PeerDisappeared { peer: &node_id });
                state
                    .journal
                    .emit(JournalEvent::new(event::PEER_DISAPPEARED).peer(node_id.to_string()));
            }
        }
    }
}

/// Microseconds of life the stored bundle has left.
fn remaining_lifetime(state: &NodeState, key: &str) -> u64 {
    let now = state.clock.now_unix_micros();
    state
        .store
        .descriptor(key)
        .map(|d| d.expiry_unix_micros.saturating_sub(now))
        .unwrap_or(0)
}

/// Emit a status report about `orig` if its flags request this kind and a
/// report can be addressed. Reports are themselves never report-generating.
fn maybe_report(
    state: &NodeState,
    orig: &Bundle,
    kind: StatusKind,
    reason_code: u64,
    lifetime_micros: u64,
) {
    let flags = orig.primary.flags();
    let requested = match kind {
        StatusKind::Received => flags.contains(BundleFlags::REPORT_RECEPTION),
        StatusKind::Forwarded => flags.contains(BundleFlags::REPORT_FORWARDING),
        StatusKind::Delivered => flags.contains(BundleFlags::REPORT_DELIVERY),
        StatusKind::Deleted => flags.contains(BundleFlags::REPORT_DELETION),
    };
    if !requested || orig.is_admin_record() {
        return;
    }
    let report_to = orig.primary.report_to();
    if report_to.is_null() {
        return;
    }
    let time = if flags.contains(BundleFlags::STATUS_TIME_REQUESTED) {
        Some(state.clock.dtn_time_secs())
    } else {
        None
    };
    let record = AdministrativeRecord::StatusReport(StatusReport::event(
        kind,
        reason_code,
        orig.id(),
        time,
    ));
    let report = BundleBuilder::new(report_to.clone(), state.node_eid.clone())
        .flags(BundleFlags::ADMIN_RECORD)
        .lifetime_micros(lifetime_micros.max(1))
        .hop_limit(Some(state.cfg.hop_limit))
        .creation(state.clock.next_creation())
        .payload(record.encode())
        .build();
    match report {
        Ok(report) => {
            let mut ev = JournalEvent::new(event::REPORT_SENT).bundle(report.id().to_string());
            ev.refers_to = Some(orig.id().to_string());
            ev.kind = Some(kind.to_string());
            ev.dst = Some(report_to.to_string());
            ev.reason = Some(reason::describe(reason_code).into());
            state.journal.emit(ev);
            // self-addressed reports simply dispatch to local delivery
            let _ = state.pipeline_tx.send(PipelineMsg::Created { bundle: report });
        }
        Err(e) => log::warn!("pipeline: cannot build status report: {e}"),
    }
}
