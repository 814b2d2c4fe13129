//! Administrative records: protocol-generated payloads, currently the bundle
//! status report.
//!
//! A record travels as the payload block of a bundle whose
//! `payload-is-administrative-record` flag is set. On the wire it is
//! `[record_type, content]`; status-report content is
//! `[assertions, reason, source, creation(, fragment_offset)]` where
//! `assertions` is a fixed four-slot array for received / forwarded /
//! delivered / deleted, each `[asserted]` or `[asserted, time]`.

use alloc::vec::Vec;
use core::fmt;

use crate::cbor::{ArrayLen, Reader, Writer};
use crate::eid::EndpointId;
use crate::error::DecodeError;
use crate::id::BundleId;
use crate::time::CreationTimestamp;

pub const RECORD_TYPE_STATUS_REPORT: u64 = 1;

/// Status-report reason codes.
pub mod reason {
    pub const NO_INFORMATION: u64 = 0;
    pub const LIFETIME_EXPIRED: u64 = 1;
    pub const FORWARDED_UNIDIRECTIONAL: u64 = 2;
    pub const TRANSMISSION_CANCELED: u64 = 3;
    pub const DEPLETED_STORAGE: u64 = 4;
    pub const DESTINATION_UNAVAILABLE: u64 = 5;
    pub const NO_ROUTE: u64 = 6;
    pub const NO_TIMELY_CONTACT: u64 = 7;
    pub const BLOCK_UNINTELLIGIBLE: u64 = 8;
    pub const HOP_LIMIT_EXCEEDED: u64 = 9;

    /// Human-readable form used in logs and reports.
    pub fn describe(code: u64) -> &'static str {
        match code {
            NO_INFORMATION => "no information",
            LIFETIME_EXPIRED => "lifetime expired",
            FORWARDED_UNIDIRECTIONAL => "forwarded over unidirectional link",
            TRANSMISSION_CANCELED => "transmission canceled",
            DEPLETED_STORAGE => "depleted storage",
            DESTINATION_UNAVAILABLE => "destination endpoint unavailable",
            NO_ROUTE => "no known route to destination",
            NO_TIMELY_CONTACT => "no timely contact with next node",
            BLOCK_UNINTELLIGIBLE => "block unintelligible",
            HOP_LIMIT_EXCEEDED => "hop limit exceeded",
            _ => "unassigned reason",
        }
    }
}

/// Which bundle lifecycle event a status report asserts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatusKind {
    Received,
    Forwarded,
    Delivered,
    Deleted,
}

impl StatusKind {
    pub const ALL: [StatusKind; 4] =
        [StatusKind::Received, StatusKind::Forwarded, StatusKind::Delivered, StatusKind::Deleted];

    fn index(self) -> usize {
        match self {
            StatusKind::Received => 0,
            StatusKind::Forwarded => 1,
            StatusKind::Delivered => 2,
            StatusKind::Deleted => 3,
        }
    }
}

impl fmt::Display for StatusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatusKind::Received => write!(f, "received"),
            StatusKind::Forwarded => write!(f, "forwarded"),
            StatusKind::Delivered => write!(f, "delivered"),
            StatusKind::Deleted => write!(f, "deleted"),
        }
    }
}

/// One slot of a status report: whether the event happened and, if status
/// time was requested, when (DTN time seconds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StatusAssertion {
    pub asserted: bool,
    pub time: Option<u64>,
}

impl StatusAssertion {
    fn encode(&self, w: &mut Writer) {
        match self.time {
            Some(t) if self.asserted => {
                w.array(2);
                w.bool(true);
                w.uint(t);
            }
            _ => {
                w.array(1);
                w.bool(self.asserted);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<StatusAssertion, DecodeError> {
        let len = match r.array()? {
            ArrayLen::Definite(n @ 1..=2) => n,
            other => {
                return Err(DecodeError::Structure(alloc::format!(
                    "status assertion must be a 1- or 2-element array, got {other:?}"
                )))
            }
        };
        let asserted = r.bool()?;
        let time = if len == 2 { Some(r.uint()?) } else { None };
        Ok(StatusAssertion { asserted, time })
    }
}

/// A bundle status report referencing one bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusReport {
    pub assertions: [StatusAssertion; 4],
    pub reason: u64,
    pub refers_to: BundleId,
}

impl StatusReport {
    /// Report a single event with the given reason.
    pub fn event(kind: StatusKind, reason: u64, refers_to: BundleId, time: Option<u64>) -> Self {
        let mut assertions = [StatusAssertion::default(); 4];
        assertions[kind.index()] = StatusAssertion { asserted: true, time };
        StatusReport { assertions, reason, refers_to }
    }

    pub fn assertion(&self, kind: StatusKind) -> StatusAssertion {
        self.assertions[kind.index()]
    }

    /// The kinds this report asserts.
    pub fn asserted_kinds(&self) -> Vec<StatusKind> {
        StatusKind::ALL
            .into_iter()
            .filter(|k| self.assertions[k.index()].asserted)
            .collect()
    }
}

/// A decoded administrative record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdministrativeRecord {
    StatusReport(StatusReport),
    /// Record type this implementation does not interpret; content preserved.
    Unknown { record_type: u64, content: Vec<u8> },
}

impl AdministrativeRecord {
    /// Encode to the byte form carried in an admin bundle's payload block.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.array(2);
        match self {
            AdministrativeRecord::StatusReport(report) => {
                w.uint(RECORD_TYPE_STATUS_REPORT);
                let content_len = if report.refers_to.is_fragment() { 5 } else { 4 };
                w.array(content_len);
                w.array(4);
                for assertion in &report.assertions {
                    assertion.encode(&mut w);
                }
                w.uint(report.reason);
                report.refers_to.source.encode(&mut w);
                report.refers_to.creation.encode(&mut w);
                if let Some(offset) = report.refers_to.fragment_offset {
                    w.uint(offset);
                }
            }
            AdministrativeRecord::Unknown { record_type, content } => {
                w.uint(*record_type);
                w.raw(content);
            }
        }
        w.into_bytes()
    }

    /// Decode from an admin bundle's payload bytes.
    pub fn decode(bytes: &[u8]) -> Result<AdministrativeRecord, DecodeError> {
        let mut r = Reader::new(bytes);
        match r.array()? {
            ArrayLen::Definite(2) => {}
            other => {
                return Err(DecodeError::Structure(alloc::format!(
                    "administrative record must be a 2-element array, got {other:?}"
                )))
            }
        }
        let record_type = r.uint()?;
        if record_type != RECORD_TYPE_STATUS_REPORT {
            let content = r.skip_value()?.to_vec();
            if !r.is_at_end() {
                return Err(DecodeError::TrailingBytes);
            }
            return Ok(AdministrativeRecord::Unknown { record_type, content });
        }
        let content_len = match r.array()? {
            ArrayLen::Definite(n @ 4..=5) => n,
            other => {
                return Err(DecodeError::Structure(alloc::format!(
                    "status report content must be a 4- or 5-element array, got {other:?}"
                )))
            }
        };
        match r.array()? {
            ArrayLen::Definite(4) => {}
            other => {
                return Err(DecodeError::Structure(alloc::format!(
                    "status assertions must be a 4-element array, got {other:?}"
                )))
            }
        }
        let mut assertions = [StatusAssertion::default(); 4];
        for slot in &mut assertions {
            *slot = StatusAssertion::decode(&mut r)?;
        }
        let reason = r.uint()?;
        let source = EndpointId::decode(&mut r)?;
        let creation = CreationTimestamp::decode(&mut r)?;
        let fragment_offset = if content_len == 5 { Some(r.uint()?) } else { None };
        if !r.is_at_end() {
            return Err(DecodeError::TrailingBytes);
        }
        Ok(AdministrativeRecord::StatusReport(StatusReport {
            assertions,
            reason,
            refers_to: BundleId { source, creation, fragment_offset },
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_id() -> BundleId {
        BundleId::new("dtn:b2".parse().unwrap(), CreationTimestamp::new(0, 23))
    }

    #[test]
    fn status_report_roundtrip() {
        let report = StatusReport::event(
            StatusKind::Delivered,
            reason::NO_INFORMATION,
            sample_id(),
            Some(812_060_000),
        );
        let record = AdministrativeRecord::StatusReport(report);
        let bytes = record.encode();
        assert_eq!(AdministrativeRecord::decode(&bytes).unwrap(), record);
    }

    #[test]
    fn fragment_reference_roundtrip() {
        let mut id = sample_id();
        id.fragment_offset = Some(512);
        let record = AdministrativeRecord::StatusReport(StatusReport::event(
            StatusKind::Deleted,
            reason::HOP_LIMIT_EXCEEDED,
            id,
            None,
        ));
        let bytes = record.encode();
        assert_eq!(AdministrativeRecord::decode(&bytes).unwrap(), record);
    }

    #[test]
    fn unknown_record_preserved() {
        let mut w = Writer::new();
        w.array(2);
        w.uint(99);
        w.text("future");
        let bytes = w.into_bytes();
        let record = AdministrativeRecord::decode(&bytes).unwrap();
        match &record {
            AdministrativeRecord::Unknown { record_type: 99, content } => {
                assert!(!content.is_empty())
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(record.encode(), bytes);
    }

    #[test]
    fn reason_text() {
        assert_eq!(reason::describe(reason::HOP_LIMIT_EXCEEDED), "hop limit exceeded");
        assert_eq!(reason::describe(reason::LIFETIME_EXPIRED), "lifetime expired");
    }
}
