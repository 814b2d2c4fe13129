//! Bundle Protocol version 7 (draft-13) data types and wire codec.
//!
//! This crate implements the BP7 protocol data unit — the bundle — as a
//! primary block followed by canonical blocks, together with its CBOR wire
//! encoding, CRC-16/X-25 and CRC-32C checksums, endpoint identifier parsing,
//! and bundle construction with sane defaults. It is the value layer shared
//! by the node daemon, the convergence layers, and third-party tooling; it
//! performs no IO and is usable from `no_std` environments with an allocator.
//!
//! Encoding is deterministic: equal bundles produce identical bytes. Decoding
//! is liberal about non-minimal integer heads and definite vs. indefinite
//! outer arrays, but validates structure, CRCs, and protocol invariants
//! before handing out a [`Bundle`].

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod admin;
pub mod bundle;
pub mod canonical;
pub mod cbor;
pub mod crc;
pub mod creation;
pub mod eid;
pub mod error;
pub mod flags;
pub mod id;
pub mod primary;
pub mod time;

pub use admin::{AdministrativeRecord, StatusAssertion, StatusKind, StatusReport};
pub use bundle::Bundle;
pub use canonical::{BlockData, CanonicalBlock};
pub use crc::CrcType;
pub use creation::BundleBuilder;
pub use eid::EndpointId;
pub use error::{DecodeError, EidParseError, EncodeError, ValidationError};
pub use flags::{BlockFlags, BundleFlags};
pub use id::BundleId;
pub use primary::PrimaryBlock;
pub use time::CreationTimestamp;

/// Hard upper bound on the size of a single encoded bundle.
///
/// Decoders reject anything larger before allocating; stream receivers use it
/// to cap frame lengths learned from untrusted CBOR heads.
pub const MAX_BUNDLE_SIZE: usize = 256 * 1024 * 1024;
