//! Error types for parsing, validation, and the wire codec.

use alloc::string::String;
use core::fmt;

use crate::cbor;

/// Failure to parse a textual endpoint identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EidParseError {
    /// No `scheme:` separator present.
    MissingScheme,
    /// Scheme name is not `dtn` or `ipn`.
    UnknownScheme(String),
    /// Scheme-specific part is empty.
    EmptySsp,
    /// DTN-scheme path violates the SSP rules (whitespace, leading slash).
    InvalidDtnSsp(String),
    /// IPN-scheme part is not `<node>.<service>` with unsigned components.
    InvalidIpn(String),
}

impl fmt::Display for EidParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EidParseError::MissingScheme => write!(f, "endpoint id has no scheme separator"),
            EidParseError::UnknownScheme(s) => write!(f, "unknown endpoint scheme {s:?}"),
            EidParseError::EmptySsp => write!(f, "endpoint scheme-specific part is empty"),
            EidParseError::InvalidDtnSsp(s) => write!(f, "invalid dtn path {s:?}"),
            EidParseError::InvalidIpn(s) => write!(f, "invalid ipn address {s:?}"),
        }
    }
}

impl core::error::Error for EidParseError {}

/// A structural rule the bundle under construction or inspection violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationError {
    /// No canonical blocks at all.
    NoBlocks,
    /// The last canonical block is not a payload block.
    PayloadNotLast,
    /// No payload block present.
    MissingPayload,
    /// More than one payload block.
    MultiplePayloads,
    /// The payload block must carry block number 1.
    PayloadNumberNotOne,
    /// Two blocks share a block number.
    DuplicateBlockNumber(u64),
    /// Hop count limit must be at least 1.
    HopLimitZero,
    /// Fragment fields present without the fragment flag, or vice versa.
    FragmentMismatch,
    /// A block's declared type code does not match its data variant.
    BlockTypeMismatch(u64),
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::NoBlocks => write!(f, "bundle has no canonical blocks"),
            ValidationError::PayloadNotLast => write!(f, "payload block is not the last block"),
            ValidationError::MissingPayload => write!(f, "bundle has no payload block"),
            ValidationError::MultiplePayloads => write!(f, "bundle has multiple payload blocks"),
            ValidationError::PayloadNumberNotOne => write!(f, "payload block number is not 1"),
            ValidationError::DuplicateBlockNumber(n) => write!(f, "duplicate block number {n}"),
            ValidationError::HopLimitZero => write!(f, "hop count limit must be >= 1"),
            ValidationError::FragmentMismatch => {
                write!(f, "fragment fields inconsistent with is-fragment flag")
            }
            ValidationError::BlockTypeMismatch(n) => {
                write!(f, "block {n} type code does not match its data")
            }
        }
    }
}

impl core::error::Error for ValidationError {}

/// Failure to encode a bundle. Nothing is emitted on error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeError {
    Validation(ValidationError),
}

impl fmt::Display for EncodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodeError::Validation(e) => write!(f, "bundle invalid: {e}"),
        }
    }
}

impl core::error::Error for EncodeError {}

impl From<ValidationError> for EncodeError {
    fn from(e: ValidationError) -> Self {
        EncodeError::Validation(e)
    }
}

/// Failure to decode bytes into a bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    /// Input ended before the structure was complete.
    Truncated,
    /// CBOR item of an unexpected shape; the message names the context.
    Structure(String),
    /// Primary block version field is not 7.
    VersionMismatch(u64),
    /// CRC verification failed for the named block (0 = primary).
    CrcMismatch { block_number: u64 },
    /// Declared CRC value length does not match the CRC type.
    CrcLength { block_number: u64 },
    /// Input (or a declared item inside it) exceeds [`crate::MAX_BUNDLE_SIZE`].
    TooLarge(u64),
    /// Well-formed CBOR, but the bundle violates a protocol invariant.
    Validation(ValidationError),
    /// A wire endpoint id is malformed.
    InvalidEid(String),
    /// Trailing bytes after the outer bundle array.
    TrailingBytes,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Truncated => write!(f, "truncated input"),
            DecodeError::Structure(what) => write!(f, "malformed CBOR structure: {what}"),
            DecodeError::VersionMismatch(v) => write!(f, "unsupported bundle version {v}"),
            DecodeError::CrcMismatch { block_number } => {
                write!(f, "CRC mismatch in block {block_number}")
            }
            DecodeError::CrcLength { block_number } => {
                write!(f, "CRC value length mismatch in block {block_number}")
            }
            DecodeError::TooLarge(n) => write!(f, "item of {n} bytes exceeds decoder guard"),
            DecodeError::Validation(e) => write!(f, "invalid bundle: {e}"),
            DecodeError::InvalidEid(s) => write!(f, "invalid wire endpoint id: {s}"),
            DecodeError::TrailingBytes => write!(f, "trailing bytes after bundle"),
        }
    }
}

impl core::error::Error for DecodeError {}

impl From<ValidationError> for DecodeError {
    fn from(e: ValidationError) -> Self {
        DecodeError::Validation(e)
    }
}

impl From<cbor::CborError> for DecodeError {
    fn from(e: cbor::CborError) -> Self {
        match e {
            cbor::CborError::Truncated => DecodeError::Truncated,
            cbor::CborError::TooLarge(n) => DecodeError::TooLarge(n),
            cbor::CborError::Unexpected { expected, found } => {
                let mut s = String::from("expected ");
                s.push_str(expected);
                s.push_str(", found major type ");
                s.push((b'0' + (found >> 5)) as char);
                DecodeError::Structure(s)
            }
            cbor::CborError::IndefiniteString => {
                DecodeError::Structure(String::from("indefinite-length string"))
            }
            cbor::CborError::ReservedHead(_) => {
                DecodeError::Structure(String::from("reserved additional info"))
            }
            cbor::CborError::NestingTooDeep => {
                DecodeError::Structure(String::from("nesting too deep"))
            }
        }
    }
}
