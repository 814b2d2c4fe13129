//! DTN time and creation timestamps.
//!
//! DTN time counts seconds since 2000-01-01T00:00:00Z. A node without a
//! real-time clock emits `dtn_time = 0` and relies on a bundle age block;
//! lifetimes and ages are expressed in microseconds.

use crate::cbor::{ArrayLen, Reader, Writer};
use crate::error::DecodeError;

/// Offset of the DTN epoch from the Unix epoch, in seconds.
pub const DTN_EPOCH_UNIX_SECS: u64 = 946_684_800;

/// Convert Unix seconds to DTN time, saturating at 0 for pre-epoch clocks.
pub fn dtn_time_from_unix_secs(unix_secs: u64) -> u64 {
    unix_secs.saturating_sub(DTN_EPOCH_UNIX_SECS)
}

/// Convert DTN time (seconds) to Unix microseconds.
pub fn dtn_time_to_unix_micros(dtn_time_secs: u64) -> u64 {
    (dtn_time_secs + DTN_EPOCH_UNIX_SECS) * 1_000_000
}

/// Creation timestamp: DTN time plus a sequence number that disambiguates
/// bundles created within the same second. A node never reuses a
/// `(dtn_time, sequence)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CreationTimestamp {
    pub dtn_time: u64,
    pub sequence: u64,
}

impl CreationTimestamp {
    pub fn new(dtn_time: u64, sequence: u64) -> CreationTimestamp {
        CreationTimestamp { dtn_time, sequence }
    }

    /// True when the creating node had no real-time clock.
    pub fn is_clockless(&self) -> bool {
        self.dtn_time == 0
    }

    pub fn encode(&self, w: &mut Writer) {
        w.array(2);
        w.uint(self.dtn_time);
        w.uint(self.sequence);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<CreationTimestamp, DecodeError> {
        match r.array()? {
            ArrayLen::Definite(2) => {}
            other => {
                return Err(DecodeError::Structure(alloc::format!(
                    "creation timestamp must be a 2-element array, got {other:?}"
                )))
            }
        }
        Ok(CreationTimestamp { dtn_time: r.uint()?, sequence: r.uint()? })
    }
}

impl core::fmt::Display for CreationTimestamp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({}, {})", self.dtn_time, self.sequence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_offset() {
        // 2000-01-01T00:00:00Z in Unix seconds
        assert_eq!(dtn_time_from_unix_secs(DTN_EPOCH_UNIX_SECS), 0);
        assert_eq!(dtn_time_from_unix_secs(DTN_EPOCH_UNIX_SECS + 5), 5);
        assert_eq!(dtn_time_from_unix_secs(10), 0);
        assert_eq!(dtn_time_to_unix_micros(1), (DTN_EPOCH_UNIX_SECS + 1) * 1_000_000);
    }

    #[test]
    fn wire_roundtrip() {
        let ts = CreationTimestamp::new(0, 23);
        let mut w = Writer::new();
        ts.encode(&mut w);
        assert_eq!(w.as_bytes(), &[0x82, 0x00, 0x17][..]);
        let buf = w.into_bytes();
        assert_eq!(CreationTimestamp::decode(&mut Reader::new(&buf)).unwrap(), ts);
    }
}
