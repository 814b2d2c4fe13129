//! The immutable primary block.

use crate::cbor::{ArrayLen, Reader, Writer};
use crate::crc::{compute_crc, CrcType};
use crate::eid::EndpointId;
use crate::error::{DecodeError, ValidationError};
use crate::flags::BundleFlags;
use crate::time::CreationTimestamp;

pub const BP_VERSION: u64 = 7;

/// Fragment placement fields, present only when the is-fragment flag is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FragmentInfo {
    pub offset: u64,
    pub total_adu_length: u64,
}

/// The bundle's leading block: routing metadata fixed at creation.
///
/// Primary blocks are immutable once built or decoded — there are no
/// mutators, and re-encoding an unchanged block reproduces its bytes exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimaryBlock {
    flags: BundleFlags,
    crc_type: CrcType,
    destination: EndpointId,
    source: EndpointId,
    report_to: EndpointId,
    creation: CreationTimestamp,
    lifetime_micros: u64,
    fragment: Option<FragmentInfo>,
}

impl PrimaryBlock {
    pub fn new(
        flags: BundleFlags,
        crc_type: CrcType,
        destination: EndpointId,
        source: EndpointId,
        report_to: EndpointId,
        creation: CreationTimestamp,
        lifetime_micros: u64,
        fragment: Option<FragmentInfo>,
    ) -> Result<PrimaryBlock, ValidationError> {
        let block = PrimaryBlock {
            flags,
            crc_type,
            destination,
            source,
            report_to,
            creation,
            lifetime_micros,
            fragment,
        };
        block.check_fragment_coherence()?;
        Ok(block)
    }

    fn check_fragment_coherence(&self) -> Result<(), ValidationError> {
        if self.flags.contains(BundleFlags::IS_FRAGMENT) != self.fragment.is_some() {
            return Err(ValidationError::FragmentMismatch);
        }
        Ok(())
    }

    pub fn version(&self) -> u64 {
        BP_VERSION
    }

    pub fn flags(&self) -> BundleFlags {
        self.flags
    }

    pub fn crc_type(&self) -> CrcType {
        self.crc_type
    }

    pub fn destination(&self) -> &EndpointId {
        &self.destination
    }

    pub fn source(&self) -> &EndpointId {
        &self.source
    }

    pub fn report_to(&self) -> &EndpointId {
        &self.report_to
    }

    pub fn creation(&self) -> CreationTimestamp {
        self.creation
    }

    pub fn lifetime_micros(&self) -> u64 {
        self.lifetime_micros
    }

    pub fn fragment(&self) -> Option<FragmentInfo> {
        self.fragment
    }

    pub fn is_fragment(&self) -> bool {
        self.fragment.is_some()
    }

    /// Encode into `w`, recomputing the CRC field when one is requested.
    pub fn encode(&self, w: &mut Writer) {
        let start = w.len();
        let mut count = 8;
        if self.fragment.is_some() {
            count += 2;
        }
        if self.crc_type != CrcType::None {
            count += 1;
        }
        w.array(count);
        w.uint(BP_VERSION);
        w.uint(self.flags.bits());
        w.uint(self.crc_type.code());
        self.destination.encode(w);
        self.source.encode(w);
        self.report_to.encode(w);
        self.creation.encode(w);
        w.uint(self.lifetime_micros);
        if let Some(frag) = self.fragment {
            w.uint(frag.offset);
            w.uint(frag.total_adu_length);
        }
        if self.crc_type != CrcType::None {
            let width = self.crc_type.width();
            w.bytes(&[0u8; 4][..width]);
            let crc = compute_crc(self.crc_type, &w.as_bytes()[start..]).unwrap();
            let end = w.len();
            w.patch(end - width, &crc);
        }
    }

    /// Decode from `r`, verifying the CRC over the block's byte span.
    ///
    /// `full` must be the buffer `r` reads from, so the span can be located.
    pub fn decode(r: &mut Reader<'_>, full: &[u8]) -> Result<PrimaryBlock, DecodeError> {
        let start = r.pos();
        let count = match r.array()? {
            ArrayLen::Definite(n) => n,
            ArrayLen::Indefinite => {
                return Err(DecodeError::Structure(alloc::format!(
                    "primary block must be a definite-length array"
                )))
            }
        };
        if !(8..=11).contains(&count) {
            return Err(DecodeError::Structure(alloc::format!(
                "primary block has {count} elements"
            )));
        }
        let version = r.uint()?;
        if version != BP_VERSION {
            return Err(DecodeError::VersionMismatch(version));
        }
        let flags = BundleFlags::from_bits(r.uint()?);
        let crc_type = CrcType::from_code(r.uint()?)
            .ok_or_else(|| DecodeError::Structure(alloc::format!("unknown CRC type code")))?;
        let destination = EndpointId::decode(r)?;
        let source = EndpointId::decode(r)?;
        let report_to = EndpointId::decode(r)?;
        let creation = CreationTimestamp::decode(r)?;
        let lifetime_micros = r.uint()?;

        let is_fragment = flags.contains(BundleFlags::IS_FRAGMENT);
        let expected =
            8 + if is_fragment { 2 } else { 0 } + if crc_type != CrcType::None { 1 } else { 0 };
        if count != expected {
            return Err(DecodeError::Structure(alloc::format!(
                "primary block has {count} elements, flags imply {expected}"
            )));
        }
        let fragment = if is_fragment {
            Some(FragmentInfo { offset: r.uint()?, total_adu_length: r.uint()? })
        } else {
            None
        };
        if crc_type != CrcType::None {
            let crc_value = r.bytes()?;
            verify_crc(crc_type, crc_value, &full[start..r.pos()], 0)?;
        }

        PrimaryBlock::new(
            flags,
            crc_type,
            destination,
            source,
            report_to,
            creation,
            lifetime_micros,
            fragment,
        )
        .map_err(DecodeError::from)
    }
}

/// Check a parsed CRC value against the block span it covers.
///
/// The span must end with the CRC byte string; its content bytes are
/// zero-filled before recomputation, mirroring the encoder.
pub(crate) fn verify_crc(
    crc_type: CrcType,
    crc_value: &[u8],
    span: &[u8],
    block_number: u64,
) -> Result<(), DecodeError> {
    let width = crc_type.width();
    if crc_value.len() != width {
        return Err(DecodeError::CrcLength { block_number });
    }
    let mut scratch = alloc::vec::Vec::from(span);
    let len = scratch.len();
    scratch[len - width..].fill(0);
    let computed = compute_crc(crc_type, &scratch).unwrap();
    if computed != crc_value {
        return Err(DecodeError::CrcMismatch { block_number });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(crc_type: CrcType) -> PrimaryBlock {
        PrimaryBlock::new(
            BundleFlags::REPORT_RECEPTION,
            crc_type,
            "dtn:sink/lux".parse().unwrap(),
            "dtn:b2".parse().unwrap(),
            "dtn:b2".parse().unwrap(),
            CreationTimestamp::new(0, 23),
            3_600_000,
            None,
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_all_crc_types() {
        for crc_type in [CrcType::None, CrcType::Crc16, CrcType::Crc32c] {
            let block = sample(crc_type);
            let mut w = Writer::new();
            block.encode(&mut w);
            let buf = w.into_bytes();
            let mut r = Reader::new(&buf);
            let decoded = PrimaryBlock::decode(&mut r, &buf).unwrap();
            assert_eq!(decoded, block);
            assert!(r.is_at_end());
        }
    }

    #[test]
    fn crc_detects_bit_flip() {
        let block = sample(CrcType::Crc32c);
        let mut w = Writer::new();
        block.encode(&mut w);
        let mut buf = w.into_bytes();
        buf[10] ^= 0x01;
        let mut r = Reader::new(&buf);
        let err = PrimaryBlock::decode(&mut r, &buf).unwrap_err();
        assert!(matches!(
            err,
            DecodeError::CrcMismatch { block_number: 0 } | DecodeError::Structure(_)
                | DecodeError::InvalidEid(_)
        ));
    }

    #[test]
    fn rejects_other_versions() {
        // hand-encode a version-6 primary block prefix
        let mut w = Writer::new();
        w.array(8);
        w.uint(6);
        for _ in 0..7 {
            w.uint(0);
        }
        let buf = w.into_bytes();
        let mut r = Reader::new(&buf);
        assert_eq!(
            PrimaryBlock::decode(&mut r, &buf).unwrap_err(),
            DecodeError::VersionMismatch(6)
        );
    }

    #[test]
    fn fragment_flag_must_match_fields() {
        let err = PrimaryBlock::new(
            BundleFlags::IS_FRAGMENT,
            CrcType::None,
            EndpointId::Null,
            EndpointId::Null,
            EndpointId::Null,
            CreationTimestamp::default(),
            0,
            None,
        )
        .unwrap_err();
        assert_eq!(err, ValidationError::FragmentMismatch);
    }
}
