//! Canonical blocks: the payload block and the extension blocks.
//!
//! Block data travels nested inside a CBOR byte string: the payload block's
//! content is the raw application bytes, a previous-node block wraps an
//! encoded EID, a bundle-age block wraps an unsigned count of microseconds,
//! and a hop-count block wraps a `[limit, count]` pair. Unknown block types
//! are preserved verbatim so they survive forwarding.

use alloc::vec::Vec;

use crate::cbor::{ArrayLen, Reader, Writer};
use crate::crc::{compute_crc, CrcType};
use crate::eid::EndpointId;
use crate::error::{DecodeError, ValidationError};
use crate::flags::BlockFlags;
use crate::primary::verify_crc;

pub const BLOCK_TYPE_PAYLOAD: u64 = 1;
pub const BLOCK_TYPE_PREVIOUS_NODE: u64 = 7;
pub const BLOCK_TYPE_BUNDLE_AGE: u64 = 8;
pub const BLOCK_TYPE_HOP_COUNT: u64 = 9;

/// Type-specific block content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockData {
    /// Raw application bytes.
    Payload(Vec<u8>),
    /// Node EID of the previous hop.
    PreviousNode(EndpointId),
    /// Accumulated age in microseconds.
    BundleAge(u64),
    /// Hop limit and hops taken so far.
    HopCount { limit: u64, count: u64 },
    /// Content of an unrecognized block type, kept verbatim.
    Unknown(Vec<u8>),
}

impl BlockData {
    /// The block type code this data variant implies; `None` for unknown
    /// content, which can ride under any unrecognized code.
    fn implied_type(&self) -> Option<u64> {
        match self {
            BlockData::Payload(_) => Some(BLOCK_TYPE_PAYLOAD),
            BlockData::PreviousNode(_) => Some(BLOCK_TYPE_PREVIOUS_NODE),
            BlockData::BundleAge(_) => Some(BLOCK_TYPE_BUNDLE_AGE),
            BlockData::HopCount { .. } => Some(BLOCK_TYPE_HOP_COUNT),
            BlockData::Unknown(_) => None,
        }
    }

    fn encode_content(&self, w: &mut Writer) {
        match self {
            BlockData::Payload(bytes) => w.raw(bytes),
            BlockData::PreviousNode(eid) => eid.encode(w),
            BlockData::BundleAge(micros) => w.uint(*micros),
            BlockData::HopCount { limit, count } => {
                w.array(2);
                w.uint(*limit);
                w.uint(*count);
            }
            BlockData::Unknown(bytes) => w.raw(bytes),
        }
    }
}

/// A non-primary block: type, number, flags, CRC type, and data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalBlock {
    pub block_type: u64,
    pub number: u64,
    pub flags: BlockFlags,
    pub crc_type: CrcType,
    pub data: BlockData,
}

impl CanonicalBlock {
    pub fn payload(bytes: Vec<u8>) -> CanonicalBlock {
        CanonicalBlock {
            block_type: BLOCK_TYPE_PAYLOAD,
            number: 1,
            flags: BlockFlags::empty(),
            crc_type: CrcType::None,
            data: BlockData::Payload(bytes),
        }
    }

    pub fn previous_node(eid: EndpointId, number: u64) -> CanonicalBlock {
        CanonicalBlock {
            block_type: BLOCK_TYPE_PREVIOUS_NODE,
            number,
            flags: BlockFlags::empty(),
            crc_type: CrcType::None,
            data: BlockData::PreviousNode(eid),
        }
    }

    pub fn bundle_age(micros: u64, number: u64) -> CanonicalBlock {
        CanonicalBlock {
            block_type: BLOCK_TYPE_BUNDLE_AGE,
            number,
            flags: BlockFlags::empty(),
            crc_type: CrcType::None,
            data: BlockData::BundleAge(micros),
        }
    }

    pub fn hop_count(limit: u64, count: u64, number: u64) -> CanonicalBlock {
        CanonicalBlock {
            block_type: BLOCK_TYPE_HOP_COUNT,
            number,
            flags: BlockFlags::empty(),
            crc_type: CrcType::None,
            data: BlockData::HopCount { limit, count },
        }
    }

    pub fn is_payload(&self) -> bool {
        self.block_type == BLOCK_TYPE_PAYLOAD
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        match self.data.implied_type() {
            Some(implied) if implied != self.block_type => {
                return Err(ValidationError::BlockTypeMismatch(self.number));
            }
            // opaque data must not claim a type code we would interpret
            None if matches!(
                self.block_type,
                BLOCK_TYPE_PAYLOAD
                    | BLOCK_TYPE_PREVIOUS_NODE
                    | BLOCK_TYPE_BUNDLE_AGE
                    | BLOCK_TYPE_HOP_COUNT
            ) =>
            {
                return Err(ValidationError::BlockTypeMismatch(self.number));
            }
            _ => {}
        }
        if let BlockData::HopCount { limit, .. } = self.data {
            if limit == 0 {
                return Err(ValidationError::HopLimitZero);
            }
        }
        if self.is_payload() && self.number != 1 {
            return Err(ValidationError::PayloadNumberNotOne);
        }
        Ok(())
    }

    pub fn encode(&self, w: &mut Writer) {
        let start = w.len();
        let count = if self.crc_type == CrcType::None { 5 } else { 6 };
        w.array(count);
        w.uint(self.block_type);
        w.uint(self.number);
        w.uint(self.flags.bits());
        w.uint(self.crc_type.code());
        let mut content = Writer::new();
        self.data.encode_content(&mut content);
        w.bytes(content.as_bytes());
        if self.crc_type != CrcType::None {
            let width = self.crc_type.width();
            w.bytes(&[0u8; 4][..width]);
            let crc = compute_crc(self.crc_type, &w.as_bytes()[start..]).unwrap();
            let end = w.len();
            w.patch(end - width, &crc);
        }
    }

    pub fn decode(r: &mut Reader<'_>, full: &[u8]) -> Result<CanonicalBlock, DecodeError> {
        let start = r.pos();
        let count = match r.array()? {
            ArrayLen::Definite(n) => n,
            ArrayLen::Indefinite => {
                return Err(DecodeError::Structure(alloc::format!(
                    "canonical block must be a definite-length array"
                )))
            }
        };
        if !(5..=6).contains(&count) {
            return Err(DecodeError::Structure(alloc::format!(
                "canonical block has {count} elements"
            )));
        }
        let block_type = r.uint()?;
        let number = r.uint()?;
        let flags = BlockFlags::from_bits(r.uint()?);
        let crc_type = CrcType::from_code(r.uint()?)
            .ok_or_else(|| DecodeError::Structure(alloc::format!("unknown CRC type code")))?;
        if (crc_type == CrcType::None) != (count == 5) {
            return Err(DecodeError::Structure(alloc::format!(
                "canonical block length {count} inconsistent with CRC type"
            )));
        }
        let content = r.bytes()?;
        if crc_type != CrcType::None {
            let crc_value = r.bytes()?;
            verify_crc(crc_type, crc_value, &full[start..r.pos()], number)?;
        }

        let data = match block_type {
            BLOCK_TYPE_PAYLOAD => BlockData::Payload(content.to_vec()),
            BLOCK_TYPE_PREVIOUS_NODE => {
                let mut inner = Reader::new(content);
                let eid = EndpointId::decode(&mut inner)?;
                if !inner.is_at_end() {
                    return Err(DecodeError::Structure(alloc::format!(
                        "trailing bytes in previous-node block"
                    )));
                }
                BlockData::PreviousNode(eid)
            }
            BLOCK_TYPE_BUNDLE_AGE => {
                let mut inner = Reader::new(content);
                let micros = inner.uint()?;
                if !inner.is_at_end() {
                    return Err(DecodeError::Structure(alloc::format!(
                        "trailing bytes in bundle-age block"
                    )));
                }
                BlockData::BundleAge(micros)
            }
            BLOCK_TYPE_HOP_COUNT => {
                let mut inner = Reader::new(content);
                match inner.array()? {
                    ArrayLen::Definite(2) => {}
                    other => {
                        return Err(DecodeError::Structure(alloc::format!(
                            "hop count data must be a 2-element array, got {other:?}"
                        )))
                    }
                }
                let limit = inner.uint()?;
                let count = inner.uint()?;
                if !inner.is_at_end() {
                    return Err(DecodeError::Structure(alloc::format!(
                        "trailing bytes in hop-count block"
                    )));
                }
                BlockData::HopCount { limit, count }
            }
            _ => BlockData::Unknown(content.to_vec()),
        };

        let block = CanonicalBlock { block_type, number, flags, crc_type, data };
        block.validate()?;
        Ok(block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn payload_header_arithmetic() {
        // 3-byte payload encodes with byte-string head 0x43
        let block = CanonicalBlock::payload(vec![1, 2, 3]);
        let mut w = Writer::new();
        block.encode(&mut w);
        assert_eq!(w.as_bytes(), &[0x85, 0x01, 0x01, 0x00, 0x00, 0x43, 1, 2, 3][..]);
    }

    #[test]
    fn roundtrip_every_known_type() {
        let blocks = [
            CanonicalBlock::payload(vec![0x0E, 0xC6]),
            CanonicalBlock::previous_node("dtn:b1".parse().unwrap(), 4),
            CanonicalBlock::bundle_age(12_345, 3),
            CanonicalBlock::hop_count(64, 42, 2),
            CanonicalBlock {
                block_type: 192,
                number: 5,
                flags: BlockFlags::REPLICATE_IN_FRAGMENTS,
                crc_type: CrcType::Crc16,
                data: BlockData::Unknown(vec![0xDE, 0xAD]),
            },
        ];
        for block in blocks {
            let mut w = Writer::new();
            block.encode(&mut w);
            let buf = w.into_bytes();
            let mut r = Reader::new(&buf);
            assert_eq!(CanonicalBlock::decode(&mut r, &buf).unwrap(), block);
            assert!(r.is_at_end());
        }
    }

    #[test]
    fn hop_limit_zero_rejected() {
        let block = CanonicalBlock::hop_count(0, 0, 2);
        assert_eq!(block.validate(), Err(ValidationError::HopLimitZero));
    }

    #[test]
    fn crc16_block_detects_flip() {
        let mut block = CanonicalBlock::payload(vec![9, 9, 9]);
        block.crc_type = CrcType::Crc16;
        let mut w = Writer::new();
        block.encode(&mut w);
        let mut buf = w.into_bytes();
        let idx = buf.len() - 4; // a payload byte
        buf[idx] ^= 0x40;
        let mut r = Reader::new(&buf);
        assert!(matches!(
            CanonicalBlock::decode(&mut r, &buf),
            Err(DecodeError::CrcMismatch { .. })
        ));
    }
}
