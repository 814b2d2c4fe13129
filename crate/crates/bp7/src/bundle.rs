//! The bundle: one primary block plus ordered canonical blocks, and its wire
//! codec.

use alloc::vec::Vec;

use crate::canonical::{
    BlockData, CanonicalBlock, BLOCK_TYPE_BUNDLE_AGE, BLOCK_TYPE_HOP_COUNT,
    BLOCK_TYPE_PREVIOUS_NODE,
};
use crate::cbor::{ArrayLen, Reader, Writer};
use crate::eid::EndpointId;
use crate::error::{DecodeError, EncodeError, ValidationError};
use crate::id::BundleId;
use crate::primary::PrimaryBlock;
use crate::time::dtn_time_to_unix_micros;
use crate::MAX_BUNDLE_SIZE;

/// A Bundle Protocol 7 protocol data unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub primary: PrimaryBlock,
    pub canonicals: Vec<CanonicalBlock>,
}

impl Bundle {
    pub fn new(primary: PrimaryBlock, canonicals: Vec<CanonicalBlock>) -> Bundle {
        Bundle { primary, canonicals }
    }

    /// The identity tuple extracted from the primary block.
    pub fn id(&self) -> BundleId {
        BundleId {
            source: self.primary.source().clone(),
            creation: self.primary.creation(),
            fragment_offset: self.primary.fragment().map(|f| f.offset),
        }
    }

    /// Structural validation of all bundle invariants.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.canonicals.is_empty() {
            return Err(ValidationError::NoBlocks);
        }
        let payload_count = self.canonicals.iter().filter(|b| b.is_payload()).count();
        match payload_count {
            0 => return Err(ValidationError::MissingPayload),
            1 => {}
            _ => return Err(ValidationError::MultiplePayloads),
        }
        if !self.canonicals.last().unwrap().is_payload() {
            return Err(ValidationError::PayloadNotLast);
        }
        for (i, block) in self.canonicals.iter().enumerate() {
            block.validate()?;
            for other in &self.canonicals[i + 1..] {
                if other.number == block.number {
                    return Err(ValidationError::DuplicateBlockNumber(block.number));
                }
            }
        }
        Ok(())
    }

    /// Encode to the deterministic wire form: an indefinite-length CBOR array
    /// of blocks. CRC fields are recomputed on the way out. Nothing is
    /// emitted if the bundle is invalid.
    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        self.validate()?;
        let mut w = Writer::with_capacity(self.payload().map_or(64, |p| p.len() + 128));
        w.begin_array();
        self.primary.encode(&mut w);
        for block in &self.canonicals {
            block.encode(&mut w);
        }
        w.break_stop();
        Ok(w.into_bytes())
    }

    /// Decode and fully validate a bundle: structure, version, CRCs, and
    /// protocol invariants. Accepts definite and indefinite outer arrays.
    pub fn decode(bytes: &[u8]) -> Result<Bundle, DecodeError> {
        if bytes.len() > MAX_BUNDLE_SIZE {
            return Err(DecodeError::TooLarge(bytes.len() as u64));
        }
        let mut r = Reader::new(bytes);
        let outer = r.array()?;
        let primary = PrimaryBlock::decode(&mut r, bytes)?;
        let mut canonicals = Vec::new();
        match outer {
            ArrayLen::Definite(n) => {
                if n < 2 {
                    return Err(DecodeError::Validation(ValidationError::NoBlocks));
                }
                for _ in 1..n {
                    canonicals.push(CanonicalBlock::decode(&mut r, bytes)?);
                }
            }
            ArrayLen::Indefinite => loop {
                if r.break_if().map_err(DecodeError::from)? {
                    break;
                }
                canonicals.push(CanonicalBlock::decode(&mut r, bytes)?);
            },
        }
        if !r.is_at_end() {
            return Err(DecodeError::TrailingBytes);
        }
        let bundle = Bundle { primary, canonicals };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn payload(&self) -> Option<&[u8]> {
        self.canonicals.iter().rev().find_map(|b| match &b.data {
            BlockData::Payload(bytes) => Some(bytes.as_slice()),
            _ => None,
        })
    }

    pub fn is_admin_record(&self) -> bool {
        self.primary.flags().contains(crate::flags::BundleFlags::ADMIN_RECORD)
    }

    pub fn hop_count(&self) -> Option<(u64, u64)> {
        self.canonicals.iter().find_map(|b| match b.data {
            BlockData::HopCount { limit, count } => Some((limit, count)),
            _ => None,
        })
    }

    pub fn previous_node(&self) -> Option<&EndpointId> {
        self.canonicals.iter().find_map(|b| match &b.data {
            BlockData::PreviousNode(eid) => Some(eid),
            _ => None,
        })
    }

    pub fn bundle_age_micros(&self) -> Option<u64> {
        self.canonicals.iter().find_map(|b| match b.data {
            BlockData::BundleAge(micros) => Some(micros),
            _ => None,
        })
    }

    /// Smallest unused block number (never 0 or 1, which the payload owns).
    pub fn next_block_number(&self) -> u64 {
        let mut n = 2;
        while self.canonicals.iter().any(|b| b.number == n) {
            n += 1;
        }
        n
    }

    fn upsert_block(&mut self, block_type: u64, data: BlockData) {
        if let Some(existing) =
            self.canonicals.iter_mut().find(|b| b.block_type == block_type)
        {
            existing.data = data;
            return;
        }
        let number = self.next_block_number();
        let block = CanonicalBlock {
            block_type,
            number,
            flags: crate::flags::BlockFlags::empty(),
            crc_type: crate::crc::CrcType::None,
            data,
        };
        // extension blocks go in front of the payload, which stays last
        let at = self.canonicals.len().saturating_sub(1);
        self.canonicals.insert(at, block);
    }

    /// Set or replace the hop-count block, keeping its block number.
    pub fn set_hop_count(&mut self, limit: u64, count: u64) {
        self.upsert_block(BLOCK_TYPE_HOP_COUNT, BlockData::HopCount { limit, count });
    }

    /// Set or replace the previous-node block, keeping its block number.
    pub fn set_previous_node(&mut self, eid: EndpointId) {
        self.upsert_block(BLOCK_TYPE_PREVIOUS_NODE, BlockData::PreviousNode(eid));
    }

    /// Set or replace the bundle-age block, keeping its block number.
    pub fn set_bundle_age(&mut self, micros: u64) {
        self.upsert_block(BLOCK_TYPE_BUNDLE_AGE, BlockData::BundleAge(micros));
    }

    /// Absolute expiry instant in Unix microseconds.
    ///
    /// With a real creation timestamp this is creation + lifetime. For
    /// clockless sources (`dtn_time = 0`) it is the receipt instant plus the
    /// lifetime remaining after the carried bundle age.
    pub fn expiry_unix_micros(&self, receipt_unix_micros: u64) -> u64 {
        let lifetime = self.primary.lifetime_micros();
        let creation = self.primary.creation();
        if creation.is_clockless() {
            let age = self.bundle_age_micros().unwrap_or(0);
            receipt_unix_micros.saturating_add(lifetime.saturating_sub(age))
        } else {
            dtn_time_to_unix_micros(creation.dtn_time).saturating_add(lifetime)
        }
    }

    /// Whether the bundle is expired at `now` given when it was received.
    pub fn is_expired(&self, receipt_unix_micros: u64, now_unix_micros: u64) -> bool {
        // a clockless bundle whose age already exceeds its lifetime is dead on arrival
        if self.primary.creation().is_clockless() {
            if self.bundle_age_micros().unwrap_or(0) >= self.primary.lifetime_micros() {
                return true;
            }
        }
        now_unix_micros >= self.expiry_unix_micros(receipt_unix_micros)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crc::CrcType;
    use crate::flags::BundleFlags;
    use crate::time::CreationTimestamp;
    use alloc::vec;

    fn primary() -> PrimaryBlock {
        PrimaryBlock::new(
            BundleFlags::REPORT_RECEPTION,
            CrcType::None,
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
    fn duplicate_block_numbers_block_encoding() {
        let bundle = Bundle::new(
            primary(),
            vec![CanonicalBlock::hop_count(64, 0, 2), CanonicalBlock::hop_count(64, 0, 2), {
                CanonicalBlock::payload(vec![1])
            }],
        );
        assert_eq!(
            bundle.encode().unwrap_err(),
            EncodeError::Validation(ValidationError::DuplicateBlockNumber(2))
        );
    }

    #[test]
    fn payload_must_be_last() {
        let bundle = Bundle::new(
            primary(),
            vec![CanonicalBlock::payload(vec![1]), CanonicalBlock::hop_count(64, 0, 2)],
        );
        assert_eq!(bundle.validate(), Err(ValidationError::PayloadNotLast));
    }

    #[test]
    fn missing_payload_detected() {
        let bundle = Bundle::new(primary(), vec![CanonicalBlock::hop_count(64, 0, 2)]);
        assert_eq!(bundle.validate(), Err(ValidationError::MissingPayload));
    }

    #[test]
    fn upsert_keeps_payload_last_and_numbers_unique() {
        let mut bundle = Bundle::new(primary(), vec![CanonicalBlock::payload(vec![1, 2])]);
        bundle.set_hop_count(64, 0);
        bundle.set_previous_node("dtn:b1".parse().unwrap());
        bundle.set_hop_count(64, 1);
        assert_eq!(bundle.hop_count(), Some((64, 1)));
        assert!(bundle.canonicals.last().unwrap().is_payload());
        bundle.validate().unwrap();
        assert_eq!(bundle.canonicals.len(), 3);
    }

    #[test]
    fn id_stable_under_codec() {
        let bundle = Bundle::new(
            primary(),
            vec![CanonicalBlock::hop_count(64, 42, 2), CanonicalBlock::payload(vec![0x0E, 0xC6])],
        );
        let decoded = Bundle::decode(&bundle.encode().unwrap()).unwrap();
        assert_eq!(bundle.id(), decoded.id());
        assert_eq!(alloc::format!("{}", bundle.id()), "dtn:b2-0-23");
    }

    #[test]
    fn definite_outer_array_accepted() {
        let bundle = Bundle::new(primary(), vec![CanonicalBlock::payload(vec![7])]);
        let indef = bundle.encode().unwrap();
        // rewrite as definite 2-element array
        let mut definite = vec![0x82];
        definite.extend_from_slice(&indef[1..indef.len() - 1]);
        assert_eq!(Bundle::decode(&definite).unwrap(), bundle);
    }

    #[test]
    fn expiry_with_real_clock() {
        let bundle = Bundle::new(primary(), vec![CanonicalBlock::payload(vec![])]);
        // creation dtn_time 0 is clockless; rebuild with a clocked timestamp
        let clocked = PrimaryBlock::new(
            BundleFlags::empty(),
            CrcType::None,
            EndpointId::Null,
            EndpointId::Null,
            EndpointId::Null,
            CreationTimestamp::new(100, 0),
            1_000_000,
            None,
        )
        .unwrap();
        let bundle = Bundle::new(clocked, bundle.canonicals);
        let expiry = bundle.expiry_unix_micros(0);
        assert_eq!(expiry, dtn_time_to_unix_micros(100) + 1_000_000);
        assert!(!bundle.is_expired(0, expiry - 1));
        assert!(bundle.is_expired(0, expiry));
    }

    #[test]
    fn expiry_clockless_uses_age() {
        let mut bundle = Bundle::new(primary(), vec![CanonicalBlock::payload(vec![])]);
        bundle.set_bundle_age(3_000_000);
        // primary lifetime is 3_600_000 us, so 600_000 us remain after receipt
        let receipt = 50_000_000;
        assert_eq!(bundle.expiry_unix_micros(receipt), receipt + 600_000);
        assert!(bundle.is_expired(receipt, receipt + 600_000));
        assert!(!bundle.is_expired(receipt, receipt + 599_999));
    }
}
