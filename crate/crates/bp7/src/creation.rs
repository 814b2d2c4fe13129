//! Bundle construction with protocol defaults.

use alloc::vec::Vec;

use crate::bundle::Bundle;
use crate::canonical::CanonicalBlock;
use crate::crc::CrcType;
use crate::eid::EndpointId;
use crate::error::ValidationError;
use crate::flags::BundleFlags;
use crate::primary::PrimaryBlock;
use crate::time::CreationTimestamp;

/// Builds bundles the way applications expect them: CRC disabled, a delivery
/// report requested, report-to defaulting to the source, a hop-count block
/// with the configured limit, and the payload block last. A builder for a
/// clockless node (creation time zero) adds a bundle-age block of zero.
#[derive(Debug, Clone)]
pub struct BundleBuilder {
    destination: EndpointId,
    source: EndpointId,
    report_to: Option<EndpointId>,
    payload: Vec<u8>,
    lifetime_micros: u64,
    crc_type: CrcType,
    flags: BundleFlags,
    hop_limit: Option<u64>,
    creation: CreationTimestamp,
}

/// Default lifetime: one hour, in microseconds.
pub const DEFAULT_LIFETIME_MICROS: u64 = 3_600_000_000;

/// Default hop limit for freshly created bundles.
pub const DEFAULT_HOP_LIMIT: u64 = 64;

impl BundleBuilder {
    pub fn new(destination: EndpointId, source: EndpointId) -> BundleBuilder {
        BundleBuilder {
            destination,
            source,
            report_to: None,
            payload: Vec::new(),
            lifetime_micros: DEFAULT_LIFETIME_MICROS,
            crc_type: CrcType::None,
            flags: BundleFlags::REPORT_DELIVERY,
            hop_limit: Some(DEFAULT_HOP_LIMIT),
            creation: CreationTimestamp::default(),
        }
    }

    pub fn payload(mut self, payload: Vec<u8>) -> Self {
        self.payload = payload;
        self
    }

    pub fn lifetime_micros(mut self, lifetime: u64) -> Self {
        self.lifetime_micros = lifetime;
        self
    }

    pub fn crc_type(mut self, crc_type: CrcType) -> Self {
        self.crc_type = crc_type;
        self
    }

    /// Replace the flag set entirely (the default requests a delivery
    /// report).
    pub fn flags(mut self, flags: BundleFlags) -> Self {
        self.flags = flags;
        self
    }

    /// Add report-request or other flags on top of the defaults.
    pub fn add_flags(mut self, flags: BundleFlags) -> Self {
        self.flags |= flags;
        self
    }

    pub fn report_to(mut self, report_to: EndpointId) -> Self {
        self.report_to = Some(report_to);
        self
    }

    /// Hop limit for the hop-count block; `None` omits the block.
    pub fn hop_limit(mut self, limit: Option<u64>) -> Self {
        self.hop_limit = limit;
        self
    }

    /// Creation timestamp from the node clock. Leave at the default zero
    /// timestamp on clockless nodes; a bundle-age block is added then.
    pub fn creation(mut self, creation: CreationTimestamp) -> Self {
        self.creation = creation;
        self
    }

    pub fn build(self) -> Result<Bundle, ValidationError> {
        let report_to = self.report_to.unwrap_or_else(|| self.source.clone());
        let primary = PrimaryBlock::new(
            self.flags,
            self.crc_type,
            self.destination,
            self.source,
            report_to,
            self.creation,
            self.lifetime_micros,
            None,
        )?;
        let mut canonicals = Vec::new();
        let mut next_number = 2;
        if let Some(limit) = self.hop_limit {
            let mut block = CanonicalBlock::hop_count(limit, 0, next_number);
            block.crc_type = self.crc_type;
            canonicals.push(block);
            next_number += 1;
        }
        if self.creation.is_clockless() {
            let mut block = CanonicalBlock::bundle_age(0, next_number);
            block.crc_type = self.crc_type;
            canonicals.push(block);
        }
        let mut payload = CanonicalBlock::payload(self.payload);
        payload.crc_type = self.crc_type;
        canonicals.push(payload);
        let bundle = Bundle::new(primary, canonicals);
        bundle.validate()?;
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn defaults_follow_figure_shape() {
        let bundle = BundleBuilder::new(
            "dtn:sink/lux".parse().unwrap(),
            "dtn:b2".parse().unwrap(),
        )
        .payload(vec![0x0E, 0xC6])
        .lifetime_micros(3_600_000)
        .hop_limit(Some(64))
        .build()
        .unwrap();

        assert_eq!(bundle.primary.crc_type(), CrcType::None);
        assert!(bundle.primary.flags().contains(BundleFlags::REPORT_DELIVERY));
        assert_eq!(bundle.primary.report_to(), bundle.primary.source());
        assert_eq!(bundle.primary.lifetime_micros(), 3_600_000);
        // hop count block number 2 with the configured limit, payload number 1 last
        let (limit, count) = bundle.hop_count().unwrap();
        assert_eq!((limit, count), (64, 0));
        assert_eq!(bundle.canonicals.first().unwrap().number, 2);
        assert!(bundle.canonicals.last().unwrap().is_payload());
        assert_eq!(bundle.payload().unwrap(), &[0x0E, 0xC6]);
        // clockless default creation adds a zero age block
        assert_eq!(bundle.bundle_age_micros(), Some(0));
    }

    #[test]
    fn clocked_build_has_no_age_block() {
        let bundle = BundleBuilder::new(EndpointId::dtn("a").unwrap(), EndpointId::dtn("b").unwrap())
            .creation(CreationTimestamp::new(812_000_000, 4))
            .build()
            .unwrap();
        assert_eq!(bundle.bundle_age_micros(), None);
        assert_eq!(bundle.primary.creation().sequence, 4);
    }

    #[test]
    fn empty_payload_is_valid() {
        let bundle =
            BundleBuilder::new(EndpointId::dtn("a").unwrap(), EndpointId::Null).build().unwrap();
        assert_eq!(bundle.payload().unwrap(), &[] as &[u8]);
        bundle.validate().unwrap();
        let decoded = Bundle::decode(&bundle.encode().unwrap()).unwrap();
        assert_eq!(decoded, bundle);
    }

    #[test]
    fn zero_lifetime_expires_immediately() {
        let bundle = BundleBuilder::new(EndpointId::dtn("a").unwrap(), EndpointId::Null)
            .lifetime_micros(0)
            .creation(CreationTimestamp::new(812_000_000, 0))
            .build()
            .unwrap();
        let creation_unix = crate::time::dtn_time_to_unix_micros(812_000_000);
        assert!(bundle.is_expired(creation_unix, creation_unix + 1));
    }

    #[test]
    fn clockless_zero_lifetime_expires_immediately() {
        let bundle = BundleBuilder::new(EndpointId::dtn("a").unwrap(), EndpointId::Null)
            .lifetime_micros(0)
            .build()
            .unwrap();
        assert!(bundle.is_expired(1_000, 1_001));
    }
}
