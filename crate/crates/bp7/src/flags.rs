//! Bundle and block processing control flags.
//!
//! Both are open bitfields on the wire: unknown bits are preserved through
//! decode and re-encode.

use core::fmt;
use core::ops::{BitOr, BitOrAssign};

/// Bundle processing control flags (primary block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BundleFlags(u64);

impl BundleFlags {
    pub const IS_FRAGMENT: BundleFlags = BundleFlags(0x0000_0001);
    pub const ADMIN_RECORD: BundleFlags = BundleFlags(0x0000_0002);
    pub const MUST_NOT_FRAGMENT: BundleFlags = BundleFlags(0x0000_0004);
    pub const USER_ACK_REQUESTED: BundleFlags = BundleFlags(0x0000_0020);
    pub const STATUS_TIME_REQUESTED: BundleFlags = BundleFlags(0x0000_0040);
    pub const REPORT_RECEPTION: BundleFlags = BundleFlags(0x0000_4000);
    pub const REPORT_FORWARDING: BundleFlags = BundleFlags(0x0001_0000);
    pub const REPORT_DELIVERY: BundleFlags = BundleFlags(0x0002_0000);
    pub const REPORT_DELETION: BundleFlags = BundleFlags(0x0004_0000);

    pub const fn empty() -> BundleFlags {
        BundleFlags(0)
    }

    pub const fn from_bits(bits: u64) -> BundleFlags {
        BundleFlags(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn contains(self, other: BundleFlags) -> bool {
        self.0 & other.0 == other.0
    }

    #[must_use]
    pub const fn with(self, other: BundleFlags) -> BundleFlags {
        BundleFlags(self.0 | other.0)
    }

    #[must_use]
    pub const fn without(self, other: BundleFlags) -> BundleFlags {
        BundleFlags(self.0 & !other.0)
    }
}

impl BitOr for BundleFlags {
    type Output = BundleFlags;
    fn bitor(self, rhs: BundleFlags) -> BundleFlags {
        BundleFlags(self.0 | rhs.0)
    }
}

impl BitOrAssign for BundleFlags {
    fn bitor_assign(&mut self, rhs: BundleFlags) {
        self.0 |= rhs.0;
    }
}

impl fmt::Display for BundleFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Block processing control flags (canonical blocks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BlockFlags(u64);

impl BlockFlags {
    pub const REPLICATE_IN_FRAGMENTS: BlockFlags = BlockFlags(0x01);
    pub const REPORT_IF_UNPROCESSABLE: BlockFlags = BlockFlags(0x02);
    pub const DELETE_BUNDLE_IF_UNPROCESSABLE: BlockFlags = BlockFlags(0x04);
    pub const DISCARD_IF_UNPROCESSABLE: BlockFlags = BlockFlags(0x10);

    pub const fn empty() -> BlockFlags {
        BlockFlags(0)
    }

    pub const fn from_bits(bits: u64) -> BlockFlags {
        BlockFlags(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn contains(self, other: BlockFlags) -> bool {
        self.0 & other.0 == other.0
    }

    #[must_use]
    pub const fn with(self, other: BlockFlags) -> BlockFlags {
        BlockFlags(self.0 | other.0)
    }
}

impl BitOr for BlockFlags {
    type Output = BlockFlags;
    fn bitor(self, rhs: BlockFlags) -> BlockFlags {
        BlockFlags(self.0 | rhs.0)
    }
}

impl fmt::Display for BlockFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_arithmetic() {
        let f = BundleFlags::REPORT_DELIVERY | BundleFlags::REPORT_RECEPTION;
        assert!(f.contains(BundleFlags::REPORT_DELIVERY));
        assert!(!f.contains(BundleFlags::IS_FRAGMENT));
        assert_eq!(f.without(BundleFlags::REPORT_RECEPTION), BundleFlags::REPORT_DELIVERY);
        assert_eq!(f.bits(), 0x2_4000);
    }

    #[test]
    fn unknown_bits_survive() {
        let f = BundleFlags::from_bits(0x8000_0000);
        assert_eq!(f.bits(), 0x8000_0000);
    }
}
