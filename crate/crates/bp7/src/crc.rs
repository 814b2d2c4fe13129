//! CRC algorithms used by BP7 blocks: CRC-16/X-25 and CRC-32C (Castagnoli).
//!
//! CRCs are computed over a block's complete CBOR encoding with the CRC field
//! present and zero-filled, and carried big-endian in a byte string of 2 or 4
//! bytes.

use alloc::vec::Vec;
use core::fmt;

/// CRC type codes as they appear on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CrcType {
    #[default]
    None,
    Crc16,
    Crc32c,
}

impl CrcType {
    pub fn code(self) -> u64 {
        match self {
            CrcType::None => 0,
            CrcType::Crc16 => 1,
            CrcType::Crc32c => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<CrcType> {
        match code {
            0 => Some(CrcType::None),
            1 => Some(CrcType::Crc16),
            2 => Some(CrcType::Crc32c),
            _ => None,
        }
    }

    /// Width of the carried CRC value in bytes; 0 for `None`.
    pub fn width(self) -> usize {
        match self {
            CrcType::None => 0,
            CrcType::Crc16 => 2,
            CrcType::Crc32c => 4,
        }
    }
}

impl fmt::Display for CrcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrcType::None => write!(f, "none"),
            CrcType::Crc16 => write!(f, "crc16"),
            CrcType::Crc32c => write!(f, "crc32c"),
        }
    }
}

/// Requested a CRC computation with `CrcType::None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoCrcError;

impl fmt::Display for NoCrcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot compute a CRC of type none")
    }
}

impl core::error::Error for NoCrcError {}

// CRC-16/X-25: reflected polynomial 0x1021 -> 0x8408, init 0xFFFF, xorout 0xFFFF.
const fn crc16_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u16;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0x8408 } else { crc >> 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

// CRC-32C: reflected Castagnoli polynomial 0x1EDC6F41 -> 0x82F63B78.
const fn crc32c_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u32;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0x82F6_3B78 } else { crc >> 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static CRC16_TABLE: [u16; 256] = crc16_table();
static CRC32C_TABLE: [u32; 256] = crc32c_table();

pub fn crc16_x25(data: &[u8]) -> u16 {
    let mut crc = 0xFFFFu16;
    for &b in data {
        crc = (crc >> 8) ^ CRC16_TABLE[((crc ^ b as u16) & 0xFF) as usize];
    }
    crc ^ 0xFFFF
}

pub fn crc32_castagnoli(data: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in data {
        crc = (crc >> 8) ^ CRC32C_TABLE[((crc ^ b as u32) & 0xFF) as usize];
    }
    crc ^ 0xFFFF_FFFF
}

/// Compute the big-endian CRC value for `block_bytes`, which must be the
/// block's CBOR encoding with the CRC field zero-filled.
pub fn compute_crc(kind: CrcType, block_bytes: &[u8]) -> Result<Vec<u8>, NoCrcError> {
    match kind {
        CrcType::None => Err(NoCrcError),
        CrcType::Crc16 => Ok(crc16_x25(block_bytes).to_be_bytes().to_vec()),
        CrcType::Crc32c => Ok(crc32_castagnoli(block_bytes).to_be_bytes().to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x25_check_value() {
        assert_eq!(crc16_x25(b"123456789"), 0x906E);
    }

    #[test]
    fn x25_empty_input() {
        assert_eq!(crc16_x25(b""), 0x0000);
    }

    #[test]
    fn castagnoli_check_value() {
        assert_eq!(crc32_castagnoli(b"123456789"), 0xE306_9283);
    }

    #[test]
    fn none_is_a_contract_violation() {
        assert_eq!(compute_crc(CrcType::None, b"x"), Err(NoCrcError));
    }

    #[test]
    fn big_endian_widths() {
        assert_eq!(compute_crc(CrcType::Crc16, b"123456789").unwrap(), &[0x90, 0x6E]);
        assert_eq!(
            compute_crc(CrcType::Crc32c, b"123456789").unwrap(),
            &[0xE3, 0x06, 0x92, 0x83]
        );
    }
}
