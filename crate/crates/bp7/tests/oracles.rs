//! Independent second routes for the CRC algorithms and the ipn grammar.
//!
//! The crate's CRCs are table-driven; the oracle here shifts bit by bit, so
//! the two share nothing but the polynomial constants. The ipn oracle is a
//! naive tokenizer that knows nothing of the EID parser.

use bp7::crc::{crc16_x25, crc32_castagnoli};
use bp7::EndpointId;
use proptest::prelude::*;

fn crc16_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= byte as u16;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0x8408 } else { crc >> 1 };
        }
    }
    crc ^ 0xFFFF
}

fn crc32c_bitwise(data: &[u8]) -> u32 {
    let mut crc: u32 = 0xFFFF_FFFF;
    for &byte in data {
        crc ^= byte as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0x82F6_3B78 } else { crc >> 1 };
        }
    }
    crc ^ 0xFFFF_FFFF
}

/// Tokenize `ipn:<node>.<service>` by hand: digits, one dot, digits.
fn ipn_oracle(text: &str) -> Option<(u64, u64)> {
    let rest = text.strip_prefix("ipn:")?;
    let mut parts = rest.split('.');
    let node = parts.next()?;
    let service = parts.next()?;
    if parts.next().is_some() || node.is_empty() || service.is_empty() {
        return None;
    }
    if !node.bytes().all(|b| b.is_ascii_digit()) || !service.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((node.parse().ok()?, service.parse().ok()?))
}

#[test]
fn crc_check_values() {
    assert_eq!(crc16_x25(b"123456789"), 0x906E);
    assert_eq!(crc16_bitwise(b"123456789"), 0x906E);
    assert_eq!(crc16_x25(b""), 0x0000);
    assert_eq!(crc32_castagnoli(b"123456789"), 0xE306_9283);
    assert_eq!(crc32c_bitwise(b"123456789"), 0xE306_9283);
}

#[test]
fn ipn_examples_against_oracle() {
    assert_eq!(ipn_oracle("ipn:1.2"), Some((1, 2)));
    assert_eq!("ipn:1.2".parse::<EndpointId>().unwrap(), EndpointId::ipn(1, 2));
    for bad in ["ipn:1", "ipn:1.2.3", "ipn:.2", "ipn:1.", "ipn:a.2", "ipn:1.+2"] {
        assert_eq!(ipn_oracle(bad), None);
        assert!(bad.parse::<EndpointId>().is_err(), "{bad} should not parse");
    }
}

proptest! {
    #[test]
    fn table_and_bitwise_routes_agree(data in proptest::collection::vec(any::<u8>(), 0..512)) {
        prop_assert_eq!(crc16_x25(&data), crc16_bitwise(&data));
        prop_assert_eq!(crc32_castagnoli(&data), crc32c_bitwise(&data));
    }

    #[test]
    fn ipn_parser_agrees_with_tokenizer(s in "ipn:[0-9.]{0,12}") {
        let parsed = s.parse::<EndpointId>().ok().and_then(|e| match e {
            EndpointId::Ipn { node, service } => Some((node, service)),
            _ => None,
        });
        prop_assert_eq!(parsed, ipn_oracle(&s));
    }

    #[test]
    fn ipn_valid_inputs_roundtrip(node in any::<u64>(), service in any::<u64>()) {
        let text = format!("ipn:{node}.{service}");
        prop_assert_eq!(ipn_oracle(&text), Some((node, service)));
        let eid: EndpointId = text.parse().unwrap();
        prop_assert_eq!(eid.to_string(), text);
    }
}
