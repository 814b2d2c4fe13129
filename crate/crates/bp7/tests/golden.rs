//! Golden wire vector for the reference sensor-value bundle: destination
//! `dtn:sink/lux`, source/report-to `dtn:b2`, creation (0, 23), lifetime
//! 3600000 us, reception report requested, a hop-count block (64, 42) as
//! block 2, and a two-byte payload `0E C6` as block 1. All CRCs disabled.
//!
//! The frozen bytes were produced by an independent generic CBOR encoder
//! (ciborium) driven by the documented field layout; `oracle_bytes` rebuilds
//! them the same way on every run so the vector can never drift silently.

use bp7::{Bundle, BundleBuilder, BundleFlags, CanonicalBlock, CrcType, CreationTimestamp};
use bp7::primary::PrimaryBlock;

const GOLDEN_HEX: &str = "9f88071940000082016873696e6b2f6c7578820162623282016262328200171a0036ee80850902000045821840182a8501010000420ec6ff";

fn golden_bytes() -> Vec<u8> {
    (0..GOLDEN_HEX.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&GOLDEN_HEX[i..i + 2], 16).unwrap())
        .collect()
}

/// Rebuild the golden bytes with ciborium, independent of this crate's
/// encoder: each block is a definite-length CBOR array serialized by
/// ciborium; the outer bundle array is framed indefinite by hand.
fn oracle_bytes() -> Vec<u8> {
    use ciborium::Value;

    fn ser(value: &Value) -> Vec<u8> {
        let mut out = Vec::new();
        ciborium::into_writer(value, &mut out).unwrap();
        out
    }
    let eid = |path: &str| Value::Array(vec![Value::from(1), Value::Text(path.into())]);

    let primary = Value::Array(vec![
        Value::from(7),
        Value::from(0x4000),
        Value::from(0),
        eid("sink/lux"),
        eid("b2"),
        eid("b2"),
        Value::Array(vec![Value::from(0), Value::from(23)]),
        Value::from(3_600_000),
    ]);
    let hop_data = ser(&Value::Array(vec![Value::from(64), Value::from(42)]));
    let hop = Value::Array(vec![
        Value::from(9),
        Value::from(2),
        Value::from(0),
        Value::from(0),
        Value::Bytes(hop_data),
    ]);
    let payload = Value::Array(vec![
        Value::from(1),
        Value::from(1),
        Value::from(0),
        Value::from(0),
        Value::Bytes(vec![0x0E, 0xC6]),
    ]);

    let mut out = vec![0x9F];
    out.extend(ser(&primary));
    out.extend(ser(&hop));
    out.extend(ser(&payload));
    out.push(0xFF);
    out
}

fn golden_bundle() -> Bundle {
    let primary = PrimaryBlock::new(
        BundleFlags::REPORT_RECEPTION,
        CrcType::None,
        "dtn:sink/lux".parse().unwrap(),
        "dtn:b2".parse().unwrap(),
        "dtn:b2".parse().unwrap(),
        CreationTimestamp::new(0, 23),
        3_600_000,
        None,
    )
    .unwrap();
    Bundle::new(
        primary,
        vec![CanonicalBlock::hop_count(64, 42, 2), CanonicalBlock::payload(vec![0x0E, 0xC6])],
    )
}

#[test]
fn frozen_vector_matches_independent_encoder() {
    assert_eq!(oracle_bytes(), golden_bytes());
}

#[test]
fn encode_matches_golden_vector() {
    assert_eq!(golden_bundle().encode().unwrap(), golden_bytes());
}

#[test]
fn decode_golden_vector() {
    let decoded = Bundle::decode(&golden_bytes()).unwrap();
    assert_eq!(decoded, golden_bundle());
    assert_eq!(decoded.payload().unwrap(), &[0x0E, 0xC6]);
    assert_eq!(decoded.hop_count(), Some((64, 42)));
    assert_eq!(decoded.id().to_string(), "dtn:b2-0-23");
    assert!(!decoded.id().is_fragment());
}

#[test]
fn truncated_golden_vector_is_a_truncation_error() {
    let bytes = golden_bytes();
    for cut in 1..bytes.len() {
        let err = Bundle::decode(&bytes[..bytes.len() - cut]).unwrap_err();
        // any prefix must fail loudly; the single-byte cut is a pure truncation
        if cut == 1 {
            assert_eq!(err, bp7::DecodeError::Truncated);
        }
    }
}

#[test]
fn builder_reproduces_golden_shape() {
    // same bundle modulo creation time, report flags, and hops taken
    let built = BundleBuilder::new("dtn:sink/lux".parse().unwrap(), "dtn:b2".parse().unwrap())
        .payload(vec![0x0E, 0xC6])
        .lifetime_micros(3_600_000)
        .hop_limit(Some(64))
        .build()
        .unwrap();
    let golden = golden_bundle();
    assert_eq!(built.primary.destination(), golden.primary.destination());
    assert_eq!(built.primary.source(), golden.primary.source());
    assert_eq!(built.primary.report_to(), golden.primary.report_to());
    assert_eq!(built.primary.lifetime_micros(), golden.primary.lifetime_micros());
    assert_eq!(built.primary.crc_type(), CrcType::None);
    assert_eq!(built.hop_count().map(|(limit, _)| limit), Some(64));
    assert_eq!(built.payload(), golden.payload());
    assert_eq!(built.canonicals.last().unwrap().number, 1);
}
