//! Property suites for the codec: roundtrip identity over randomized valid
//! bundles, deterministic encoding, CRC closure under bit flips, and decoder
//! totality on arbitrary bytes.

use bp7::canonical::{BlockData, CanonicalBlock};
use bp7::primary::{FragmentInfo, PrimaryBlock};
use bp7::{Bundle, BundleFlags, CrcType, CreationTimestamp, EndpointId};
use proptest::prelude::*;

fn arb_eid() -> impl Strategy<Value = EndpointId> {
    prop_oneof![
        Just(EndpointId::Null),
        "[a-z0-9~_][a-z0-9~_/.-]{0,24}".prop_filter_map("dtn path rules", |s| {
            EndpointId::dtn(&s).ok()
        }),
        (any::<u64>(), any::<u64>()).prop_map(|(node, service)| EndpointId::ipn(node, service)),
    ]
}

fn arb_crc() -> impl Strategy<Value = CrcType> {
    prop_oneof![Just(CrcType::None), Just(CrcType::Crc16), Just(CrcType::Crc32c)]
}

fn arb_flags() -> impl Strategy<Value = BundleFlags> {
    // defined, non-structural flag bits in random combination
    let bits = [0x04u64, 0x20, 0x40, 0x4000, 0x1_0000, 0x2_0000, 0x4_0000];
    proptest::collection::vec(any::<bool>(), bits.len()).prop_map(move |picks| {
        let mut flags = BundleFlags::empty();
        for (on, bit) in picks.into_iter().zip(bits) {
            if on {
                flags |= BundleFlags::from_bits(bit);
            }
        }
        flags
    })
}

fn arb_primary() -> impl Strategy<Value = PrimaryBlock> {
    (
        arb_flags(),
        arb_crc(),
        arb_eid(),
        arb_eid(),
        arb_eid(),
        any::<u32>(),
        any::<u16>(),
        any::<u32>(),
        proptest::option::of((any::<u32>(), any::<u32>())),
    )
        .prop_map(
            |(mut flags, crc, dest, src, rpt, time, seq, lifetime, frag)| {
                let fragment = frag.map(|(off, len)| FragmentInfo {
                    offset: off as u64,
                    total_adu_length: len as u64,
                });
                flags = if fragment.is_some() {
                    flags.with(BundleFlags::IS_FRAGMENT)
                } else {
                    flags.without(BundleFlags::IS_FRAGMENT)
                };
                PrimaryBlock::new(
                    flags,
                    crc,
                    dest,
                    src,
                    rpt,
                    CreationTimestamp::new(time as u64, seq as u64),
                    lifetime as u64,
                    fragment,
                )
                .unwrap()
            },
        )
}

fn arb_extension_blocks() -> impl Strategy<Value = Vec<CanonicalBlock>> {
    let hop = (1..1000u64, 0..1000u64, arb_crc())
        .prop_map(|(limit, count, crc)| {
            let mut b = CanonicalBlock::hop_count(limit, count, 0);
            b.crc_type = crc;
            b
        });
    let prev = (arb_eid(), arb_crc()).prop_map(|(eid, crc)| {
        let mut b = CanonicalBlock::previous_node(eid, 0);
        b.crc_type = crc;
        b
    });
    let age = (any::<u32>(), arb_crc()).prop_map(|(micros, crc)| {
        let mut b = CanonicalBlock::bundle_age(micros as u64, 0);
        b.crc_type = crc;
        b
    });
    let unknown = (192..256u64, proptest::collection::vec(any::<u8>(), 0..64), arb_crc())
        .prop_map(|(code, content, crc)| CanonicalBlock {
            block_type: code,
            number: 0,
            flags: bp7::BlockFlags::empty(),
            crc_type: crc,
            data: BlockData::Unknown(content),
        });
    proptest::collection::vec(prop_oneof![hop, prev, age, unknown], 0..4)
}

prop_compose! {
    fn arb_bundle()(
        primary in arb_primary(),
        mut extensions in arb_extension_blocks(),
        payload in proptest::collection::vec(any::<u8>(), 0..2048),
        payload_crc in arb_crc(),
    ) -> Bundle {
        for (i, block) in extensions.iter_mut().enumerate() {
            block.number = 2 + i as u64;
        }
        let mut blocks = extensions;
        let mut p = CanonicalBlock::payload(payload);
        p.crc_type = payload_crc;
        blocks.push(p);
        Bundle::new(primary, blocks)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn roundtrip_identity(bundle in arb_bundle()) {
        let bytes = bundle.encode().unwrap();
        let decoded = Bundle::decode(&bytes).unwrap();
        prop_assert_eq!(decoded, bundle);
    }

    #[test]
    fn encoding_is_deterministic(bundle in arb_bundle()) {
        prop_assert_eq!(bundle.encode().unwrap(), bundle.encode().unwrap());
    }

    #[test]
    fn id_stable_under_codec(bundle in arb_bundle()) {
        let decoded = Bundle::decode(&bundle.encode().unwrap()).unwrap();
        prop_assert_eq!(decoded.id(), bundle.id());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10000))]

    // decode must be total: arbitrary bytes produce a value or a typed error
    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = Bundle::decode(&bytes);
    }

    #[test]
    fn decode_never_panics_on_mutated_valid_prefix(
        bundle in arb_bundle(),
        cut in any::<u16>(),
        flip in any::<(u16, u8)>(),
    ) {
        let mut bytes = bundle.encode().unwrap();
        let cut = (cut as usize) % (bytes.len() + 1);
        bytes.truncate(cut);
        if !bytes.is_empty() {
            let (pos, bit) = flip;
            let pos = pos as usize % bytes.len();
            bytes[pos] ^= 1 << (bit % 8);
        }
        let _ = Bundle::decode(&bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // CRC closure: any single-bit flip inside a CRC-protected block makes
    // decoding fail
    #[test]
    fn crc_closure_bit_flip(bundle in arb_bundle(), pos in any::<u32>(), bit in 0..8u32) {
        // force CRC everywhere so every byte of every block is covered
        let mut bundle = bundle;
        let all_crc = Bundle::new(
            {
                let p = &bundle.primary;
                PrimaryBlock::new(
                    p.flags(),
                    CrcType::Crc32c,
                    p.destination().clone(),
                    p.source().clone(),
                    p.report_to().clone(),
                    p.creation(),
                    p.lifetime_micros(),
                    p.fragment(),
                ).unwrap()
            },
            {
                for block in &mut bundle.canonicals {
                    block.crc_type = CrcType::Crc16;
                }
                bundle.canonicals
            },
        );
        let bytes = all_crc.encode().unwrap();
        // skip the outer framing bytes (first 0x9F head and final break)
        let pos = 1 + (pos as usize % (bytes.len() - 2));
        let mut corrupted = bytes.clone();
        corrupted[pos] ^= 1 << bit;
        prop_assert!(Bundle::decode(&corrupted).is_err());
    }
}
