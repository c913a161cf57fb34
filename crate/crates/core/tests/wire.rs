use proptest::collection::vec;
use proptest::prelude::*;

use sctpsim::wire::{
    bundle_chunks, decode_packet, encode_packet, pad4, verify_tag, Chunk, DataChunk, GapBlock,
    InitChunk, Packet, SackChunk, TagVerdict, WireError, COMMON_HEADER_LEN,
};

fn data_chunk() -> impl Strategy<Value = Chunk> {
    (
        any::<u32>(),
        any::<u16>(),
        any::<u16>(),
        any::<[bool; 3]>(),
        vec(any::<u8>(), 1..600),
    )
        .prop_map(|(tsn, stream_id, ssn, [ordered, b, e], user_bytes)| {
            Chunk::Data(DataChunk {
                tsn,
                stream_id,
                ssn,
                ordered,
                fragment_begin: b,
                fragment_end: e,
                user_bytes,
            })
        })
}

fn init_body(cookie: bool) -> impl Strategy<Value = InitChunk> {
    (
        1..u32::MAX,
        any::<u32>(),
        1..u16::MAX,
        1..u16::MAX,
        any::<u32>(),
        vec(any::<u32>(), 0..4),
        vec(any::<u8>(), 1..80),
    )
        .prop_map(move |(tag, rwnd, os, is, tsn, addresses, c)| InitChunk {
            initiate_tag: tag,
            rwnd,
            out_streams: os,
            in_streams: is,
            initial_tsn: tsn,
            addresses,
            cookie: cookie.then_some(c),
        })
}

/// Any chunk except INIT, which must travel alone.
fn bundleable_chunk() -> impl Strategy<Value = Chunk> {
    prop_oneof![
        4 => data_chunk(),
        1 => (any::<u32>(), any::<u32>(), vec((1u16..200, 0u16..50), 0..8)).prop_map(|(c, w, g)| {
            Chunk::Sack(SackChunk {
                cumulative_tsn_ack: c,
                advertised_rwnd: w,
                gap_blocks: g
                    .into_iter()
                    .map(|(s, n)| GapBlock { start: s, end: s + n })
                    .collect(),
            })
        }),
        1 => init_body(true).prop_map(Chunk::InitAck),
        1 => vec(any::<u8>(), 0..100).prop_map(Chunk::CookieEcho),
        1 => Just(Chunk::CookieAck),
        1 => vec(any::<u8>(), 0..40).prop_map(Chunk::Heartbeat),
        1 => vec(any::<u8>(), 0..40).prop_map(Chunk::HeartbeatAck),
        1 => any::<u16>().prop_map(|cause| Chunk::Abort { cause }),
        1 => (any::<u32>(), any::<bool>())
            .prop_map(|(c, ack)| Chunk::Shutdown { cumulative_tsn_ack: c, ack }),
    ]
}

fn header() -> impl Strategy<Value = (u16, u16, u32)> {
    (any::<u16>(), any::<u16>(), any::<u32>())
}

proptest! {
    #[test]
    fn packets_round_trip(h in header(), chunks in vec(bundleable_chunk(), 1..6)) {
        let mut p = Packet::new(h.0, h.1, h.2);
        p.chunks = chunks;
        let bytes = encode_packet(&p, 65535).unwrap();
        prop_assert_eq!(bytes.len() % 4, 0);
        prop_assert_eq!(bytes.len(), p.encoded_len());
        let d = decode_packet(&bytes).unwrap();
        prop_assert_eq!(d.unknown_chunks, 0);
        prop_assert_eq!(&d.packet.chunks, &p.chunks);
        prop_assert_eq!(d.packet.header.src_port, h.0);
        prop_assert_eq!(d.packet.header.dst_port, h.1);
        prop_assert_eq!(d.packet.header.verification_tag, h.2);
    }

    #[test]
    fn init_round_trips_alone(body in init_body(false)) {
        let mut p = Packet::new(1, 2, 0);
        p.chunks.push(Chunk::Init(body));
        let d = decode_packet(&encode_packet(&p, 1500).unwrap()).unwrap();
        prop_assert_eq!(d.packet.chunks, p.chunks);
    }

    #[test]
    fn any_flipped_byte_is_rejected(
        h in header(),
        chunks in vec(bundleable_chunk(), 1..4),
        at in any::<prop::sample::Index>(),
        bit in 0u8..8,
    ) {
        let mut p = Packet::new(h.0, h.1, h.2);
        p.chunks = chunks;
        let mut bytes = encode_packet(&p, 65535).unwrap();
        let i = at.index(bytes.len());
        bytes[i] ^= 1 << bit;
        prop_assert!(decode_packet(&bytes).is_err());
    }

    #[test]
    fn bundling_keeps_order_and_fits(chunks in vec(bundleable_chunk(), 0..40), mtu in 700usize..1500) {
        let packets = bundle_chunks(chunks.clone(), mtu, 1, 2, 3).unwrap();
        let flat: Vec<Chunk> = packets.iter().flat_map(|p| p.chunks.clone()).collect();
        prop_assert_eq!(&flat, &chunks);
        for p in &packets {
            prop_assert!(!p.chunks.is_empty());
            prop_assert!(p.encoded_len() <= mtu);
            prop_assert_eq!(p.header.verification_tag, 3);
        }
        // first fit: the next packet's first chunk would not have fitted
        for w in packets.windows(2) {
            prop_assert!(w[0].encoded_len() + w[1].chunks[0].encoded_len() > mtu);
        }
    }

    #[test]
    fn init_is_never_bundled(before in vec(data_chunk(), 0..3), after in vec(data_chunk(), 0..3), body in init_body(false)) {
        let mut chunks = before.clone();
        chunks.push(Chunk::Init(body));
        chunks.extend(after);
        let packets = bundle_chunks(chunks, 1500, 1, 2, 0).unwrap();
        let with_init: Vec<&Packet> = packets
            .iter()
            .filter(|p| p.chunks.iter().any(|c| matches!(c, Chunk::Init(_))))
            .collect();
        prop_assert_eq!(with_init.len(), 1);
        prop_assert_eq!(with_init[0].chunks.len(), 1);
    }

    #[test]
    fn tags_other_than_the_expected_are_discarded(expected in 1..u32::MAX, got in any::<u32>()) {
        let mut p = Packet::new(1, 2, got);
        p.chunks.push(Chunk::CookieAck);
        let verdict = verify_tag(&p, expected);
        prop_assert_eq!(verdict == TagVerdict::Accept, got == expected);
    }
}

#[test]
fn init_with_nonzero_tag_is_discarded() {
    let mut p = Packet::new(1, 2, 7);
    p.chunks.push(Chunk::Init(InitChunk {
        initiate_tag: 9,
        rwnd: 1000,
        out_streams: 1,
        in_streams: 1,
        ..Default::default()
    }));
    assert_eq!(verify_tag(&p, 7), TagVerdict::Discard);
    p.header.verification_tag = 0;
    assert_eq!(verify_tag(&p, 7), TagVerdict::Accept);
}

#[test]
fn oversize_chunk_is_refused() {
    let big = Chunk::Data(DataChunk {
        tsn: 1,
        stream_id: 0,
        ssn: 0,
        ordered: true,
        fragment_begin: true,
        fragment_end: true,
        user_bytes: vec![0; 1500],
    });
    assert!(matches!(
        bundle_chunks(vec![big], 1500, 1, 2, 3),
        Err(WireError::OversizeChunk { .. })
    ));
}

#[test]
fn truncated_packets_are_errors() {
    let mut p = Packet::new(1, 2, 3);
    p.chunks.push(Chunk::Heartbeat(vec![1, 2, 3, 4, 5]));
    let bytes = encode_packet(&p, 1500).unwrap();
    assert_eq!(bytes.len(), COMMON_HEADER_LEN + pad4(4 + 5));
    for n in 0..COMMON_HEADER_LEN {
        assert!(decode_packet(&bytes[..n]).is_err(), "{n} bytes");
    }
}
