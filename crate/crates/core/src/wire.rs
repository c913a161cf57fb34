//! Chunk and packet types with their byte encoding.
//!
//! Layout (all multi-byte integers big-endian):
//!
//! ```text
//! common header (12): src_port u16 | dst_port u16 | verification_tag u32 | checksum u32
//! chunk header  (4) : kind u8 | flags u8 | length u16      (length excludes padding)
//! DATA header  (16) : chunk header | tsn u32 | stream u16 | ssn u16 | ppid u32
//! ```
//!
//! Every chunk is padded with zeros to a multiple of four bytes. The checksum
//! is a CRC-32 over the whole packet with the checksum field zeroed.

use thiserror::Error;

pub const COMMON_HEADER_LEN: usize = 12;
pub const CHUNK_HEADER_LEN: usize = 4;
pub const DATA_HEADER_LEN: usize = 16;

const KIND_DATA: u8 = 0;
const KIND_INIT: u8 = 1;
const KIND_INIT_ACK: u8 = 2;
const KIND_SACK: u8 = 3;
const KIND_HEARTBEAT: u8 = 4;
const KIND_HEARTBEAT_ACK: u8 = 5;
const KIND_ABORT: u8 = 6;
const KIND_SHUTDOWN: u8 = 7;
const KIND_COOKIE_ECHO: u8 = 10;
const KIND_COOKIE_ACK: u8 = 11;

const FLAG_UNORDERED: u8 = 0x04;
const FLAG_BEGIN: u8 = 0x02;
const FLAG_END: u8 = 0x01;
const FLAG_SHUTDOWN_ACK: u8 = 0x01;

const PARAM_ADDRESS: u16 = 5;
const PARAM_COOKIE: u16 = 7;

/// Abort cause: the echoed cookie outlived its lifetime.
pub const CAUSE_STALE_COOKIE: u16 = 3;
/// Abort cause: the sender gave up after too many retransmissions.
pub const CAUSE_RETRANS_LIMIT: u16 = 0x100;
/// Abort cause: the handshake never completed.
pub const CAUSE_INIT_LIMIT: u16 = 0x101;
/// Abort cause: user request.
pub const CAUSE_USER: u16 = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("chunk of {len} bytes does not fit mtu {mtu}")]
    OversizeChunk { len: usize, mtu: usize },
    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("checksum mismatch: header {stored:#010x}, computed {computed:#010x}")]
    BadChecksum { stored: u32, computed: u32 },
    #[error("INIT chunk bundled with other chunks")]
    InitBundled,
    #[error("malformed {0} chunk")]
    Malformed(&'static str),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommonHeader {
    pub src_port: u16,
    pub dst_port: u16,
    pub verification_tag: u32,
    pub checksum: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChunkKind {
    Init,
    InitAck,
    CookieEcho,
    CookieAck,
    Data,
    Sack,
    Heartbeat,
    HeartbeatAck,
    Abort,
    Shutdown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataChunk {
    pub tsn: u32,
    pub stream_id: u16,
    pub ssn: u16,
    pub ordered: bool,
    pub fragment_begin: bool,
    pub fragment_end: bool,
    pub user_bytes: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GapBlock {
    pub start: u16,
    pub end: u16,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SackChunk {
    pub cumulative_tsn_ack: u32,
    pub advertised_rwnd: u32,
    pub gap_blocks: Vec<GapBlock>,
}

/// INIT and INIT_ACK share a body; only INIT_ACK carries a cookie.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InitChunk {
    pub initiate_tag: u32,
    pub rwnd: u32,
    pub out_streams: u16,
    pub in_streams: u16,
    pub initial_tsn: u32,
    pub addresses: Vec<u32>,
    pub cookie: Option<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Chunk {
    Init(InitChunk),
    InitAck(InitChunk),
    CookieEcho(Vec<u8>),
    CookieAck,
    Data(DataChunk),
    Sack(SackChunk),
    Heartbeat(Vec<u8>),
    HeartbeatAck(Vec<u8>),
    Abort { cause: u16 },
    Shutdown { cumulative_tsn_ack: u32, ack: bool },
}

impl Chunk {
    pub fn kind(&self) -> ChunkKind {
        match self {
            Chunk::Init(_) => ChunkKind::Init,
            Chunk::InitAck(_) => ChunkKind::InitAck,
            Chunk::CookieEcho(_) => ChunkKind::CookieEcho,
            Chunk::CookieAck => ChunkKind::CookieAck,
            Chunk::Data(_) => ChunkKind::Data,
            Chunk::Sack(_) => ChunkKind::Sack,
            Chunk::Heartbeat(_) => ChunkKind::Heartbeat,
            Chunk::HeartbeatAck(_) => ChunkKind::HeartbeatAck,
            Chunk::Abort { .. } => ChunkKind::Abort,
            Chunk::Shutdown { .. } => ChunkKind::Shutdown,
        }
    }

    fn code(&self) -> u8 {
        match self {
            Chunk::Init(_) => KIND_INIT,
            Chunk::InitAck(_) => KIND_INIT_ACK,
            Chunk::CookieEcho(_) => KIND_COOKIE_ECHO,
            Chunk::CookieAck => KIND_COOKIE_ACK,
            Chunk::Data(_) => KIND_DATA,
            Chunk::Sack(_) => KIND_SACK,
            Chunk::Heartbeat(_) => KIND_HEARTBEAT,
            Chunk::HeartbeatAck(_) => KIND_HEARTBEAT_ACK,
            Chunk::Abort { .. } => KIND_ABORT,
            Chunk::Shutdown { .. } => KIND_SHUTDOWN,
        }
    }

    pub fn flags(&self) -> u8 {
        match self {
            Chunk::Data(d) => {
                let mut f = 0;
                if !d.ordered {
                    f |= FLAG_UNORDERED;
                }
                if d.fragment_begin {
                    f |= FLAG_BEGIN;
                }
                if d.fragment_end {
                    f |= FLAG_END;
                }
                f
            }
            Chunk::Shutdown { ack: true, .. } => FLAG_SHUTDOWN_ACK,
            _ => 0,
        }
    }

    /// Length as written in the chunk header (no padding).
    pub fn unpadded_len(&self) -> usize {
        CHUNK_HEADER_LEN
            + match self {
                Chunk::Data(d) => DATA_HEADER_LEN - CHUNK_HEADER_LEN + d.user_bytes.len(),
                Chunk::Init(i) | Chunk::InitAck(i) => {
                    16 + 8 * i.addresses.len() + i.cookie.as_ref().map_or(0, |c| pad4(4 + c.len()))
                }
                Chunk::CookieEcho(c) | Chunk::Heartbeat(c) | Chunk::HeartbeatAck(c) => c.len(),
                Chunk::CookieAck => 0,
                Chunk::Sack(s) => 12 + 4 * s.gap_blocks.len(),
                Chunk::Abort { .. } => 4,
                Chunk::Shutdown { .. } => 4,
            }
    }

    /// Bytes occupied inside a packet, padding included.
    pub fn encoded_len(&self) -> usize {
        pad4(self.unpadded_len())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Packet {
    pub header: CommonHeader,
    pub chunks: Vec<Chunk>,
}

impl Packet {
    pub fn new(src_port: u16, dst_port: u16, verification_tag: u32) -> Self {
        Packet {
            header: CommonHeader {
                src_port,
                dst_port,
                verification_tag,
                checksum: 0,
            },
            chunks: Vec::new(),
        }
    }

    pub fn encoded_len(&self) -> usize {
        COMMON_HEADER_LEN + self.chunks.iter().map(Chunk::encoded_len).sum::<usize>()
    }

    pub fn starts_with_init(&self) -> bool {
        matches!(self.chunks.first(), Some(Chunk::Init(_)))
    }
}

/// Result of decoding: the packet plus the number of chunks of unknown kind
/// that were skipped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub packet: Packet,
    pub unknown_chunks: u32,
}

pub fn pad4(n: usize) -> usize {
    (n + 3) & !3
}

pub fn checksum(bytes: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    if bytes.len() >= COMMON_HEADER_LEN {
        h.update(&bytes[..8]);
        h.update(&[0; 4]);
        h.update(&bytes[COMMON_HEADER_LEN..]);
    } else {
        h.update(bytes);
    }
    h.finalize()
}

/// Encodes `p`, computing the checksum. `p.header.checksum` is ignored.
pub fn encode_packet(p: &Packet, mtu: usize) -> Result<Vec<u8>, WireError> {
    if p.chunks.len() > 1 && p.chunks.iter().any(|c| matches!(c, Chunk::Init(_))) {
        return Err(WireError::InitBundled);
    }
    let limit = mtu.saturating_sub(COMMON_HEADER_LEN);
    for c in &p.chunks {
        if c.encoded_len() > limit || c.unpadded_len() > u16::MAX as usize {
            return Err(WireError::OversizeChunk {
                len: c.encoded_len(),
                mtu,
            });
        }
    }
    let mut out = Vec::with_capacity(p.encoded_len());
    out.extend_from_slice(&p.header.src_port.to_be_bytes());
    out.extend_from_slice(&p.header.dst_port.to_be_bytes());
    out.extend_from_slice(&p.header.verification_tag.to_be_bytes());
    out.extend_from_slice(&[0; 4]);
    for c in &p.chunks {
        encode_chunk(c, &mut out);
    }
    let sum = checksum(&out);
    out[8..12].copy_from_slice(&sum.to_be_bytes());
    Ok(out)
}

fn encode_chunk(c: &Chunk, out: &mut Vec<u8>) {
    let start = out.len();
    out.push(c.code());
    out.push(c.flags());
    out.extend_from_slice(&(c.unpadded_len() as u16).to_be_bytes());
    match c {
        Chunk::Data(d) => {
            out.extend_from_slice(&d.tsn.to_be_bytes());
            out.extend_from_slice(&d.stream_id.to_be_bytes());
            out.extend_from_slice(&d.ssn.to_be_bytes());
            out.extend_from_slice(&0u32.to_be_bytes());
            out.extend_from_slice(&d.user_bytes);
        }
        Chunk::Init(i) | Chunk::InitAck(i) => {
            out.extend_from_slice(&i.initiate_tag.to_be_bytes());
            out.extend_from_slice(&i.rwnd.to_be_bytes());
            out.extend_from_slice(&i.out_streams.to_be_bytes());
            out.extend_from_slice(&i.in_streams.to_be_bytes());
            out.extend_from_slice(&i.initial_tsn.to_be_bytes());
            for a in &i.addresses {
                out.extend_from_slice(&PARAM_ADDRESS.to_be_bytes());
                out.extend_from_slice(&8u16.to_be_bytes());
                out.extend_from_slice(&a.to_be_bytes());
            }
            if let Some(cookie) = &i.cookie {
                out.extend_from_slice(&PARAM_COOKIE.to_be_bytes());
                out.extend_from_slice(&((4 + cookie.len()) as u16).to_be_bytes());
                out.extend_from_slice(cookie);
                out.resize(out.len() + pad4(4 + cookie.len()) - 4 - cookie.len(), 0);
            }
        }
        Chunk::CookieEcho(b) | Chunk::Heartbeat(b) | Chunk::HeartbeatAck(b) => {
            out.extend_from_slice(b)
        }
        Chunk::CookieAck => {}
        Chunk::Sack(s) => {
            out.extend_from_slice(&s.cumulative_tsn_ack.to_be_bytes());
            out.extend_from_slice(&s.advertised_rwnd.to_be_bytes());
            out.extend_from_slice(&(s.gap_blocks.len() as u16).to_be_bytes());
            out.extend_from_slice(&0u16.to_be_bytes());
            for g in &s.gap_blocks {
                out.extend_from_slice(&g.start.to_be_bytes());
                out.extend_from_slice(&g.end.to_be_bytes());
            }
        }
        Chunk::Abort { cause } => {
            out.extend_from_slice(&cause.to_be_bytes());
            out.extend_from_slice(&0u16.to_be_bytes());
        }
        Chunk::Shutdown {
            cumulative_tsn_ack, ..
        } => out.extend_from_slice(&cumulative_tsn_ack.to_be_bytes()),
    }
    let padded = start + pad4(out.len() - start);
    out.resize(padded, 0);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn need(&self, n: usize) -> Result<(), WireError> {
        if self.buf.len() - self.pos < n {
            Err(WireError::Truncated {
                needed: n,
                available: self.buf.len() - self.pos,
            })
        } else {
            Ok(())
        }
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        self.need(1)?;
        self.pos += 1;
        Ok(self.buf[self.pos - 1])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        self.need(2)?;
        let v = u16::from_be_bytes([self.buf[self.pos], self.buf[self.pos + 1]]);
        self.pos += 2;
        Ok(v)
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        self.need(4)?;
        let v = u32::from_be_bytes(self.buf[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        self.need(n)?;
        self.pos += n;
        Ok(&self.buf[self.pos - n..self.pos])
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_packet(bytes: &[u8]) -> Result<Decoded, WireError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let src_port = r.u16()?;
    let dst_port = r.u16()?;
    let verification_tag = r.u32()?;
    let stored = r.u32()?;
    let computed = checksum(bytes);
    if stored != computed {
        return Err(WireError::BadChecksum { stored, computed });
    }
    let mut packet = Packet {
        header: CommonHeader {
            src_port,
            dst_port,
            verification_tag,
            checksum: stored,
        },
        chunks: Vec::new(),
    };
    let mut unknown_chunks = 0;
    while r.remaining() > 0 {
        let code = r.u8()?;
        let flags = r.u8()?;
        let len = r.u16()? as usize;
        if len < CHUNK_HEADER_LEN {
            return Err(WireError::Malformed("chunk length"));
        }
        let body = r.bytes(len - CHUNK_HEADER_LEN)?;
        // final chunk may omit its padding
        let pad = (pad4(len) - len).min(r.remaining());
        r.bytes(pad)?;
        match decode_chunk(code, flags, body)? {
            Some(c) => packet.chunks.push(c),
            None => unknown_chunks += 1,
        }
    }
    Ok(Decoded {
        packet,
        unknown_chunks,
    })
}

fn decode_chunk(code: u8, flags: u8, body: &[u8]) -> Result<Option<Chunk>, WireError> {
    let mut r = Reader { buf: body, pos: 0 };
    let chunk = match code {
        KIND_DATA => {
            let tsn = r.u32()?;
            let stream_id = r.u16()?;
            let ssn = r.u16()?;
            let _ppid = r.u32()?;
            let user_bytes = r.bytes(r.remaining())?.to_vec();
            if user_bytes.is_empty() {
                return Err(WireError::Malformed("DATA"));
            }
            Chunk::Data(DataChunk {
                tsn,
                stream_id,
                ssn,
                ordered: flags & FLAG_UNORDERED == 0,
                fragment_begin: flags & FLAG_BEGIN != 0,
                fragment_end: flags & FLAG_END != 0,
                user_bytes,
            })
        }
        KIND_INIT | KIND_INIT_ACK => {
            let mut init = InitChunk {
                initiate_tag: r.u32()?,
                rwnd: r.u32()?,
                out_streams: r.u16()?,
                in_streams: r.u16()?,
                initial_tsn: r.u32()?,
                addresses: Vec::new(),
                cookie: None,
            };
            while r.remaining() > 0 {
                let kind = r.u16()?;
                let plen = r.u16()? as usize;
                if plen < 4 {
                    return Err(WireError::Malformed("INIT parameter"));
                }
                let value = r.bytes(plen - 4)?;
                let pad = (pad4(plen) - plen).min(r.remaining());
                r.bytes(pad)?;
                match kind {
                    PARAM_ADDRESS if value.len() == 4 => {
                        init.addresses
                            .push(u32::from_be_bytes(value.try_into().unwrap()));
                    }
                    PARAM_COOKIE => init.cookie = Some(value.to_vec()),
                    _ => {}
                }
            }
            if code == KIND_INIT {
                Chunk::Init(init)
            } else {
                Chunk::InitAck(init)
            }
        }
        KIND_SACK => {
            let cumulative_tsn_ack = r.u32()?;
            let advertised_rwnd = r.u32()?;
            let n = r.u16()?;
            let _dups = r.u16()?;
            let mut gap_blocks = Vec::with_capacity(n as usize);
            for _ in 0..n {
                gap_blocks.push(GapBlock {
                    start: r.u16()?,
                    end: r.u16()?,
                });
            }
            Chunk::Sack(SackChunk {
                cumulative_tsn_ack,
                advertised_rwnd,
                gap_blocks,
            })
        }
        KIND_HEARTBEAT => Chunk::Heartbeat(body.to_vec()),
        KIND_HEARTBEAT_ACK => Chunk::HeartbeatAck(body.to_vec()),
        KIND_ABORT => Chunk::Abort { cause: r.u16()? },
        KIND_SHUTDOWN => Chunk::Shutdown {
            cumulative_tsn_ack: r.u32()?,
            ack: flags & FLAG_SHUTDOWN_ACK != 0,
        },
        KIND_COOKIE_ECHO => Chunk::CookieEcho(body.to_vec()),
        KIND_COOKIE_ACK => Chunk::CookieAck,
        _ => return Ok(None),
    };
    Ok(Some(chunk))
}

/// Greedy first-fit bundling that preserves chunk order. INIT always travels
/// alone.
pub fn bundle_chunks(
    chunks: Vec<Chunk>,
    mtu: usize,
    src_port: u16,
    dst_port: u16,
    verification_tag: u32,
) -> Result<Vec<Packet>, WireError> {
    let limit = mtu.saturating_sub(COMMON_HEADER_LEN);
    if let Some(c) = chunks.iter().find(|c| c.encoded_len() > limit) {
        return Err(WireError::OversizeChunk {
            len: c.encoded_len(),
            mtu,
        });
    }
    let mut packets = Vec::new();
    let mut current = Packet::new(src_port, dst_port, verification_tag);
    let mut used = COMMON_HEADER_LEN;
    for c in chunks {
        let len = c.encoded_len();
        let is_init = matches!(c, Chunk::Init(_));
        let current_is_init = current.starts_with_init();
        if !current.chunks.is_empty() && (used + len > mtu || is_init || current_is_init) {
            packets.push(std::mem::replace(
                &mut current,
                Packet::new(src_port, dst_port, verification_tag),
            ));
            used = COMMON_HEADER_LEN;
        }
        used += len;
        current.chunks.push(c);
    }
    if !current.chunks.is_empty() {
        packets.push(current);
    }
    Ok(packets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagVerdict {
    Accept,
    Discard,
}

/// Packets led by INIT must carry tag 0; everything else must carry the
/// expected tag.
pub fn verify_tag(p: &Packet, expected: u32) -> TagVerdict {
    let ok = if p.starts_with_init() {
        p.header.verification_tag == 0
    } else {
        expected != 0 && p.header.verification_tag == expected
    };
    if ok {
        TagVerdict::Accept
    } else {
        TagVerdict::Discard
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(tsn: u32, len: usize) -> Chunk {
        Chunk::Data(DataChunk {
            tsn,
            stream_id: 0,
            ssn: 0,
            ordered: true,
            fragment_begin: true,
            fragment_end: true,
            user_bytes: vec![0xab; len],
        })
    }

    #[test]
    fn full_size_data_chunk_fills_mtu() {
        let mut p = Packet::new(1, 2, 7);
        p.chunks.push(data(1, 1468));
        assert_eq!(encode_packet(&p, 1500).unwrap().len(), 1496);
    }

    #[test]
    fn empty_packet_is_header_only() {
        let p = Packet::new(1, 2, 7);
        assert_eq!(encode_packet(&p, 1500).unwrap().len(), 12);
    }

    #[test]
    fn short_data_is_padded() {
        let mut p = Packet::new(1, 2, 7);
        p.chunks.push(data(1, 5));
        let bytes = encode_packet(&p, 1500).unwrap();
        assert_eq!(bytes.len(), 36);
        // length field excludes padding
        assert_eq!(u16::from_be_bytes([bytes[14], bytes[15]]), 21);
        assert_eq!(decode_packet(&bytes).unwrap().packet.chunks, p.chunks);
    }

    #[test]
    fn truncated_header() {
        assert!(matches!(
            decode_packet(&[0u8; 11]),
            Err(WireError::Truncated { .. })
        ));
    }

    #[test]
    fn flipped_bit_fails_checksum() {
        let mut p = Packet::new(1, 2, 7);
        p.chunks.push(data(1, 100));
        let mut bytes = encode_packet(&p, 1500).unwrap();
        bytes[40] ^= 0x10;
        assert!(matches!(
            decode_packet(&bytes),
            Err(WireError::BadChecksum { .. })
        ));
    }

    #[test]
    fn unknown_chunk_is_skipped_and_counted() {
        let mut p = Packet::new(1, 2, 7);
        p.chunks.push(Chunk::CookieAck);
        let mut bytes = encode_packet(&p, 1500).unwrap();
        bytes.extend_from_slice(&[0xc1, 0, 0, 6, 1, 2, 0, 0]);
        let sum = checksum(&bytes);
        bytes[8..12].copy_from_slice(&sum.to_be_bytes());
        let d = decode_packet(&bytes).unwrap();
        assert_eq!(d.unknown_chunks, 1);
        assert_eq!(d.packet.chunks, vec![Chunk::CookieAck]);
    }

    #[test]
    fn oversize_chunk_rejected() {
        let mut p = Packet::new(1, 2, 7);
        p.chunks.push(data(1, 1473));
        assert!(matches!(
            encode_packet(&p, 1500),
            Err(WireError::OversizeChunk { .. })
        ));
        assert!(bundle_chunks(vec![data(1, 1473)], 1500, 1, 2, 3).is_err());
    }

    #[test]
    fn bundling_pairs_of_512() {
        let chunks: Vec<_> = (0..24).map(|i| data(i, 512)).collect();
        let packets = bundle_chunks(chunks, 1500, 1, 2, 3).unwrap();
        assert_eq!(packets.len(), 12);
        assert!(packets.iter().all(|p| p.encoded_len() == 1068));
        assert!(bundle_chunks(Vec::new(), 1500, 1, 2, 3).unwrap().is_empty());
    }

    #[test]
    fn init_travels_alone() {
        let chunks = vec![
            Chunk::CookieAck,
            Chunk::Init(InitChunk::default()),
            Chunk::CookieAck,
        ];
        let packets = bundle_chunks(chunks, 1500, 1, 2, 0).unwrap();
        assert_eq!(packets.len(), 3);
        let mut bad = Packet::new(1, 2, 0);
        bad.chunks = vec![Chunk::Init(InitChunk::default()), Chunk::CookieAck];
        assert_eq!(encode_packet(&bad, 1500), Err(WireError::InitBundled));
    }

    #[test]
    fn tag_rules() {
        let mut p = Packet::new(1, 2, 99);
        p.chunks.push(data(1, 4));
        assert_eq!(verify_tag(&p, 99), TagVerdict::Accept);
        assert_eq!(verify_tag(&p, 100), TagVerdict::Discard);
        let mut init = Packet::new(1, 2, 0);
        init.chunks.push(Chunk::Init(InitChunk::default()));
        assert_eq!(verify_tag(&init, 12345), TagVerdict::Accept);
        init.header.verification_tag = 5;
        assert_eq!(verify_tag(&init, 5), TagVerdict::Discard);
    }
}
