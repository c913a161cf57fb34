//! The kernel-style message send path.
//!
//! A user message is split into chunks and tracked by three structures:
//! the message record (freed once every chunk is acknowledged), the chunk
//! buffers holding header and payload bytes, and the descriptors that point
//! at those buffers and carry per-transmission bookkeeping. Every byte moved
//! between them is charged to one of three memory-to-memory copy stages.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::time::SimTime;
use crate::wire::{self, Chunk, DataChunk, Packet, WireError, DATA_HEADER_LEN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("message is empty")]
    EmptyMessage,
    #[error("chunk size must be positive")]
    BadChunkSize,
    #[error("descriptor for buffer {0} released twice")]
    DoubleRelease(u64),
    #[error("unknown message {0}")]
    UnknownMessage(u64),
    #[error("fragments incomplete")]
    IncompleteFragments,
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CopyStage {
    /// User buffer into the message structure.
    UserToMessage,
    /// Chunks bundled into an MTU-sized packet for the NIC.
    BundleToNic,
    /// DMA of the packet into NIC buffers.
    NicDma,
}

impl CopyStage {
    pub const ALL: [CopyStage; 3] = [
        CopyStage::UserToMessage,
        CopyStage::BundleToNic,
        CopyStage::NicDma,
    ];

    fn index(self) -> usize {
        match self {
            CopyStage::UserToMessage => 0,
            CopyStage::BundleToNic => 1,
            CopyStage::NicDma => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageTally {
    pub count: u64,
    pub bytes: u64,
}

/// Ledger of the three copy stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CopyAccount {
    stages: [StageTally; 3],
}

impl CopyAccount {
    pub fn record(&mut self, stage: CopyStage, bytes: u64) {
        let t = &mut self.stages[stage.index()];
        t.count += 1;
        t.bytes += bytes;
    }

    pub fn get(&self, stage: CopyStage) -> StageTally {
        self.stages[stage.index()]
    }

    pub fn bytes(&self, stage: CopyStage) -> u64 {
        self.get(stage).bytes
    }

    /// Stages that have seen at least one copy.
    pub fn active_stages(&self) -> Vec<CopyStage> {
        CopyStage::ALL
            .into_iter()
            .filter(|s| self.get(*s).count > 0)
            .collect()
    }

    /// Per-stage difference `self - earlier`.
    pub fn since(&self, earlier: &CopyAccount) -> CopyAccount {
        let mut out = CopyAccount::default();
        for i in 0..3 {
            out.stages[i] = StageTally {
                count: self.stages[i].count - earlier.stages[i].count,
                bytes: self.stages[i].bytes - earlier.stages[i].bytes,
            };
        }
        out
    }

    pub fn add(&mut self, other: &CopyAccount) {
        for i in 0..3 {
            self.stages[i].count += other.stages[i].count;
            self.stages[i].bytes += other.stages[i].bytes;
        }
    }
}

pub type MessageId = u64;
pub type BufferId = u64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkBuffer {
    pub header_bytes: [u8; DATA_HEADER_LEN],
    pub payload_bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutboundMessage {
    pub message_id: MessageId,
    pub stream_id: u16,
    pub chunk_list: Vec<BufferId>,
    pub unacked_count: usize,
    released: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkDescriptor {
    pub message_id: MessageId,
    pub buffer_ref: BufferId,
    /// Position in the message's chunk list.
    pub index: usize,
    pub tsn: u64,
    pub stream_id: u16,
    pub ssn: u16,
    pub ordered: bool,
    pub payload_len: usize,
    pub transmit_count: u32,
    pub first_sent_at: Option<SimTime>,
    pub last_sent_at: Option<SimTime>,
    pub fragment_begin: bool,
    pub fragment_end: bool,
}

/// Relative cost of each copy stage; 1.0 is the unoptimized kernel path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StageMultipliers {
    pub user_to_message: f64,
    pub bundle_to_nic: f64,
    pub nic_dma: f64,
}

impl Default for StageMultipliers {
    fn default() -> Self {
        StageMultipliers {
            user_to_message: 1.0,
            bundle_to_nic: 1.0,
            nic_dma: 1.0,
        }
    }
}

impl StageMultipliers {
    pub fn get(&self, stage: CopyStage) -> f64 {
        match stage {
            CopyStage::UserToMessage => self.user_to_message,
            CopyStage::BundleToNic => self.bundle_to_nic,
            CopyStage::NicDma => self.nic_dma,
        }
    }
}

#[derive(Debug, Default)]
pub struct SendPipeline {
    messages: BTreeMap<MessageId, OutboundMessage>,
    buffers: BTreeMap<BufferId, ChunkBuffer>,
    copies: CopyAccount,
    calls: u64,
    next_message: MessageId,
    next_buffer: BufferId,
    freed_messages: u64,
}

impl SendPipeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn copies(&self) -> &CopyAccount {
        &self.copies
    }

    /// Number of send-path invocations (fragment and staging calls).
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn live_messages(&self) -> usize {
        self.messages.len()
    }

    pub fn live_buffers(&self) -> usize {
        self.buffers.len()
    }

    pub fn freed_messages(&self) -> u64 {
        self.freed_messages
    }

    pub fn message(&self, id: MessageId) -> Option<&OutboundMessage> {
        self.messages.get(&id)
    }

    pub fn buffer(&self, id: BufferId) -> Option<&ChunkBuffer> {
        self.buffers.get(&id)
    }

    /// Splits `message_bytes` into `chunk_size` pieces. TSNs are left at zero
    /// for the caller to assign.
    pub fn fragment(
        &mut self,
        message_bytes: &[u8],
        chunk_size: usize,
        stream_id: u16,
        ssn: u16,
        ordered: bool,
    ) -> Result<(MessageId, Vec<ChunkDescriptor>), PipelineError> {
        if message_bytes.is_empty() {
            return Err(PipelineError::EmptyMessage);
        }
        if chunk_size == 0 {
            return Err(PipelineError::BadChunkSize);
        }
        self.calls += 1;
        let message_id = self.next_message;
        self.next_message += 1;
        let pieces: Vec<&[u8]> = message_bytes.chunks(chunk_size).collect();
        let last = pieces.len() - 1;
        let mut descriptors = Vec::with_capacity(pieces.len());
        let mut chunk_list = Vec::with_capacity(pieces.len());
        for (index, piece) in pieces.into_iter().enumerate() {
            let buffer_ref = self.next_buffer;
            self.next_buffer += 1;
            let mut header_bytes = [0u8; DATA_HEADER_LEN];
            header_bytes[2..4]
                .copy_from_slice(&((DATA_HEADER_LEN + piece.len()) as u16).to_be_bytes());
            header_bytes[8..10].copy_from_slice(&stream_id.to_be_bytes());
            header_bytes[10..12].copy_from_slice(&ssn.to_be_bytes());
            self.buffers.insert(
                buffer_ref,
                ChunkBuffer {
                    header_bytes,
                    payload_bytes: piece.to_vec(),
                },
            );
            chunk_list.push(buffer_ref);
            descriptors.push(ChunkDescriptor {
                message_id,
                buffer_ref,
                index,
                tsn: 0,
                stream_id,
                ssn,
                ordered,
                payload_len: piece.len(),
                transmit_count: 0,
                first_sent_at: None,
                last_sent_at: None,
                fragment_begin: index == 0,
                fragment_end: index == last,
            });
        }
        self.copies
            .record(CopyStage::UserToMessage, message_bytes.len() as u64);
        let n = chunk_list.len();
        self.messages.insert(
            message_id,
            OutboundMessage {
                message_id,
                stream_id,
                chunk_list,
                unacked_count: n,
                released: vec![false; n],
            },
        );
        Ok((message_id, descriptors))
    }

    fn data_chunk(&self, d: &ChunkDescriptor) -> Chunk {
        let buf = &self.buffers[&d.buffer_ref];
        Chunk::Data(DataChunk {
            tsn: d.tsn as u32,
            stream_id: d.stream_id,
            ssn: d.ssn,
            ordered: d.ordered,
            fragment_begin: d.fragment_begin,
            fragment_end: d.fragment_end,
            user_bytes: buf.payload_bytes.clone(),
        })
    }

    /// Bundles the descriptors' chunks (after any leading control chunks)
    /// into packets and encodes them. Charges the bundle copy and stamps each
    /// descriptor as transmitted.
    pub fn stage_for_transmit(
        &mut self,
        control: Vec<Chunk>,
        descriptors: &mut [&mut ChunkDescriptor],
        template: &Packet,
        mtu: usize,
        now: SimTime,
    ) -> Result<Vec<Vec<u8>>, PipelineError> {
        if control.is_empty() && descriptors.is_empty() {
            return Ok(Vec::new());
        }
        self.calls += 1;
        let mut chunks = control;
        chunks.extend(descriptors.iter().map(|d| self.data_chunk(d)));
        let packets = wire::bundle_chunks(
            chunks,
            mtu,
            template.header.src_port,
            template.header.dst_port,
            template.header.verification_tag,
        )?;
        let mut encoded = Vec::with_capacity(packets.len());
        for p in &packets {
            let bytes = wire::encode_packet(p, mtu)?;
            self.copies
                .record(CopyStage::BundleToNic, bytes.len() as u64);
            encoded.push(bytes);
        }
        for d in descriptors.iter_mut() {
            d.transmit_count += 1;
            d.first_sent_at.get_or_insert(now);
            d.last_sent_at = Some(now);
        }
        Ok(encoded)
    }

    /// Final copy into the NIC.
    pub fn dma_transmit(&mut self, packets: &[Vec<u8>]) {
        for p in packets {
            self.copies.record(CopyStage::NicDma, p.len() as u64);
        }
    }

    /// Marks one chunk of a message acknowledged. Returns true when this
    /// release freed the whole message.
    pub fn release_acked(
        &mut self,
        message_id: MessageId,
        descriptor: &ChunkDescriptor,
    ) -> Result<bool, PipelineError> {
        let msg = self
            .messages
            .get_mut(&message_id)
            .ok_or(PipelineError::DoubleRelease(descriptor.buffer_ref))?;
        let slot = msg
            .released
            .get_mut(descriptor.index)
            .ok_or(PipelineError::UnknownMessage(message_id))?;
        if *slot {
            return Err(PipelineError::DoubleRelease(descriptor.buffer_ref));
        }
        *slot = true;
        msg.unacked_count -= 1;
        if msg.unacked_count > 0 {
            return Ok(false);
        }
        let msg = self.messages.remove(&message_id).unwrap();
        for b in msg.chunk_list {
            self.buffers.remove(&b);
        }
        self.freed_messages += 1;
        Ok(true)
    }
}

/// Concatenates one message's fragments. They must run from a
/// `fragment_begin` chunk to a `fragment_end` chunk over consecutive TSNs.
pub fn reassemble(fragments: &[DataChunk]) -> Result<Vec<u8>, PipelineError> {
    let (first, last) = match (fragments.first(), fragments.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(PipelineError::IncompleteFragments),
    };
    if !first.fragment_begin || !last.fragment_end {
        return Err(PipelineError::IncompleteFragments);
    }
    for w in fragments.windows(2) {
        if w[1].tsn != w[0].tsn.wrapping_add(1) || w[0].fragment_end || w[1].fragment_begin {
            return Err(PipelineError::IncompleteFragments);
        }
    }
    let mut out = Vec::with_capacity(fragments.iter().map(|f| f.user_bytes.len()).sum());
    for f in fragments {
        out.extend_from_slice(&f.user_bytes);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_chunks(descs: &[ChunkDescriptor], p: &SendPipeline, first_tsn: u32) -> Vec<DataChunk> {
        descs
            .iter()
            .enumerate()
            .map(|(i, d)| DataChunk {
                tsn: first_tsn.wrapping_add(i as u32),
                stream_id: d.stream_id,
                ssn: d.ssn,
                ordered: true,
                fragment_begin: d.fragment_begin,
                fragment_end: d.fragment_end,
                user_bytes: p.buffer(d.buffer_ref).unwrap().payload_bytes.clone(),
            })
            .collect()
    }

    #[test]
    fn twelve_kb_into_512() {
        let mut p = SendPipeline::new();
        let (_, d) = p.fragment(&[7u8; 12288], 512, 0, 0, true).unwrap();
        assert_eq!(d.len(), 24);
        assert!(d.iter().all(|c| c.payload_len == 512));
        assert_eq!(p.copies().bytes(CopyStage::UserToMessage), 12288);
    }

    #[test]
    fn twelve_kb_into_1468() {
        let mut p = SendPipeline::new();
        let (_, d) = p.fragment(&[7u8; 12288], 1468, 0, 0, true).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(d.last().unwrap().payload_len, 544);
        assert!(d[0].fragment_begin && !d[0].fragment_end);
        assert!(d[8].fragment_end && !d[8].fragment_begin);
    }

    #[test]
    fn single_fragment_has_both_flags() {
        let mut p = SendPipeline::new();
        let (_, d) = p.fragment(&[1u8; 100], 512, 0, 0, true).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0].fragment_begin && d[0].fragment_end);
        let chunks = to_chunks(&d, &p, 10);
        assert_eq!(reassemble(&chunks).unwrap(), vec![1u8; 100]);
    }

    #[test]
    fn empty_message_rejected() {
        let mut p = SendPipeline::new();
        assert_eq!(
            p.fragment(&[], 512, 0, 0, true).unwrap_err(),
            PipelineError::EmptyMessage
        );
    }

    #[test]
    fn staging_two_512_chunks() {
        let mut p = SendPipeline::new();
        let (_, mut d) = p.fragment(&[3u8; 1024], 512, 0, 0, true).unwrap();
        let template = Packet::new(1, 2, 3);
        let mut refs: Vec<&mut ChunkDescriptor> = d.iter_mut().collect();
        let pkts = p
            .stage_for_transmit(Vec::new(), &mut refs, &template, 1500, SimTime::ZERO)
            .unwrap();
        assert_eq!(pkts.len(), 1);
        assert_eq!(pkts[0].len(), 1068);
        assert_eq!(p.copies().bytes(CopyStage::BundleToNic), 1068);
        p.dma_transmit(&pkts);
        assert_eq!(p.copies().bytes(CopyStage::NicDma), 1068);

        // retransmission skips the user copy
        let mut refs: Vec<&mut ChunkDescriptor> = d.iter_mut().take(1).collect();
        p.stage_for_transmit(
            Vec::new(),
            &mut refs,
            &template,
            1500,
            SimTime::from_secs(1),
        )
        .unwrap();
        assert_eq!(d[0].transmit_count, 2);
        assert_eq!(d[0].first_sent_at, Some(SimTime::ZERO));
        assert_eq!(d[0].last_sent_at, Some(SimTime::from_secs(1)));
        assert_eq!(p.copies().bytes(CopyStage::UserToMessage), 1024);

        let before = *p.copies();
        p.stage_for_transmit(Vec::new(), &mut [], &template, 1500, SimTime::ZERO)
            .unwrap();
        p.dma_transmit(&[]);
        assert_eq!(*p.copies(), before);
    }

    #[test]
    fn message_freed_after_last_ack() {
        let mut p = SendPipeline::new();
        let (id, d) = p.fragment(&[0u8; 12288], 512, 0, 0, true).unwrap();
        for (i, desc) in d.iter().enumerate() {
            let freed = p.release_acked(id, desc).unwrap();
            if i < 23 {
                assert!(!freed);
                assert_eq!(p.live_buffers(), 24);
            } else {
                assert!(freed);
            }
        }
        assert_eq!(p.live_messages(), 0);
        assert_eq!(p.live_buffers(), 0);
        assert_eq!(p.freed_messages(), 1);
        assert!(matches!(
            p.release_acked(id, &d[0]),
            Err(PipelineError::DoubleRelease(_))
        ));
    }

    #[test]
    fn double_release_of_live_message() {
        let mut p = SendPipeline::new();
        let (id, d) = p.fragment(&[0u8; 1024], 512, 0, 0, true).unwrap();
        p.release_acked(id, &d[0]).unwrap();
        assert!(matches!(
            p.release_acked(id, &d[0]),
            Err(PipelineError::DoubleRelease(_))
        ));
        assert_eq!(p.live_messages(), 1);
    }

    #[test]
    fn missing_middle_fragment() {
        let mut p = SendPipeline::new();
        let (_, d) = p.fragment(&[5u8; 1500], 512, 0, 0, true).unwrap();
        let mut chunks = to_chunks(&d, &p, u32::MAX);
        assert_eq!(reassemble(&chunks).unwrap(), vec![5u8; 1500]);
        chunks.remove(1);
        assert_eq!(
            reassemble(&chunks).unwrap_err(),
            PipelineError::IncompleteFragments
        );
    }
}
