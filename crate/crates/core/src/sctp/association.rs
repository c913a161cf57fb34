use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::AssocConfig;
use super::cookie::Cookie;
use super::path::PathState;
use super::stream::{ReceivedMessage, StreamState};
use super::{unwrap_serial, SctpError, Transmit};
use crate::pipeline::{ChunkDescriptor, CopyAccount, CopyStage, MessageId, SendPipeline};
use crate::time::SimTime;
use crate::wire::{
    self, pad4, Chunk, DataChunk, GapBlock, InitChunk, Packet, SackChunk, TagVerdict,
    COMMON_HEADER_LEN, DATA_HEADER_LEN,
};

const TSN_BASE: u64 = 1 << 32;
const MAX_GAP_BLOCKS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AssocState {
    Closed,
    CookieWait,
    CookieEchoed,
    Established,
    ShutdownPending,
    ClosedFinal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AssocEvent {
    State(AssocState),
    Timeout { path: usize, rto: f64 },
    HandshakeRetransmit { path: usize },
    PathDown(usize),
    PathUp(usize),
    PrimaryChanged(usize),
    FastRetransmit(u32),
    Aborted(u16),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AssocStats {
    pub packets_sent: u64,
    pub packets_received: u64,
    pub packets_discarded: u64,
    pub bad_packets: u64,
    pub unknown_chunks: u64,
    pub data_chunks_sent: u64,
    pub data_chunks_retransmitted: u64,
    pub data_chunks_acked: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
    pub stale_sacks: u64,
    pub duplicate_tsns: u64,
    pub sacks_sent: u64,
    pub heartbeats_sent: u64,
    pub messages_delivered: u64,
    pub bytes_delivered: u64,
}

#[derive(Clone, Debug)]
struct Outstanding {
    desc: ChunkDescriptor,
    path: usize,
    misses: u32,
    fast_retransmitted: bool,
    /// Awaiting retransmission; not counted in flight.
    marked: bool,
}

#[derive(Clone, Copy, Debug)]
struct ControlTimer {
    path: usize,
    deadline: SimTime,
    sent_at: SimTime,
    retransmitted: bool,
}

#[derive(Clone, Debug, Default)]
struct Inbound {
    cum: u64,
    above: BTreeSet<u64>,
    packets_since_sack: u32,
    sack_deadline: Option<SimTime>,
    sack_path: usize,
    pkt_data: bool,
    pkt_dup: bool,
}

/// Local side of an association: the port and the addresses it advertises.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub port: u16,
    pub addresses: Vec<u32>,
}

#[derive(Debug)]
pub struct Association {
    state: AssocState,
    config: AssocConfig,
    local_port: u16,
    peer_port: u16,
    local_tag: u32,
    peer_tag: u32,
    next_tsn: u64,
    cumulative_tsn_acked: u64,
    out_streams: Vec<StreamState>,
    in_streams: BTreeMap<u16, StreamState>,
    paths: Vec<PathState>,
    primary: usize,
    preferred_primary: usize,
    pipeline: SendPipeline,
    send_queue: VecDeque<ChunkDescriptor>,
    rtx_queue: BTreeMap<u64, Outstanding>,
    /// Entries of `rtx_queue` with `marked` set.
    marked_count: usize,
    peer_rwnd: u64,
    assoc_error_count: u32,
    fast_recovery: Option<u64>,
    inbound: Inbound,
    init_chunk: Option<InitChunk>,
    cookie_echo: Option<Vec<u8>>,
    control_timer: Option<ControlTimer>,
    init_retransmits: u32,
    shutdown_sent: bool,
    outbox: VecDeque<Transmit>,
    rx_copies: CopyAccount,
    stats: AssocStats,
    events: Vec<(SimTime, AssocEvent)>,
}

fn nonzero_tag(rng: &mut ChaCha8Rng) -> u32 {
    loop {
        let t: u32 = rng.gen();
        if t != 0 {
            return t;
        }
    }
}

impl Association {
    fn blank(
        config: AssocConfig,
        local: &Endpoint,
        peer_port: u16,
        peer_addresses: &[u32],
        local_tag: u32,
        initial_tsn: u32,
    ) -> Self {
        let params = config.rto_params();
        let cwnd = config.initial_cwnd();
        let paths = peer_addresses
            .iter()
            .map(|&a| PathState::new(a, params, cwnd, config.initial_rwnd as u64))
            .collect();
        let next_tsn = TSN_BASE + initial_tsn as u64;
        let out_streams = (0..config.out_streams).map(StreamState::new).collect();
        Association {
            state: AssocState::Closed,
            local_port: local.port,
            peer_port,
            local_tag,
            peer_tag: 0,
            next_tsn,
            cumulative_tsn_acked: next_tsn - 1,
            out_streams,
            in_streams: BTreeMap::new(),
            paths,
            primary: 0,
            preferred_primary: 0,
            pipeline: SendPipeline::new(),
            send_queue: VecDeque::new(),
            rtx_queue: BTreeMap::new(),
            marked_count: 0,
            peer_rwnd: config.initial_rwnd as u64,
            assoc_error_count: 0,
            fast_recovery: None,
            inbound: Inbound::default(),
            init_chunk: None,
            cookie_echo: None,
            control_timer: None,
            init_retransmits: 0,
            shutdown_sent: false,
            outbox: VecDeque::new(),
            rx_copies: CopyAccount::default(),
            stats: AssocStats::default(),
            events: Vec::new(),
            config,
        }
    }

    /// Starts the handshake: INIT goes to the first peer address.
    pub fn initiate(
        config: AssocConfig,
        local: &Endpoint,
        peer_port: u16,
        peer_addresses: &[u32],
        seed: u64,
        now: SimTime,
    ) -> Result<Self, SctpError> {
        if peer_addresses.is_empty() {
            return Err(SctpError::NoAddresses);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let local_tag = nonzero_tag(&mut rng);
        let initial_tsn: u32 = rng.gen();
        let mut a = Self::blank(
            config,
            local,
            peer_port,
            peer_addresses,
            local_tag,
            initial_tsn,
        );
        a.init_chunk = Some(InitChunk {
            initiate_tag: local_tag,
            rwnd: a.config.initial_rwnd,
            out_streams: a.config.out_streams,
            in_streams: u16::MAX,
            initial_tsn,
            addresses: local.addresses.clone(),
            cookie: None,
        });
        a.set_state(now, AssocState::CookieWait);
        a.send_handshake(now, 0, false)?;
        Ok(a)
    }

    /// Builds the listener side from a verified cookie.
    pub(crate) fn from_cookie(
        config: AssocConfig,
        cookie: &Cookie,
        from_path: usize,
        now: SimTime,
    ) -> Self {
        let addresses = if cookie.addresses.is_empty() {
            vec![0]
        } else {
            cookie.addresses.clone()
        };
        let local = Endpoint {
            port: cookie.local_port,
            addresses: Vec::new(),
        };
        let mut config = config;
        config.out_streams = cookie.out_streams;
        let mut a = Self::blank(
            config,
            &local,
            cookie.peer_port,
            &addresses,
            cookie.local_tag,
            cookie.local_initial_tsn,
        );
        a.peer_tag = cookie.peer_tag;
        a.peer_rwnd = cookie.peer_rwnd as u64;
        for p in &mut a.paths {
            p.ssthresh = cookie.peer_rwnd as u64;
        }
        a.inbound.cum = TSN_BASE + cookie.peer_initial_tsn as u64 - 1;
        a.primary = from_path.min(a.paths.len() - 1);
        a.preferred_primary = a.primary;
        a.set_state(now, AssocState::Established);
        a.arm_heartbeats(now);
        a
    }

    pub fn state(&self) -> AssocState {
        self.state
    }

    pub fn config(&self) -> &AssocConfig {
        &self.config
    }

    pub fn local_tag(&self) -> u32 {
        self.local_tag
    }

    pub fn peer_tag(&self) -> u32 {
        self.peer_tag
    }

    pub fn paths(&self) -> &[PathState] {
        &self.paths
    }

    pub fn primary(&self) -> usize {
        self.primary
    }

    pub fn next_tsn(&self) -> u32 {
        self.next_tsn as u32
    }

    pub fn cumulative_tsn_acked(&self) -> u32 {
        self.cumulative_tsn_acked as u32
    }

    pub fn assoc_error_count(&self) -> u32 {
        self.assoc_error_count
    }

    pub fn out_stream_count(&self) -> u16 {
        self.out_streams.len() as u16
    }

    pub fn rtx_queue_len(&self) -> usize {
        self.rtx_queue.len()
    }

    pub fn send_queue_len(&self) -> usize {
        self.send_queue.len()
    }

    /// Payload bytes queued or unacknowledged.
    pub fn unacked_bytes(&self) -> u64 {
        self.send_queue
            .iter()
            .map(|d| d.payload_len as u64)
            .chain(self.rtx_queue.values().map(|o| o.desc.payload_len as u64))
            .sum()
    }

    /// Payload bytes waiting for their first transmission.
    pub fn unsent_bytes(&self) -> u64 {
        self.send_queue.iter().map(|d| d.payload_len as u64).sum()
    }

    pub fn stats(&self) -> &AssocStats {
        &self.stats
    }

    pub fn pipeline(&self) -> &SendPipeline {
        &self.pipeline
    }

    pub fn copies(&self) -> &CopyAccount {
        self.pipeline.copies()
    }

    pub fn rx_copies(&self) -> &CopyAccount {
        &self.rx_copies
    }

    pub fn events(&self) -> &[(SimTime, AssocEvent)] {
        &self.events
    }

    pub fn stream(&self, stream_id: u16) -> Option<&StreamState> {
        self.in_streams.get(&stream_id)
    }

    pub fn is_closed(&self) -> bool {
        self.state == AssocState::ClosedFinal
    }

    pub fn poll_transmit(&mut self) -> Option<Transmit> {
        self.outbox.pop_front()
    }

    fn set_state(&mut self, now: SimTime, s: AssocState) {
        if self.state != s {
            self.state = s;
            self.events.push((now, AssocEvent::State(s)));
        }
    }

    fn established(&self) -> bool {
        matches!(
            self.state,
            AssocState::Established | AssocState::ShutdownPending
        )
    }

    fn total_flight(&self) -> u64 {
        self.paths.iter().map(|p| p.flight_size).sum()
    }

    fn advertised_rwnd(&self) -> u32 {
        let held: usize = self.in_streams.values().map(|s| s.held_bytes()).sum();
        self.config.initial_rwnd.saturating_sub(held as u32)
    }

    /// Stages control chunks through the send pipeline and queues them.
    fn send_control(
        &mut self,
        path: usize,
        chunks: Vec<Chunk>,
        tag: u32,
        now: SimTime,
    ) -> Result<(), SctpError> {
        let template = Packet::new(self.local_port, self.peer_port, tag);
        let pkts =
            self.pipeline
                .stage_for_transmit(chunks, &mut [], &template, self.config.mtu, now)?;
        self.pipeline.dma_transmit(&pkts);
        for bytes in pkts {
            self.stats.packets_sent += 1;
            self.outbox.push_back(Transmit {
                path,
                bytes,
                data_chunks: 0,
                retransmitted_chunks: 0,
                first_tsn: None,
            });
        }
        Ok(())
    }

    fn send_handshake(
        &mut self,
        now: SimTime,
        path: usize,
        retransmitted: bool,
    ) -> Result<(), SctpError> {
        let (chunk, tag) = match self.state {
            AssocState::CookieWait => (Chunk::Init(self.init_chunk.clone().unwrap()), 0),
            AssocState::CookieEchoed => (
                Chunk::CookieEcho(self.cookie_echo.clone().unwrap()),
                self.peer_tag,
            ),
            _ => return Ok(()),
        };
        self.send_control(path, vec![chunk], tag, now)?;
        self.control_timer = Some(ControlTimer {
            path,
            deadline: now + self.paths[path].rto_duration(),
            sent_at: now,
            retransmitted,
        });
        Ok(())
    }

    /// Feeds a raw packet received on `from_path`.
    pub fn handle_packet(
        &mut self,
        now: SimTime,
        bytes: &[u8],
        from_path: usize,
    ) -> Result<(), SctpError> {
        if self.is_closed() {
            return Ok(());
        }
        self.stats.packets_received += 1;
        let decoded = match wire::decode_packet(bytes) {
            Ok(d) => d,
            Err(e) => {
                self.stats.bad_packets += 1;
                return Err(e.into());
            }
        };
        self.stats.unknown_chunks += decoded.unknown_chunks as u64;
        let packet = decoded.packet;
        if packet.starts_with_init()
            || wire::verify_tag(&packet, self.local_tag) == TagVerdict::Discard
        {
            self.stats.packets_discarded += 1;
            return Err(SctpError::TagMismatch);
        }
        if self.config.rx_copies {
            self.rx_copies.record(CopyStage::NicDma, bytes.len() as u64);
            self.rx_copies
                .record(CopyStage::BundleToNic, bytes.len() as u64);
        }
        let from_path = from_path.min(self.paths.len() - 1);
        self.inbound.pkt_data = false;
        self.inbound.pkt_dup = false;
        for chunk in packet.chunks {
            self.handle_chunk(now, chunk, from_path)?;
            if self.is_closed() {
                return Ok(());
            }
        }
        if self.inbound.pkt_data {
            self.after_data_packet(now)?;
        }
        self.try_transmit(now)?;
        Ok(())
    }

    /// Applies one chunk that already passed the tag check.
    pub fn handle_chunk(
        &mut self,
        now: SimTime,
        chunk: Chunk,
        from_path: usize,
    ) -> Result<(), SctpError> {
        match chunk {
            Chunk::InitAck(ack) if self.state == AssocState::CookieWait => {
                let Some(cookie) = ack.cookie else {
                    return Ok(());
                };
                self.take_handshake_sample(now, from_path);
                self.peer_tag = ack.initiate_tag;
                self.peer_rwnd = ack.rwnd as u64;
                for p in &mut self.paths {
                    p.ssthresh = ack.rwnd as u64;
                }
                let n = self.config.out_streams.min(ack.in_streams).max(1);
                self.out_streams.truncate(n as usize);
                self.inbound.cum = TSN_BASE + ack.initial_tsn as u64 - 1;
                self.cookie_echo = Some(cookie);
                self.set_state(now, AssocState::CookieEchoed);
                self.send_handshake(now, from_path, false)?;
            }
            Chunk::CookieAck if self.state == AssocState::CookieEchoed => {
                self.take_handshake_sample(now, from_path);
                self.control_timer = None;
                self.set_state(now, AssocState::Established);
                self.arm_heartbeats(now);
            }
            Chunk::CookieEcho(_) if self.established() => {
                // our COOKIE_ACK was lost
                self.send_control(from_path, vec![Chunk::CookieAck], self.peer_tag, now)?;
            }
            Chunk::Data(d) if self.established() => self.receive_data(d, from_path),
            Chunk::Sack(s) if self.established() => self.on_sack(now, &s)?,
            Chunk::Heartbeat(info) => {
                self.send_control(
                    from_path,
                    vec![Chunk::HeartbeatAck(info)],
                    self.peer_tag,
                    now,
                )?;
            }
            Chunk::HeartbeatAck(info) => self.on_heartbeat_ack(now, &info),
            Chunk::Abort { cause } => {
                self.close(now);
                self.events.push((now, AssocEvent::Aborted(cause)));
            }
            Chunk::Shutdown { ack: false, .. } if self.established() => {
                self.send_control(
                    from_path,
                    vec![Chunk::Shutdown {
                        cumulative_tsn_ack: self.inbound.cum as u32,
                        ack: true,
                    }],
                    self.peer_tag,
                    now,
                )?;
                self.close(now);
            }
            Chunk::Shutdown { ack: true, .. } if self.state == AssocState::ShutdownPending => {
                self.close(now);
            }
            _ => {}
        }
        Ok(())
    }

    fn close(&mut self, now: SimTime) {
        self.control_timer = None;
        self.inbound.sack_deadline = None;
        for p in &mut self.paths {
            p.t3_deadline = None;
            p.hb_due_at = SimTime::MAX;
        }
        self.set_state(now, AssocState::ClosedFinal);
    }

    fn take_handshake_sample(&mut self, now: SimTime, from_path: usize) {
        if let Some(t) = self.control_timer {
            if !t.retransmitted && t.path == from_path {
                let sample = now.saturating_sub(t.sent_at).as_secs_f64();
                let _ = self.paths[from_path].update_rto(sample);
            }
        }
    }

    fn arm_heartbeats(&mut self, now: SimTime) {
        if !self.config.heartbeat_enabled {
            return;
        }
        let interval = SimTime::from_secs_f64(self.config.hb_interval);
        for p in &mut self.paths {
            p.hb_due_at = now + interval;
        }
    }

    // ---- receive side ----

    fn receive_data(&mut self, d: DataChunk, from_path: usize) {
        let tsn = unwrap_serial(d.tsn, self.inbound.cum);
        self.inbound.sack_path = from_path;
        self.inbound.pkt_data = true;
        if tsn <= self.inbound.cum || self.inbound.above.contains(&tsn) {
            self.stats.duplicate_tsns += 1;
            self.inbound.pkt_dup = true;
            return;
        }
        self.inbound.above.insert(tsn);
        while self.inbound.above.remove(&(self.inbound.cum + 1)) {
            self.inbound.cum += 1;
        }
        let sid = d.stream_id;
        self.in_streams
            .entry(sid)
            .or_insert_with(|| StreamState::new(sid))
            .accept(tsn, d);
    }

    fn after_data_packet(&mut self, now: SimTime) -> Result<(), SctpError> {
        self.inbound.packets_since_sack += 1;
        if self.inbound.pkt_dup
            || !self.inbound.above.is_empty()
            || self.inbound.packets_since_sack >= self.config.sack_every
        {
            self.send_sack(now)
        } else {
            if self.inbound.sack_deadline.is_none() {
                self.inbound.sack_deadline =
                    Some(now + SimTime::from_secs_f64(self.config.sack_delay));
            }
            Ok(())
        }
    }

    fn gap_blocks(&self) -> Vec<GapBlock> {
        let cum = self.inbound.cum;
        let mut blocks: Vec<GapBlock> = Vec::new();
        let mut run: Option<(u64, u64)> = None;
        for &t in &self.inbound.above {
            run = match run {
                Some((s, e)) if t == e + 1 => Some((s, t)),
                Some((s, e)) => {
                    blocks.push(GapBlock {
                        start: (s - cum).min(u16::MAX as u64) as u16,
                        end: (e - cum).min(u16::MAX as u64) as u16,
                    });
                    Some((t, t))
                }
                None => Some((t, t)),
            };
            if blocks.len() >= MAX_GAP_BLOCKS {
                return blocks;
            }
        }
        if let Some((s, e)) = run {
            blocks.push(GapBlock {
                start: (s - cum).min(u16::MAX as u64) as u16,
                end: (e - cum).min(u16::MAX as u64) as u16,
            });
        }
        blocks
    }

    fn send_sack(&mut self, now: SimTime) -> Result<(), SctpError> {
        let sack = SackChunk {
            cumulative_tsn_ack: self.inbound.cum as u32,
            advertised_rwnd: self.advertised_rwnd(),
            gap_blocks: self.gap_blocks(),
        };
        self.inbound.packets_since_sack = 0;
        self.inbound.sack_deadline = None;
        self.stats.sacks_sent += 1;
        let path = self.inbound.sack_path.min(self.paths.len() - 1);
        self.send_control(path, vec![Chunk::Sack(sack)], self.peer_tag, now)
    }

    /// Hands complete in-order messages of one stream to the application.
    pub fn deliver(&mut self, stream_id: u16) -> Vec<ReceivedMessage> {
        let Some(s) = self.in_streams.get_mut(&stream_id) else {
            return Vec::new();
        };
        let msgs = s.deliver();
        self.count_delivered(&msgs);
        msgs
    }

    /// Delivers across every stream in stream-id order.
    pub fn deliver_all(&mut self) -> Vec<ReceivedMessage> {
        let mut msgs = Vec::new();
        for s in self.in_streams.values_mut() {
            if s.has_ready() {
                msgs.append(&mut s.deliver());
            }
        }
        self.count_delivered(&msgs);
        msgs
    }

    fn count_delivered(&mut self, msgs: &[ReceivedMessage]) {
        for m in msgs {
            self.stats.messages_delivered += 1;
            self.stats.bytes_delivered += m.payload.len() as u64;
            if self.config.rx_copies {
                self.rx_copies
                    .record(CopyStage::UserToMessage, m.payload.len() as u64);
            }
        }
    }

    // ---- send side ----

    pub fn send_message(
        &mut self,
        now: SimTime,
        stream_id: u16,
        payload: &[u8],
        ordered: bool,
    ) -> Result<MessageId, SctpError> {
        let id = self.enqueue_message(stream_id, payload, ordered)?;
        self.try_transmit(now)?;
        Ok(id)
    }

    /// Queues several messages before transmitting, so small messages are
    /// bundled as a burst of writes would be.
    pub fn send_messages(
        &mut self,
        now: SimTime,
        messages: &[(u16, &[u8])],
        ordered: bool,
    ) -> Result<Vec<MessageId>, SctpError> {
        let mut ids = Vec::with_capacity(messages.len());
        for &(stream, payload) in messages {
            ids.push(self.enqueue_message(stream, payload, ordered)?);
        }
        self.try_transmit(now)?;
        Ok(ids)
    }

    fn enqueue_message(
        &mut self,
        stream_id: u16,
        payload: &[u8],
        ordered: bool,
    ) -> Result<MessageId, SctpError> {
        if self.state != AssocState::Established {
            return Err(SctpError::NotEstablished);
        }
        let Some(stream) = self.out_streams.get(stream_id as usize) else {
            return Err(SctpError::BadStream(stream_id));
        };
        let ssn = if ordered { stream.next_ssn_out } else { 0 };
        let (id, descs) =
            self.pipeline
                .fragment(payload, self.config.chunk_size, stream_id, ssn, ordered)?;
        if ordered {
            let s = &mut self.out_streams[stream_id as usize];
            s.next_ssn_out = s.next_ssn_out.wrapping_add(1);
        }
        for mut d in descs {
            d.tsn = self.next_tsn;
            self.next_tsn += 1;
            self.send_queue.push_back(d);
        }
        Ok(id)
    }

    /// Picks chunks for one packet: marked retransmissions first, then new
    /// data. Returns (retransmission TSNs, count of new chunks).
    fn select_packet(&self, respect_window: bool) -> (Vec<u64>, usize) {
        let budget = self.config.mtu - COMMON_HEADER_LEN;
        let flight = self.total_flight();
        let mut used = 0usize;
        let mut payload = 0u64;
        let mut rtx = Vec::new();
        let fits = |len: usize, used: &mut usize, payload: &mut u64, first: bool| -> bool {
            let wire = pad4(DATA_HEADER_LEN + len);
            if *used + wire > budget {
                return false;
            }
            if respect_window && *payload + len as u64 > self.peer_rwnd && !(first && flight == 0) {
                return false;
            }
            *used += wire;
            *payload += len as u64;
            true
        };
        let mut blocked = false;
        let marked = self.rtx_queue.iter().filter(|(_, o)| o.marked);
        for (t, o) in marked.take(self.marked_count) {
            if !fits(o.desc.payload_len, &mut used, &mut payload, rtx.is_empty()) {
                blocked = true;
                break;
            }
            rtx.push(*t);
        }
        let mut new = 0;
        if !blocked {
            for d in &self.send_queue {
                if !fits(
                    d.payload_len,
                    &mut used,
                    &mut payload,
                    rtx.is_empty() && new == 0,
                ) {
                    break;
                }
                new += 1;
            }
        }
        (rtx, new)
    }

    fn try_transmit(&mut self, now: SimTime) -> Result<(), SctpError> {
        if !self.established() {
            return Ok(());
        }
        let p = self.primary;
        let mut burst = 0;
        loop {
            if self.config.max_burst > 0 && burst >= self.config.max_burst {
                break;
            }
            burst += 1;
            if self.paths[p].flight_size >= self.paths[p].cwnd {
                break;
            }
            let (rtx, new) = self.select_packet(true);
            if rtx.is_empty() && new == 0 {
                break;
            }
            self.transmit_chunks(now, p, rtx, new)?;
        }
        self.check_shutdown(now)
    }

    /// One packet of marked chunks on the best active path, ignoring cwnd.
    fn retransmit_one_packet(&mut self, now: SimTime) -> Result<(), SctpError> {
        let (rtx, _) = self.select_packet(false);
        if rtx.is_empty() {
            return Ok(());
        }
        self.transmit_chunks(now, self.primary, rtx, 0)
    }

    fn transmit_chunks(
        &mut self,
        now: SimTime,
        path: usize,
        rtx: Vec<u64>,
        new: usize,
    ) -> Result<(), SctpError> {
        let mut tsns: BTreeSet<u64> = rtx.into_iter().collect();
        for _ in 0..new {
            let d = self.send_queue.pop_front().unwrap();
            tsns.insert(d.tsn);
            self.marked_count += 1;
            self.rtx_queue.insert(
                d.tsn,
                Outstanding {
                    desc: d,
                    path,
                    misses: 0,
                    fast_retransmitted: false,
                    marked: true,
                },
            );
        }
        let template = Packet::new(self.local_port, self.peer_port, self.peer_tag);
        let (lo, hi) = match (tsns.first(), tsns.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Ok(()),
        };
        let pkts = {
            let mut refs: Vec<&mut ChunkDescriptor> = self
                .rtx_queue
                .range_mut(lo..=hi)
                .filter(|(t, _)| tsns.contains(t))
                .map(|(_, o)| &mut o.desc)
                .collect();
            self.pipeline.stage_for_transmit(
                Vec::new(),
                &mut refs,
                &template,
                self.config.mtu,
                now,
            )?
        };
        self.pipeline.dma_transmit(&pkts);
        let mut retransmitted = 0;
        for t in &tsns {
            let o = self.rtx_queue.get_mut(t).unwrap();
            let len = o.desc.payload_len as u64;
            let again = o.desc.transmit_count > 1;
            if o.marked {
                self.marked_count -= 1;
            }
            o.marked = false;
            o.path = path;
            o.misses = 0;
            let ps = &mut self.paths[path];
            ps.flight_size += len;
            self.peer_rwnd = self.peer_rwnd.saturating_sub(len);
            if again {
                retransmitted += 1;
                if ps.timed.map(|(x, _)| x) == Some(*t) {
                    ps.timed = None;
                }
            } else if ps.timed.is_none() {
                ps.timed = Some((*t, now));
            }
        }
        let ps = &mut self.paths[path];
        ps.last_data_sent = Some(now);
        if ps.t3_deadline.is_none() {
            ps.t3_deadline = Some(now + ps.rto_duration());
        }
        self.stats.data_chunks_sent += tsns.len() as u64;
        self.stats.data_chunks_retransmitted += retransmitted as u64;
        let first = tsns.iter().next().map(|t| *t as u32);
        let n = pkts.len();
        for (i, bytes) in pkts.into_iter().enumerate() {
            self.stats.packets_sent += 1;
            self.outbox.push_back(Transmit {
                path,
                bytes,
                // single packet in practice; attribute counts to the first
                data_chunks: if i == 0 { tsns.len() as u32 } else { 0 },
                retransmitted_chunks: if i == 0 { retransmitted } else { 0 },
                first_tsn: if i == 0 { first } else { None },
            });
        }
        debug_assert!(n <= 1);
        Ok(())
    }

    fn mark_for_retransmit(&mut self, tsn: u64) {
        let o = self.rtx_queue.get_mut(&tsn).unwrap();
        if o.marked {
            return;
        }
        o.marked = true;
        self.marked_count += 1;
        let ps = &mut self.paths[o.path];
        ps.flight_size -= o.desc.payload_len as u64;
        if ps.timed.map(|(x, _)| x) == Some(tsn) {
            ps.timed = None;
        }
    }

    fn ack_chunk(&mut self, now: SimTime, o: Outstanding, acked: &mut [u64]) {
        let len = o.desc.payload_len as u64;
        let ps = &mut self.paths[o.path];
        if o.marked {
            self.marked_count -= 1;
        } else {
            ps.flight_size -= len;
        }
        acked[o.path] += len;
        ps.error_count = 0;
        if let Some((t, at)) = ps.timed {
            if t == o.desc.tsn {
                if o.desc.transmit_count == 1 {
                    let _ = ps.update_rto(now.saturating_sub(at).as_secs_f64());
                }
                ps.timed = None;
            }
        }
        self.stats.data_chunks_acked += 1;
        let released = self.pipeline.release_acked(o.desc.message_id, &o.desc);
        debug_assert!(released.is_ok(), "{released:?}");
    }

    /// Processes a selective acknowledgement.
    pub fn on_sack(&mut self, now: SimTime, sack: &SackChunk) -> Result<(), SctpError> {
        if !self.established() {
            return Ok(());
        }
        let cum = unwrap_serial(sack.cumulative_tsn_ack, self.cumulative_tsn_acked);
        if cum < self.cumulative_tsn_acked || cum >= self.next_tsn {
            self.stats.stale_sacks += 1;
            return Ok(());
        }
        let old_cum = self.cumulative_tsn_acked;
        let mut newly: Vec<u64> = self.rtx_queue.range(..=cum).map(|(t, _)| *t).collect();
        let mut highest_gap: Option<u64> = None;
        for g in &sack.gap_blocks {
            if g.start == 0 || g.start > g.end {
                continue;
            }
            let (s, e) = (cum + g.start as u64, cum + g.end as u64);
            newly.extend(self.rtx_queue.range(s..=e).map(|(t, _)| *t));
            highest_gap = Some(highest_gap.map_or(e, |h: u64| h.max(e)));
        }
        let mut acked = vec![0u64; self.paths.len()];
        let any = !newly.is_empty();
        for t in newly {
            if let Some(o) = self.rtx_queue.remove(&t) {
                self.ack_chunk(now, o, &mut acked);
            }
        }
        self.cumulative_tsn_acked = cum;
        let advanced = cum > old_cum;
        if any {
            self.assoc_error_count = 0;
        }

        let mut fast = Vec::new();
        if let Some(h) = highest_gap {
            let threshold = self.config.fast_rtx_threshold;
            for (t, o) in self.rtx_queue.range_mut(..h) {
                if o.marked || o.fast_retransmitted {
                    continue;
                }
                o.misses += 1;
                if o.misses >= threshold {
                    fast.push(*t);
                }
            }
        }

        let mtu = self.config.mtu as u64;
        let in_recovery = self.fast_recovery.is_some();
        for (p, &bytes) in acked.iter().enumerate() {
            if bytes == 0 || !advanced || in_recovery {
                continue;
            }
            let ps = &mut self.paths[p];
            if ps.cwnd <= ps.ssthresh {
                ps.cwnd += bytes.min(mtu);
            } else {
                ps.partial_bytes_acked += bytes;
                if ps.partial_bytes_acked >= ps.cwnd {
                    ps.partial_bytes_acked -= ps.cwnd;
                    ps.cwnd += mtu;
                }
            }
        }
        if let Some(exit) = self.fast_recovery {
            if cum >= exit {
                self.fast_recovery = None;
            }
        }

        if !fast.is_empty() {
            let mut reduced = vec![false; self.paths.len()];
            let entering = self.fast_recovery.is_none();
            for &t in &fast {
                let p = {
                    let o = self.rtx_queue.get_mut(&t).unwrap();
                    o.fast_retransmitted = true;
                    o.path
                };
                self.mark_for_retransmit(t);
                if entering && !reduced[p] {
                    let ps = &mut self.paths[p];
                    ps.ssthresh = (ps.cwnd / 2).max(4 * mtu);
                    ps.cwnd = ps.ssthresh;
                    ps.partial_bytes_acked = 0;
                    reduced[p] = true;
                }
                self.events
                    .push((now, AssocEvent::FastRetransmit(t as u32)));
            }
            if entering {
                // queued messages already hold TSNs, so the exit point is the
                // highest one actually sent
                let sent = self.rtx_queue.keys().next_back().copied();
                self.fast_recovery = Some(sent.unwrap_or(cum).max(highest_gap.unwrap_or(cum)));
            }
            self.stats.fast_retransmits += fast.len() as u64;
        }

        self.peer_rwnd = (sack.advertised_rwnd as u64).saturating_sub(self.total_flight());

        for (p, &bytes) in acked.iter().enumerate() {
            let ps = &mut self.paths[p];
            if ps.flight_size == 0 {
                ps.t3_deadline = None;
            } else if bytes > 0 && advanced {
                ps.t3_deadline = Some(now + ps.rto_duration());
            }
        }
        if !fast.is_empty() {
            self.retransmit_one_packet(now)?;
        }
        self.try_transmit(now)
    }

    /// Retransmission timer expiry for `path`.
    pub fn on_timeout(&mut self, path: usize, now: SimTime) -> Result<(), SctpError> {
        if !self.established() || path >= self.paths.len() {
            return Ok(());
        }
        self.paths[path].t3_deadline = None;
        let victims: Vec<u64> = self
            .rtx_queue
            .iter()
            .filter(|(_, o)| !o.marked && o.path == path)
            .map(|(t, _)| *t)
            .collect();
        if victims.is_empty() {
            return Ok(());
        }
        self.stats.timeouts += 1;
        let mtu = self.config.mtu as u64;
        {
            let ps = &mut self.paths[path];
            let rto = ps.rto.backoff();
            ps.ssthresh = (ps.cwnd / 2).max(4 * mtu);
            ps.cwnd = mtu;
            ps.partial_bytes_acked = 0;
            ps.error_count += 1;
            self.events.push((now, AssocEvent::Timeout { path, rto }));
        }
        for t in victims {
            self.mark_for_retransmit(t);
        }
        self.fast_recovery = None;
        self.assoc_error_count += 1;
        if self.paths[path].error_count > self.config.path_max_retrans {
            self.deactivate(now, path);
        }
        if self.assoc_error_count > self.config.assoc_max_retrans {
            return self.abort(now, wire::CAUSE_RETRANS_LIMIT);
        }
        self.retransmit_one_packet(now)?;
        self.try_transmit(now)
    }

    fn deactivate(&mut self, now: SimTime, path: usize) {
        if !self.paths[path].active {
            return;
        }
        self.paths[path].active = false;
        self.events.push((now, AssocEvent::PathDown(path)));
        if path == self.primary {
            if let Some(alt) = self.paths.iter().position(|p| p.active) {
                self.primary = alt;
                self.events.push((now, AssocEvent::PrimaryChanged(alt)));
            }
        }
    }

    fn reactivate(&mut self, now: SimTime, path: usize) {
        if self.paths[path].active {
            return;
        }
        self.paths[path].active = true;
        self.events.push((now, AssocEvent::PathUp(path)));
        let current_ok = self.paths[self.primary].active && self.primary != path;
        if path == self.preferred_primary || !current_ok {
            if self.primary != path {
                self.primary = path;
                self.events.push((now, AssocEvent::PrimaryChanged(path)));
            }
        }
    }

    /// Sends ABORT (when the peer is known) and closes.
    pub fn abort(&mut self, now: SimTime, cause: u16) -> Result<(), SctpError> {
        if self.peer_tag != 0 && !self.is_closed() {
            let p = self.primary;
            self.send_control(p, vec![Chunk::Abort { cause }], self.peer_tag, now)?;
        }
        self.close(now);
        self.events.push((now, AssocEvent::Aborted(cause)));
        Ok(())
    }

    /// Explicit RTO update for `path` from a sample taken elsewhere.
    pub fn update_rto(&mut self, path: usize, sample: f64) -> Result<f64, SctpError> {
        let ps = self.paths.get_mut(path).ok_or(SctpError::BadPath(path))?;
        Ok(ps.update_rto(sample)?)
    }

    // ---- heartbeats ----

    /// Sends a HEARTBEAT on `path` if it is idle or inactive. Returns whether
    /// one was sent. An unanswered previous heartbeat counts as a path error.
    pub fn heartbeat_tick(&mut self, path: usize, now: SimTime) -> Result<bool, SctpError> {
        if !self.established() || path >= self.paths.len() {
            return Ok(false);
        }
        let interval = SimTime::from_secs_f64(self.config.hb_interval);
        let (idle, strike) = {
            let ps = &mut self.paths[path];
            let strike = ps.hb_outstanding;
            if strike {
                ps.error_count += 1;
                ps.hb_outstanding = false;
            }
            ps.hb_due_at = now + interval;
            let idle = !ps.active
                || ps
                    .last_data_sent
                    .map_or(true, |t| now.saturating_sub(t) >= interval);
            (idle, strike)
        };
        if strike && self.paths[path].error_count > self.config.path_max_retrans {
            self.deactivate(now, path);
        }
        if !idle {
            return Ok(false);
        }
        let mut info = Vec::with_capacity(10);
        info.extend_from_slice(&(path as u16).to_be_bytes());
        info.extend_from_slice(&now.as_nanos().to_be_bytes());
        self.send_control(path, vec![Chunk::Heartbeat(info)], self.peer_tag, now)?;
        self.paths[path].hb_outstanding = true;
        self.stats.heartbeats_sent += 1;
        Ok(true)
    }

    fn on_heartbeat_ack(&mut self, now: SimTime, info: &[u8]) {
        if info.len() != 10 {
            return;
        }
        let path = u16::from_be_bytes([info[0], info[1]]) as usize;
        if path >= self.paths.len() {
            return;
        }
        let sent = SimTime::from_nanos(u64::from_be_bytes(info[2..10].try_into().unwrap()));
        let ps = &mut self.paths[path];
        let _ = ps.update_rto(now.saturating_sub(sent).as_secs_f64());
        ps.error_count = 0;
        ps.hb_outstanding = false;
        self.reactivate(now, path);
    }

    // ---- shutdown ----

    /// Graceful close once all outstanding data is acknowledged.
    pub fn shutdown(&mut self, now: SimTime) -> Result<(), SctpError> {
        if self.state == AssocState::Established {
            self.set_state(now, AssocState::ShutdownPending);
        }
        self.check_shutdown(now)
    }

    fn check_shutdown(&mut self, now: SimTime) -> Result<(), SctpError> {
        if self.state != AssocState::ShutdownPending
            || self.shutdown_sent
            || !self.rtx_queue.is_empty()
            || !self.send_queue.is_empty()
        {
            return Ok(());
        }
        self.shutdown_sent = true;
        self.send_shutdown(now, false)
    }

    fn send_shutdown(&mut self, now: SimTime, retransmitted: bool) -> Result<(), SctpError> {
        let p = self.primary;
        self.send_control(
            p,
            vec![Chunk::Shutdown {
                cumulative_tsn_ack: self.inbound.cum as u32,
                ack: false,
            }],
            self.peer_tag,
            now,
        )?;
        self.control_timer = Some(ControlTimer {
            path: p,
            deadline: now + self.paths[p].rto_duration(),
            sent_at: now,
            retransmitted,
        });
        Ok(())
    }

    fn on_control_timeout(&mut self, now: SimTime) -> Result<(), SctpError> {
        let Some(t) = self.control_timer.take() else {
            return Ok(());
        };
        {
            let ps = &mut self.paths[t.path];
            ps.error_count += 1;
            ps.rto.backoff();
        }
        self.stats.timeouts += 1;
        if self.paths[t.path].error_count > self.config.path_max_retrans {
            self.deactivate(now, t.path);
        }
        match self.state {
            AssocState::CookieWait | AssocState::CookieEchoed => {
                self.init_retransmits += 1;
                if self.init_retransmits > self.config.max_init_retransmits {
                    self.close(now);
                    self.events
                        .push((now, AssocEvent::Aborted(wire::CAUSE_INIT_LIMIT)));
                    return Ok(());
                }
                let n = self.paths.len();
                let next = (1..=n)
                    .map(|k| (t.path + k) % n)
                    .find(|&p| self.paths[p].active)
                    .unwrap_or((t.path + 1) % n);
                self.events
                    .push((now, AssocEvent::HandshakeRetransmit { path: next }));
                self.send_handshake(now, next, true)
            }
            AssocState::ShutdownPending => {
                self.assoc_error_count += 1;
                if self.assoc_error_count > self.config.assoc_max_retrans {
                    return self.abort(now, wire::CAUSE_RETRANS_LIMIT);
                }
                self.send_shutdown(now, true)
            }
            _ => Ok(()),
        }
    }

    // ---- timers ----

    pub fn poll_timeout(&self) -> Option<SimTime> {
        if self.is_closed() {
            return None;
        }
        let mut next = self.control_timer.map(|t| t.deadline);
        let mut consider = |t: Option<SimTime>| {
            if let Some(t) = t {
                next = Some(next.map_or(t, |n: SimTime| n.min(t)));
            }
        };
        consider(self.inbound.sack_deadline);
        for p in &self.paths {
            consider(p.t3_deadline);
            if self.config.heartbeat_enabled && self.established() && p.hb_due_at != SimTime::MAX {
                consider(Some(p.hb_due_at));
            }
        }
        next
    }

    /// Fires every timer due at or before `now`.
    pub fn handle_timeout(&mut self, now: SimTime) -> Result<(), SctpError> {
        if self.control_timer.is_some_and(|t| t.deadline <= now) {
            self.on_control_timeout(now)?;
        }
        for p in 0..self.paths.len() {
            if self.paths[p].t3_deadline.is_some_and(|d| d <= now) {
                self.on_timeout(p, now)?;
            }
        }
        if self.inbound.sack_deadline.is_some_and(|d| d <= now) {
            self.send_sack(now)?;
        }
        if self.config.heartbeat_enabled && self.established() {
            for p in 0..self.paths.len() {
                if self.paths[p].hb_due_at <= now {
                    self.heartbeat_tick(p, now)?;
                }
            }
        }
        Ok(())
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let marked = self.rtx_queue.values().filter(|o| o.marked).count();
        if marked != self.marked_count {
            return Err(format!("marked_count {} != {marked}", self.marked_count));
        }
        for (i, p) in self.paths.iter().enumerate() {
            let flight: u64 = self
                .rtx_queue
                .values()
                .filter(|o| !o.marked && o.path == i)
                .map(|o| o.desc.payload_len as u64)
                .sum();
            if flight != p.flight_size {
                return Err(format!(
                    "path {i}: flight_size {} != outstanding {flight}",
                    p.flight_size
                ));
            }
            let rto = p.rto();
            if rto < self.config.rto_min || rto > self.config.rto_max {
                return Err(format!("path {i}: rto {rto} out of range"));
            }
            if p.active && p.error_count > self.config.path_max_retrans {
                return Err(format!("path {i}: active with {} errors", p.error_count));
            }
            if p.active && p.cwnd < self.config.mtu as u64 {
                return Err(format!("path {i}: cwnd {} below one mtu", p.cwnd));
            }
        }
        if self.paths.iter().any(|p| p.active) && !self.paths[self.primary].active {
            return Err("primary path inactive while another is active".into());
        }
        if self.next_tsn <= self.cumulative_tsn_acked {
            return Err("next_tsn not ahead of cumulative ack".into());
        }
        if !self.is_closed() && self.assoc_error_count > self.config.assoc_max_retrans {
            return Err("association error count over limit".into());
        }
        Ok(())
    }
}
