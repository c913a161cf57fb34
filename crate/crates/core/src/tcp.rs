//! Minimal TCP Reno: three-way handshake, one ordered byte stream,
//! cumulative acks, fast retransmit and fast recovery, go-back-N on timeout.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::pipeline::{CopyAccount, CopyStage};
use crate::rto::{RtoEstimator, RtoParams};
use crate::sctp::unwrap_serial;
use crate::time::SimTime;

pub const FLAG_SYN: u8 = 0x01;
pub const FLAG_ACK: u8 = 0x02;
pub const FLAG_FIN: u8 = 0x04;

/// IP plus TCP header bytes, no options.
pub const HEADER_LEN: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TcpConfig {
    pub mss: usize,
    pub initial_cwnd: u64,
    pub rwnd: u32,
    pub rto: RtoParams,
    pub dupack_threshold: u32,
    pub delayed_ack: bool,
    pub ack_delay: f64,
    pub max_retrans: u32,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            mss: 1460,
            initial_cwnd: 4380,
            rwnd: 65536,
            rto: RtoParams::default(),
            dupack_threshold: 3,
            delayed_ack: false,
            ack_delay: 0.2,
            max_retrans: 10,
        }
    }
}

impl TcpConfig {
    pub fn with_mtu(mtu: usize) -> Self {
        TcpConfig {
            mss: mtu - HEADER_LEN,
            ..TcpConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TcpSegment {
    pub seq: u32,
    pub ack: u32,
    pub flags: u8,
    pub window: u32,
    pub payload: Vec<u8>,
}

impl TcpSegment {
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn has(&self, flag: u8) -> bool {
        self.flags & flag != 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TcpState {
    Closed,
    SynSent,
    SynRcvd,
    Established,
    Closing,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TcpStats {
    pub segments_sent: u64,
    pub data_segments_sent: u64,
    pub retransmitted_segments: u64,
    pub segments_received: u64,
    pub dup_acks: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
    pub bytes_acked: u64,
    /// First-transmitted data segments covered by a cumulative ack.
    pub segments_acked: u64,
    pub bytes_delivered: u64,
}

#[derive(Clone, Debug)]
pub struct TcpConnection {
    config: TcpConfig,
    state: TcpState,
    isn: u64,
    snd_una: u64,
    snd_nxt: u64,
    high_tx: u64,
    /// Bytes from snd_una onward, sent or not.
    send_buf: VecDeque<u8>,
    peer_window: u64,
    cwnd: u64,
    ssthresh: u64,
    dup_ack_count: u32,
    recover: Option<u64>,
    rto: RtoEstimator,
    timer: Option<SimTime>,
    timed: Option<(u64, SimTime)>,
    retries: u32,
    fin_queued: bool,
    fin_sent: bool,
    irs: u64,
    rcv_nxt: u64,
    reorder: BTreeMap<u64, Vec<u8>>,
    readable: VecDeque<u8>,
    unacked_segments: u32,
    ack_deadline: Option<SimTime>,
    outbox: VecDeque<TcpSegment>,
    copies: CopyAccount,
    stats: TcpStats,
    cwnd_trace: Vec<(SimTime, u64)>,
    segment_ends: VecDeque<u64>,
}

impl TcpConnection {
    fn new(config: TcpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let isn = (1u64 << 32) + rng.gen::<u32>() as u64;
        TcpConnection {
            state: TcpState::Closed,
            isn,
            snd_una: isn,
            snd_nxt: isn,
            high_tx: isn,
            send_buf: VecDeque::new(),
            peer_window: config.rwnd as u64,
            cwnd: config.initial_cwnd,
            ssthresh: config.rwnd as u64,
            dup_ack_count: 0,
            recover: None,
            rto: RtoEstimator::new(config.rto),
            timer: None,
            timed: None,
            retries: 0,
            fin_queued: false,
            fin_sent: false,
            irs: 0,
            rcv_nxt: 0,
            reorder: BTreeMap::new(),
            readable: VecDeque::new(),
            unacked_segments: 0,
            ack_deadline: None,
            outbox: VecDeque::new(),
            copies: CopyAccount::default(),
            stats: TcpStats::default(),
            cwnd_trace: Vec::new(),
            segment_ends: VecDeque::new(),
            config,
        }
    }

    /// Active open: queues a SYN.
    pub fn connect(config: TcpConfig, seed: u64, now: SimTime) -> Self {
        let mut c = Self::new(config, seed);
        c.state = TcpState::SynSent;
        c.send_syn(now);
        c
    }

    /// Passive open: waits for a SYN.
    pub fn listen(config: TcpConfig, seed: u64) -> Self {
        Self::new(config, seed)
    }

    pub fn state(&self) -> TcpState {
        self.state
    }

    pub fn config(&self) -> &TcpConfig {
        &self.config
    }

    pub fn cwnd(&self) -> u64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> u64 {
        self.ssthresh
    }

    pub fn rto(&self) -> f64 {
        self.rto.rto()
    }

    pub fn srtt(&self) -> Option<f64> {
        self.rto.srtt()
    }

    pub fn dup_ack_count(&self) -> u32 {
        self.dup_ack_count
    }

    pub fn in_recovery(&self) -> bool {
        self.recover.is_some()
    }

    pub fn snd_una(&self) -> u32 {
        self.snd_una as u32
    }

    pub fn snd_nxt(&self) -> u32 {
        self.snd_nxt as u32
    }

    pub fn rcv_nxt(&self) -> u32 {
        self.rcv_nxt as u32
    }

    pub fn flight_size(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    /// Bytes written but not yet acknowledged.
    pub fn unacked_bytes(&self) -> u64 {
        self.send_buf.len() as u64
    }

    /// Bytes written but never sent.
    pub fn unsent_bytes(&self) -> u64 {
        (self.snd_una + self.send_buf.len() as u64).saturating_sub(self.high_tx)
    }

    pub fn stats(&self) -> &TcpStats {
        &self.stats
    }

    pub fn copies(&self) -> &CopyAccount {
        &self.copies
    }

    /// cwnd after every change, in bytes.
    pub fn cwnd_trace(&self) -> &[(SimTime, u64)] {
        &self.cwnd_trace
    }

    pub fn poll_transmit(&mut self) -> Option<TcpSegment> {
        self.outbox.pop_front()
    }

    pub fn poll_timeout(&self) -> Option<SimTime> {
        match (self.timer, self.ack_deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn set_cwnd(&mut self, now: SimTime, cwnd: u64) {
        self.cwnd = cwnd;
        self.cwnd_trace.push((now, cwnd));
    }

    fn window(&self) -> u32 {
        self.config.rwnd.saturating_sub(self.readable.len() as u32)
    }

    fn emit(&mut self, seq: u64, flags: u8, payload: Vec<u8>) {
        let seg = TcpSegment {
            seq: seq as u32,
            ack: self.rcv_nxt as u32,
            flags,
            window: self.window(),
            payload,
        };
        self.copies.record(CopyStage::NicDma, seg.wire_len() as u64);
        self.stats.segments_sent += 1;
        self.outbox.push_back(seg);
    }

    fn send_syn(&mut self, now: SimTime) {
        let flags = if self.state == TcpState::SynRcvd {
            FLAG_SYN | FLAG_ACK
        } else {
            FLAG_SYN
        };
        self.emit(self.isn, flags, Vec::new());
        self.snd_nxt = self.isn + 1;
        self.high_tx = self.high_tx.max(self.snd_nxt);
        self.timer = Some(now + SimTime::from_secs_f64(self.rto.rto()));
        if self.retries == 0 {
            self.timed = Some((self.isn + 1, now));
        }
    }

    fn send_ack(&mut self) {
        self.unacked_segments = 0;
        self.ack_deadline = None;
        self.emit(self.snd_nxt, FLAG_ACK, Vec::new());
    }

    /// Appends application bytes to the stream.
    pub fn write(&mut self, now: SimTime, bytes: &[u8]) {
        self.copies
            .record(CopyStage::UserToMessage, bytes.len() as u64);
        self.send_buf.extend(bytes);
        self.try_send(now);
    }

    /// Sends FIN once everything written has been acknowledged.
    pub fn close(&mut self, now: SimTime) {
        self.fin_queued = true;
        self.try_send(now);
    }

    /// Takes every in-order byte received so far.
    pub fn read(&mut self) -> Vec<u8> {
        let (a, b) = self.readable.as_slices();
        let out = [a, b].concat();
        self.readable.clear();
        self.stats.bytes_delivered += out.len() as u64;
        out
    }

    fn data_end(&self) -> u64 {
        self.snd_una + self.send_buf.len() as u64
    }

    fn segment_at(&self, seq: u64) -> Vec<u8> {
        let start = (seq - self.snd_una) as usize;
        let end = (start + self.config.mss).min(self.send_buf.len());
        deque_bytes(&self.send_buf, start, end)
    }

    fn transmit_data(&mut self, now: SimTime, seq: u64) -> u64 {
        let payload = self.segment_at(seq);
        let len = payload.len() as u64;
        let retransmission = seq < self.high_tx;
        self.stats.data_segments_sent += 1;
        if retransmission {
            self.stats.retransmitted_segments += 1;
            if self.timed.is_some_and(|(end, _)| end > seq) {
                self.timed = None;
            }
        } else {
            self.segment_ends.push_back(seq + len);
            if self.timed.is_none() {
                self.timed = Some((seq + len, now));
            }
        }
        self.emit(seq, FLAG_ACK, payload);
        self.high_tx = self.high_tx.max(seq + len);
        if self.timer.is_none() {
            self.timer = Some(now + SimTime::from_secs_f64(self.rto.rto()));
        }
        len
    }

    fn try_send(&mut self, now: SimTime) {
        if self.state != TcpState::Established {
            return;
        }
        let limit = self.cwnd.min(self.peer_window);
        while self.snd_nxt < self.data_end() {
            let avail = (self.data_end() - self.snd_nxt).min(self.config.mss as u64);
            // an empty pipe always gets one segment so a small window cannot stall
            if self.flight_size() + avail > limit && self.flight_size() > 0 {
                break;
            }
            let n = self.transmit_data(now, self.snd_nxt);
            self.snd_nxt += n;
        }
        if self.fin_queued && !self.fin_sent && self.send_buf.is_empty() {
            self.fin_sent = true;
            self.emit(self.snd_nxt, FLAG_FIN | FLAG_ACK, Vec::new());
            self.snd_nxt += 1;
            self.high_tx = self.high_tx.max(self.snd_nxt);
            self.state = TcpState::Closing;
            if self.timer.is_none() {
                self.timer = Some(now + SimTime::from_secs_f64(self.rto.rto()));
            }
        }
    }

    pub fn handle_segment(&mut self, now: SimTime, seg: &TcpSegment) {
        self.stats.segments_received += 1;
        match self.state {
            TcpState::Closed => {
                if seg.has(FLAG_SYN) && !seg.has(FLAG_ACK) {
                    self.irs = (1u64 << 32) + seg.seq as u64;
                    self.rcv_nxt = self.irs + 1;
                    self.peer_window = seg.window as u64;
                    self.state = TcpState::SynRcvd;
                    self.send_syn(now);
                }
                return;
            }
            TcpState::SynSent => {
                if seg.has(FLAG_SYN)
                    && seg.has(FLAG_ACK)
                    && seg.ack as u64 == (self.isn + 1) & 0xffff_ffff
                {
                    self.irs = (1u64 << 32) + seg.seq as u64;
                    self.rcv_nxt = self.irs + 1;
                    self.snd_una = self.isn + 1;
                    self.peer_window = seg.window as u64;
                    self.sample_syn(now);
                    self.state = TcpState::Established;
                    self.send_ack();
                    self.try_send(now);
                }
                return;
            }
            TcpState::SynRcvd => {
                if seg.has(FLAG_SYN) {
                    // our SYN-ACK was lost
                    self.emit(self.isn, FLAG_SYN | FLAG_ACK, Vec::new());
                    return;
                }
                if seg.has(FLAG_ACK) && unwrap_serial(seg.ack, self.snd_una) == self.isn + 1 {
                    self.snd_una = self.isn + 1;
                    self.sample_syn(now);
                    self.state = TcpState::Established;
                } else {
                    return;
                }
            }
            TcpState::Established | TcpState::Closing => {
                if seg.has(FLAG_SYN) {
                    // retransmitted SYN-ACK: our final ACK was lost
                    self.send_ack();
                    return;
                }
            }
        }
        if seg.has(FLAG_ACK) {
            self.on_ack(now, seg);
        }
        if !seg.payload.is_empty() || seg.has(FLAG_FIN) {
            self.on_data(now, seg);
        }
        self.try_send(now);
    }

    fn sample_syn(&mut self, now: SimTime) {
        if let Some((_, at)) = self.timed.take() {
            if self.retries == 0 {
                let _ = self.rto.update(now.saturating_sub(at).as_secs_f64());
            }
        }
        self.timer = None;
        self.retries = 0;
    }

    /// Reno ack processing.
    pub fn on_ack(&mut self, now: SimTime, seg: &TcpSegment) {
        let ack = unwrap_serial(seg.ack, self.snd_una);
        let mss = self.config.mss as u64;
        if ack < self.snd_una || ack > self.high_tx {
            return;
        }
        if ack == self.snd_una {
            // the advertised window is not compared: it shrinks by whatever
            // the receiving application has yet to read
            let dup = seg.payload.is_empty() && !seg.has(FLAG_FIN) && self.snd_nxt > self.snd_una;
            self.peer_window = seg.window as u64;
            if !dup {
                return;
            }
            self.stats.dup_acks += 1;
            self.dup_ack_count += 1;
            if self.dup_ack_count == self.config.dupack_threshold && self.recover.is_none() {
                let flight = self.flight_size();
                self.ssthresh = (flight / 2).max(2 * mss);
                self.recover = Some(self.high_tx);
                self.stats.fast_retransmits += 1;
                self.transmit_data(now, self.snd_una);
                let c = self.ssthresh + 3 * mss;
                self.set_cwnd(now, c);
            } else if self.dup_ack_count > self.config.dupack_threshold && self.recover.is_some() {
                let c = self.cwnd + mss;
                self.set_cwnd(now, c);
            }
            return;
        }

        // new data acknowledged
        let acked = ack - self.snd_una;
        let data_acked = acked.min(self.send_buf.len() as u64);
        self.send_buf.drain(..data_acked as usize);
        self.stats.bytes_acked += data_acked;
        while self.segment_ends.front().is_some_and(|&e| e <= ack) {
            self.segment_ends.pop_front();
            self.stats.segments_acked += 1;
        }
        self.snd_una = ack;
        if self.snd_nxt < ack {
            self.snd_nxt = ack;
        }
        self.peer_window = seg.window as u64;
        self.dup_ack_count = 0;
        self.retries = 0;
        if let Some((end, at)) = self.timed {
            if ack >= end {
                let _ = self.rto.update(now.saturating_sub(at).as_secs_f64());
                self.timed = None;
            }
        }
        if self.recover.is_some() {
            self.recover = None;
            let c = self.ssthresh;
            self.set_cwnd(now, c);
        } else if self.cwnd <= self.ssthresh {
            let c = self.cwnd + mss;
            self.set_cwnd(now, c);
        } else {
            let c = self.cwnd + (mss * mss / self.cwnd).max(1);
            self.set_cwnd(now, c);
        }
        self.timer = if self.snd_una < self.snd_nxt {
            Some(now + SimTime::from_secs_f64(self.rto.rto()))
        } else {
            None
        };
        if self.state == TcpState::Closing && self.fin_sent && self.snd_una >= self.snd_nxt {
            self.timer = None;
        }
    }

    fn on_data(&mut self, now: SimTime, seg: &TcpSegment) {
        let seq = unwrap_serial(seg.seq, self.rcv_nxt);
        let len = seg.payload.len() as u64;
        let mut out_of_order = false;
        if seq == self.rcv_nxt {
            self.readable.extend(&seg.payload);
            self.rcv_nxt += len;
            while let Some((&s, _)) = self.reorder.first_key_value() {
                if s > self.rcv_nxt {
                    break;
                }
                let (s, bytes) = self.reorder.pop_first().unwrap();
                let skip = (self.rcv_nxt - s) as usize;
                if skip < bytes.len() {
                    self.readable.extend(&bytes[skip..]);
                    self.rcv_nxt += (bytes.len() - skip) as u64;
                }
            }
            if seg.has(FLAG_FIN) && self.reorder.is_empty() {
                self.rcv_nxt += 1;
                if self.state == TcpState::Established {
                    self.state = TcpState::Closing;
                }
            }
        } else if seq > self.rcv_nxt {
            self.reorder
                .entry(seq)
                .or_insert_with(|| seg.payload.clone());
            out_of_order = true;
        } else {
            out_of_order = true;
        }
        self.unacked_segments += 1;
        if !self.config.delayed_ack
            || out_of_order
            || !self.reorder.is_empty()
            || self.unacked_segments >= 2
        {
            self.send_ack();
        } else if self.ack_deadline.is_none() {
            self.ack_deadline = Some(now + SimTime::from_secs_f64(self.config.ack_delay));
        }
    }

    /// Retransmission timeout.
    pub fn on_timeout(&mut self, now: SimTime) {
        self.timer = None;
        match self.state {
            TcpState::SynSent | TcpState::SynRcvd => {
                self.stats.timeouts += 1;
                self.retries += 1;
                self.rto.backoff();
                self.timed = None;
                if self.retries > self.config.max_retrans {
                    self.state = TcpState::Closed;
                    return;
                }
                self.send_syn(now);
            }
            TcpState::Established | TcpState::Closing => {
                if self.snd_una >= self.snd_nxt {
                    return;
                }
                self.stats.timeouts += 1;
                self.retries += 1;
                if self.retries > self.config.max_retrans {
                    self.state = TcpState::Closed;
                    self.outbox.clear();
                    return;
                }
                let mss = self.config.mss as u64;
                self.ssthresh = (self.flight_size() / 2).max(2 * mss);
                self.set_cwnd(now, mss);
                self.rto.backoff();
                self.dup_ack_count = 0;
                self.recover = None;
                self.timed = None;
                if self.fin_sent && self.send_buf.is_empty() {
                    self.snd_nxt = self.snd_una;
                    self.emit(self.snd_nxt, FLAG_FIN | FLAG_ACK, Vec::new());
                    self.snd_nxt += 1;
                    self.timer = Some(now + SimTime::from_secs_f64(self.rto.rto()));
                    return;
                }
                // go back N
                self.snd_nxt = self.snd_una;
                let n = self.transmit_data(now, self.snd_una);
                self.snd_nxt += n;
                self.timer = Some(now + SimTime::from_secs_f64(self.rto.rto()));
                self.try_send(now);
            }
            TcpState::Closed => {}
        }
    }

    pub fn handle_timeout(&mut self, now: SimTime) {
        if self.ack_deadline.is_some_and(|t| t <= now) {
            self.send_ack();
        }
        if self.timer.is_some_and(|t| t <= now) {
            self.on_timeout(now);
        }
    }
}

/// Copies `buf[start..end]` slice-wise.
fn deque_bytes(buf: &VecDeque<u8>, start: usize, end: usize) -> Vec<u8> {
    let (a, b) = buf.as_slices();
    let mut out = Vec::with_capacity(end - start);
    if start < a.len() {
        out.extend_from_slice(&a[start..end.min(a.len())]);
    }
    if end > a.len() {
        out.extend_from_slice(&b[start.saturating_sub(a.len())..end - a.len()]);
    }
    out
}
