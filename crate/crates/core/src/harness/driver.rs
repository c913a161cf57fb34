//! Runs one scenario: builds the topology, attaches a client/server pair per
//! connection, feeds application data and collects per-bucket metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::scenario::{Protocol, Scenario, TopologyKind, Traffic};
use crate::metrics::{cpu_utilization, goodput, loss_rate, Collector, MetricsRow, RunMeta};
use crate::netsim::{
    build_topology, link_seed, Direction, Event, LinkParams, LossModel, Payload, SimError,
    SimPacket, Simulator, TopologySpec,
};
use crate::pipeline::{CopyAccount, CopyStage};
use crate::sctp::{AssocEvent, AssocState, Association, Endpoint, Listener};
use crate::tcp::{TcpConnection, TcpState};
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("connection {conn}: {msg}")]
    Protocol { conn: usize, msg: String },
}

const SERVER_PORT: u16 = 80;
/// Unsent bytes a greedy sender keeps queued when no send buffer is set.
const DEFAULT_BACKLOG: u64 = 16 * 1024;

/// Per-connection outcome of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConnReport {
    pub connection: usize,
    pub started_at: f64,
    pub established_at: Option<f64>,
    /// Set when a bounded transfer has been fully acknowledged.
    pub completed_at: Option<f64>,
    pub closed: bool,
    pub bytes_written: u64,
    pub bytes_delivered: u64,
    pub first_transmissions: u64,
    /// First transmissions lost in the network.
    pub first_lost: u64,
    pub transmissions: u64,
    pub segments_acked: u64,
    pub packets_sent: u64,
    pub packets_dropped: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
    pub protocol_errors: u64,
    pub copy_user_bytes: u64,
    pub copy_bundle_bytes: u64,
    pub copy_dma_bytes: u64,
    /// (time, new primary path index).
    pub primary_changes: Vec<(f64, usize)>,
    /// (time, path index) when a path was declared inactive.
    pub path_failures: Vec<(f64, usize)>,
    #[serde(skip)]
    pub cwnd_trace: Vec<(f64, u64)>,
}

/// Run totals, written as the summary file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub scenario_id: String,
    pub protocol: String,
    pub seed: u64,
    pub connections: usize,
    pub sim_time: f64,
    pub bucket: f64,
    pub events: u64,
    pub cpu_utilization: f64,
    pub throughput_bps: f64,
    pub goodput_pct: f64,
    pub loss_rate_pct: f64,
    pub bytes_delivered: u64,
    pub packets_sent: u64,
    pub packets_acked: u64,
    pub packets_dropped: u64,
    pub first_transmissions: u64,
    pub first_lost: u64,
    pub transmissions: u64,
    pub copy_user_bytes: u64,
    pub copy_bundle_bytes: u64,
    pub copy_dma_bytes: u64,
    pub per_connection: Vec<ConnReport>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub rows: Vec<MetricsRow>,
    pub summary: Summary,
    pub trace: Vec<String>,
}

enum Sides {
    Sctp {
        client: Option<Association>,
        server: Listener,
    },
    Tcp {
        client: Option<TcpConnection>,
        server: TcpConnection,
    },
}

#[derive(Clone, Copy, Default)]
struct Snapshot {
    copies: CopyAccount,
    calls: u64,
    sent: u64,
    retransmitted: u64,
    acked: u64,
}

struct Conn {
    sides: Sides,
    seed: u64,
    opened: bool,
    calls: u64,
    queued: u64,
    msg_counter: u64,
    next_stream: u16,
    snap: Snapshot,
    timer_gen: [u64; 2],
    timer_at: [Option<SimTime>; 2],
    events_seen: usize,
    last_cwnd: Option<u64>,
    /// Highest sequence end sent by the TCP client.
    tcp_high: Option<u32>,
    report: ConnReport,
}

fn mix(seed: u64, salt: u64) -> u64 {
    link_seed(seed, salt.wrapping_add(0x00c0_ffee))
}

pub fn topology_spec(s: &Scenario) -> TopologySpec {
    let loss = |p: f64| {
        if p > 0.0 {
            LossModel::Bernoulli(p)
        } else {
            LossModel::None
        }
    };
    let bottleneck = LinkParams {
        bandwidth_bps: s.bottleneck_bps,
        delay: SimTime::from_secs_f64(s.bottleneck_delay),
        queue_limit: s.queue_limit,
        loss: loss(s.loss_rate),
    };
    match s.topology {
        TopologyKind::Dumbbell => TopologySpec::Dumbbell {
            connections: s.connections,
            access: LinkParams {
                bandwidth_bps: s.access_bps,
                delay: SimTime::from_secs_f64(s.access_delay),
                queue_limit: 1000,
                loss: LossModel::None,
            },
            bottleneck,
        },
        TopologyKind::Dualpath => {
            let mut primary = bottleneck.clone();
            if let Some(p) = s.primary_loss {
                primary.loss = loss(p);
            }
            TopologySpec::Dualpath {
                connections: s.connections,
                paths: vec![primary, bottleneck],
            }
        }
    }
}

struct Driver<'a> {
    s: &'a Scenario,
    conns: Vec<Conn>,
    collector: Collector,
    end: SimTime,
}

pub fn run(s: &Scenario, trace: bool) -> Result<RunResult, RunError> {
    let topology = build_topology(&topology_spec(s), s.seed)?;
    let mut sim = Simulator::new(topology);
    if trace {
        sim.enable_trace();
    }
    let end = SimTime::from_secs_f64(s.sim_time);
    let mut jitter = ChaCha8Rng::seed_from_u64(mix(s.seed, u64::MAX));
    let mut conns = Vec::with_capacity(s.connections);
    for c in 0..s.connections {
        let start = if s.start_jitter > 0.0 {
            jitter.gen_range(0.0..s.start_jitter)
        } else {
            0.0
        };
        let seed = mix(s.seed, c as u64);
        let sides = if s.protocol.is_sctp() {
            Sides::Sctp {
                client: None,
                server: Listener::new(s.assoc.clone(), SERVER_PORT, mix(seed, 1)),
            }
        } else {
            Sides::Tcp {
                client: None,
                server: TcpConnection::listen(s.tcp_config(), mix(seed, 1)),
            }
        };
        let start = SimTime::from_secs_f64(start);
        sim.schedule(start, Event::AppSend { conn: c, size: 0 })?;
        conns.push(Conn {
            sides,
            seed,
            opened: false,
            calls: 0,
            queued: 0,
            msg_counter: 0,
            next_stream: 0,
            snap: Snapshot::default(),
            timer_gen: [0; 2],
            timer_at: [None; 2],
            events_seen: 0,
            last_cwnd: None,
            tcp_high: None,
            report: ConnReport {
                connection: c,
                started_at: start.as_secs_f64(),
                ..ConnReport::default()
            },
        });
    }
    sim.schedule(end, Event::SimEnd)?;
    let mut d = Driver {
        s,
        conns,
        collector: Collector::new(s.bucket, s.sim_time),
        end,
    };
    let mut failure = None;
    while let Some((now, ev)) = sim.next_event(end) {
        if let Err(e) = d.handle(&mut sim, now, ev) {
            failure = Some(e);
            break;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let events = sim.event_count();
    let trace = sim.trace_lines().to_vec();
    Ok(d.finish(events, trace))
}

impl<'a> Driver<'a> {
    fn handle(&mut self, sim: &mut Simulator, now: SimTime, ev: Event) -> Result<(), RunError> {
        let conn = match ev {
            Event::SimEnd | Event::Sample => return Ok(()),
            Event::AppSend { conn, size } => {
                self.app_send(sim, now, conn, size)?;
                conn
            }
            Event::Timer { owner, generation } => {
                let (conn, side) = (owner / 2, owner % 2);
                let c = &mut self.conns[conn];
                if c.timer_gen[side] != generation {
                    return Ok(());
                }
                c.timer_at[side] = None;
                let r = match (&mut c.sides, side) {
                    (
                        Sides::Sctp {
                            client: Some(a), ..
                        },
                        0,
                    ) => a.handle_timeout(now),
                    (Sides::Sctp { server, .. }, 1) => server.handle_timeout(now),
                    (
                        Sides::Tcp {
                            client: Some(t), ..
                        },
                        0,
                    ) => {
                        t.handle_timeout(now);
                        Ok(())
                    }
                    (Sides::Tcp { server, .. }, 1) => {
                        server.handle_timeout(now);
                        Ok(())
                    }
                    _ => Ok(()),
                };
                if r.is_err() {
                    c.report.protocol_errors += 1;
                }
                conn
            }
            Event::Arrival(p) => {
                let conn = p.conn;
                let c = &mut self.conns[conn];
                let r = match (&mut c.sides, p.payload) {
                    (Sides::Sctp { client, server }, Payload::Sctp(bytes)) => match p.dir {
                        Direction::Forward => server.handle_packet(now, &bytes, p.path),
                        Direction::Reverse => match client {
                            Some(a) => a.handle_packet(now, &bytes, p.path),
                            None => Ok(()),
                        },
                    },
                    (Sides::Tcp { client, server }, Payload::Tcp(seg)) => {
                        match p.dir {
                            Direction::Forward => server.handle_segment(now, &seg),
                            Direction::Reverse => {
                                if let Some(t) = client {
                                    t.handle_segment(now, &seg)
                                }
                            }
                        }
                        Ok(())
                    }
                    _ => Ok(()),
                };
                if r.is_err() {
                    c.report.protocol_errors += 1;
                }
                conn
            }
        };
        self.pump(sim, now, conn)
    }

    fn app_send(
        &mut self,
        sim: &mut Simulator,
        now: SimTime,
        conn: usize,
        size: usize,
    ) -> Result<(), RunError> {
        let s = self.s;
        let c = &mut self.conns[conn];
        if !c.opened {
            c.opened = true;
            let topo = sim.topology();
            match &mut c.sides {
                Sides::Sctp { client, .. } => {
                    let local = Endpoint {
                        port: 5000 + conn as u16,
                        addresses: topo.client_addresses(conn),
                    };
                    let a = Association::initiate(
                        s.assoc.clone(),
                        &local,
                        SERVER_PORT,
                        &topo.server_addresses(conn),
                        mix(c.seed, 2),
                        now,
                    )
                    .map_err(|e| RunError::Protocol {
                        conn,
                        msg: e.to_string(),
                    })?;
                    *client = Some(a);
                }
                Sides::Tcp { client, .. } => {
                    *client = Some(TcpConnection::connect(s.tcp_config(), mix(c.seed, 2), now));
                }
            }
            match s.traffic {
                Traffic::Greedy => {}
                Traffic::Paced { .. } => {
                    sim.schedule(
                        now,
                        Event::AppSend {
                            conn,
                            size: s.message_size,
                        },
                    )?;
                }
                Traffic::OnOff { on, off } => {
                    let next = now + SimTime::from_secs_f64(on + off);
                    if next <= self.end {
                        sim.schedule(next, Event::AppSend { conn, size: 0 })?;
                    }
                }
            }
            return Ok(());
        }
        match s.traffic {
            Traffic::Paced { rate_bps } => {
                c.queued += 1;
                let next = now + SimTime::from_secs_f64(size as f64 * 8.0 / rate_bps);
                if next <= self.end {
                    sim.schedule(next, Event::AppSend { conn, size })?;
                }
            }
            Traffic::OnOff { on, off } => {
                let next = now + SimTime::from_secs_f64(on + off);
                if next <= self.end {
                    sim.schedule(next, Event::AppSend { conn, size: 0 })?;
                }
            }
            Traffic::Greedy => {}
        }
        Ok(())
    }

    /// Whether the on/off source is in an on phase at `now`.
    fn source_on(&self, conn: usize, now: SimTime) -> bool {
        match self.s.traffic {
            Traffic::OnOff { on, off } => {
                let since = now.as_secs_f64() - self.conns[conn].report.started_at;
                since.rem_euclid(on + off) < on
            }
            _ => true,
        }
    }

    fn write_messages(&mut self, now: SimTime, conn: usize) {
        let s = self.s;
        let on = self.source_on(conn, now);
        let c = &mut self.conns[conn];
        let limit = if s.send_buffer_size > 0 {
            s.send_buffer_size
        } else {
            DEFAULT_BACKLOG.max(2 * s.message_size as u64)
        };
        let mut unsent = match &c.sides {
            Sides::Sctp {
                client: Some(a), ..
            } => a.unsent_bytes(),
            Sides::Tcp {
                client: Some(t), ..
            } => t.unsent_bytes(),
            _ => return,
        };
        let streams = match &c.sides {
            Sides::Sctp {
                client: Some(a), ..
            } => a.out_stream_count().max(1),
            _ => 1,
        };
        // (stream, payload) written in one burst
        let mut batch: Vec<(u16, Vec<u8>)> = Vec::new();
        loop {
            if s.transfer_bytes > 0 && c.report.bytes_written >= s.transfer_bytes {
                break;
            }
            let want = match s.traffic {
                // a full send buffer blocks the paced writer too
                Traffic::Paced { .. } => c.queued > 0 && unsent < limit,
                Traffic::Greedy | Traffic::OnOff { .. } => on && unsent < limit,
            };
            if !want {
                break;
            }
            let mut size = s.message_size as u64;
            if s.transfer_bytes > 0 {
                size = size.min(s.transfer_bytes - c.report.bytes_written);
            }
            batch.push((
                c.next_stream,
                vec![(c.msg_counter % 251) as u8; size as usize],
            ));
            c.next_stream = (c.next_stream + 1) % streams;
            c.msg_counter += 1;
            c.calls += 1;
            c.queued = c.queued.saturating_sub(1);
            c.report.bytes_written += size;
            unsent += size;
        }
        if batch.is_empty() {
            return;
        }
        match &mut c.sides {
            Sides::Sctp {
                client: Some(a), ..
            } => {
                let msgs: Vec<(u16, &[u8])> =
                    batch.iter().map(|(st, p)| (*st, p.as_slice())).collect();
                if a.send_messages(now, &msgs, true).is_err() {
                    c.report.protocol_errors += 1;
                }
            }
            Sides::Tcp {
                client: Some(t), ..
            } => {
                let bytes = batch
                    .iter()
                    .map(|(_, p)| p.as_slice())
                    .collect::<Vec<_>>()
                    .concat();
                t.write(now, &bytes);
            }
            _ => {}
        }
    }

    fn established(&self, conn: usize) -> bool {
        match &self.conns[conn].sides {
            Sides::Sctp {
                client: Some(a), ..
            } => a.state() == AssocState::Established,
            Sides::Tcp {
                client: Some(t), ..
            } => t.state() == TcpState::Established,
            _ => false,
        }
    }

    /// After any event on `conn`: feed the source, ship packets, deliver
    /// data, account metrics and re-arm timers.
    fn pump(&mut self, sim: &mut Simulator, now: SimTime, conn: usize) -> Result<(), RunError> {
        if self.established(conn) {
            let c = &mut self.conns[conn];
            if c.report.established_at.is_none() {
                c.report.established_at = Some(now.as_secs_f64());
            }
            self.write_messages(now, conn);
        }
        let bucket = self.collector.bucket_of(now);
        let c = &mut self.conns[conn];
        let mut data_packets = 0u64;
        let mut delivered = 0u64;
        let mut packets = Vec::new();
        match &mut c.sides {
            Sides::Sctp { client, server } => {
                if let Some(a) = client {
                    while let Some(t) = a.poll_transmit() {
                        data_packets += (t.data_chunks > 0) as u64;
                        packets.push(SimPacket {
                            conn,
                            dir: Direction::Forward,
                            path: t.path,
                            data: t.data_chunks > 0,
                            fresh: t.data_chunks - t.retransmitted_chunks,
                            bucket,
                            seqno: t.first_tsn,
                            payload: Payload::Sctp(t.bytes),
                        });
                    }
                }
                while let Some(t) = server.poll_transmit() {
                    packets.push(SimPacket {
                        conn,
                        dir: Direction::Reverse,
                        path: t.path,
                        data: t.data_chunks > 0,
                        fresh: 0,
                        bucket,
                        seqno: t.first_tsn,
                        payload: Payload::Sctp(t.bytes),
                    });
                }
                for a in server.associations_mut() {
                    delivered += a
                        .deliver_all()
                        .iter()
                        .map(|m| m.payload.len() as u64)
                        .sum::<u64>();
                }
            }
            Sides::Tcp { client, server } => {
                if let Some(t) = client {
                    while let Some(seg) = t.poll_transmit() {
                        let data = !seg.payload.is_empty();
                        data_packets += data as u64;
                        let end = seg.seq.wrapping_add(seg.payload.len() as u32);
                        let fresh =
                            data && c.tcp_high.map_or(true, |h| end.wrapping_sub(h) as i32 > 0);
                        if fresh {
                            c.tcp_high = Some(end);
                        }
                        packets.push(SimPacket {
                            conn,
                            dir: Direction::Forward,
                            path: 0,
                            data,
                            fresh: fresh as u32,
                            bucket,
                            seqno: Some(seg.seq),
                            payload: Payload::Tcp(seg),
                        });
                    }
                }
                while let Some(seg) = server.poll_transmit() {
                    packets.push(SimPacket {
                        conn,
                        dir: Direction::Reverse,
                        path: 0,
                        data: !seg.payload.is_empty(),
                        fresh: 0,
                        bucket,
                        seqno: Some(seg.seq),
                        payload: Payload::Tcp(seg),
                    });
                }
                delivered += server.read().len() as u64;
            }
        }
        for p in packets {
            sim.send(p);
        }
        self.account(now, conn, data_packets, delivered);
        for d in sim.take_drops() {
            if d.data && d.dir == Direction::Forward {
                let cell = self.collector.cell(d.bucket, d.conn);
                cell.packets_dropped += 1;
                cell.fresh_lost += d.fresh as u64;
                let r = &mut self.conns[d.conn].report;
                r.packets_dropped += 1;
                r.first_lost += d.fresh as u64;
            }
        }
        self.rearm(sim, now, conn)
    }

    fn account(&mut self, now: SimTime, conn: usize, data_packets: u64, delivered: u64) {
        let c = &mut self.conns[conn];
        let (copies, sent, retx, acked, cwnd, srtt) = match &c.sides {
            Sides::Sctp {
                client: Some(a), ..
            } => {
                let st = a.stats();
                let p = &a.paths()[a.primary()];
                (
                    *a.copies(),
                    st.data_chunks_sent,
                    st.data_chunks_retransmitted,
                    st.data_chunks_acked,
                    p.cwnd,
                    p.srtt(),
                )
            }
            Sides::Tcp {
                client: Some(t), ..
            } => {
                let st = t.stats();
                (
                    *t.copies(),
                    st.data_segments_sent,
                    st.retransmitted_segments,
                    st.segments_acked,
                    t.cwnd(),
                    t.srtt(),
                )
            }
            _ => return,
        };
        let snap = Snapshot {
            copies,
            calls: c.calls,
            sent,
            retransmitted: retx,
            acked,
        };
        let prev = c.snap;
        c.snap = snap;
        let cell = self.collector.at(now, conn);
        cell.copies.add(&snap.copies.since(&prev.copies));
        cell.calls += snap.calls - prev.calls;
        cell.transmissions += snap.sent - prev.sent;
        cell.first_transmissions +=
            (snap.sent - prev.sent) - (snap.retransmitted - prev.retransmitted);
        cell.segments_acked += snap.acked - prev.acked;
        cell.packets_sent += data_packets;
        cell.bytes_delivered += delivered;
        cell.cwnd = Some(cwnd);
        if srtt.is_some() {
            cell.srtt = srtt;
        }

        let r = &mut c.report;
        r.packets_sent += data_packets;
        r.bytes_delivered += delivered;
        if c.last_cwnd != Some(cwnd) {
            c.last_cwnd = Some(cwnd);
            r.cwnd_trace.push((now.as_secs_f64(), cwnd));
        }
        let s = self.s;
        match &c.sides {
            Sides::Sctp {
                client: Some(a), ..
            } => {
                for (t, e) in &a.events()[c.events_seen..] {
                    match e {
                        AssocEvent::PrimaryChanged(p) => {
                            r.primary_changes.push((t.as_secs_f64(), *p))
                        }
                        AssocEvent::PathDown(p) => r.path_failures.push((t.as_secs_f64(), *p)),
                        _ => {}
                    }
                }
                c.events_seen = a.events().len();
                r.closed = a.is_closed();
                if s.transfer_bytes > 0
                    && r.completed_at.is_none()
                    && r.bytes_written >= s.transfer_bytes
                    && a.unacked_bytes() == 0
                {
                    r.completed_at = Some(now.as_secs_f64());
                }
            }
            Sides::Tcp {
                client: Some(t), ..
            } => {
                r.closed = t.state() == TcpState::Closed && r.established_at.is_some();
                if s.transfer_bytes > 0
                    && r.completed_at.is_none()
                    && r.bytes_written >= s.transfer_bytes
                    && t.unacked_bytes() == 0
                {
                    r.completed_at = Some(now.as_secs_f64());
                }
            }
            _ => {}
        }
    }

    fn rearm(&mut self, sim: &mut Simulator, now: SimTime, conn: usize) -> Result<(), RunError> {
        let c = &mut self.conns[conn];
        let wanted = match &c.sides {
            Sides::Sctp { client, server } => [
                client.as_ref().and_then(|a| a.poll_timeout()),
                server.poll_timeout(),
            ],
            Sides::Tcp { client, server } => [
                client.as_ref().and_then(|t| t.poll_timeout()),
                server.poll_timeout(),
            ],
        };
        for side in 0..2 {
            if wanted[side] != c.timer_at[side] {
                c.timer_gen[side] += 1;
                c.timer_at[side] = wanted[side];
                if let Some(t) = wanted[side] {
                    sim.schedule(
                        t.max(now),
                        Event::Timer {
                            owner: conn * 2 + side,
                            generation: c.timer_gen[side],
                        },
                    )?;
                }
            }
        }
        Ok(())
    }

    fn finish(self, events: u64, trace: Vec<String>) -> RunResult {
        let s = self.s;
        let meta = RunMeta {
            scenario_id: s.name.clone(),
            protocol: s.protocol.name().to_string(),
            seed: s.seed,
            connections: s.connections,
            bucket: s.bucket,
        };
        let rows = self.collector.rows(&meta, &s.cost);
        let mut per_connection = Vec::new();
        for (i, mut c) in self.conns.into_iter().enumerate() {
            let mut first = 0;
            let mut sent = 0;
            let mut acked = 0;
            for b in 0..self.collector.bucket_count() {
                if let Some(cell) = self.collector.get(b, i) {
                    first += cell.first_transmissions;
                    sent += cell.transmissions;
                    acked += cell.segments_acked;
                }
            }
            let r = &mut c.report;
            r.first_transmissions = first;
            r.transmissions = sent;
            r.segments_acked = acked;
            let copies = c.snap.copies;
            r.copy_user_bytes = copies.bytes(CopyStage::UserToMessage);
            r.copy_bundle_bytes = copies.bytes(CopyStage::BundleToNic);
            r.copy_dma_bytes = copies.bytes(CopyStage::NicDma);
            match &c.sides {
                Sides::Sctp {
                    client: Some(a), ..
                } => {
                    r.fast_retransmits = a.stats().fast_retransmits;
                    r.timeouts = a.stats().timeouts;
                }
                Sides::Tcp {
                    client: Some(t), ..
                } => {
                    r.fast_retransmits = t.stats().fast_retransmits;
                    r.timeouts = t.stats().timeouts;
                }
                _ => {}
            }
            per_connection.push(c.report);
        }
        let sum = |f: fn(&ConnReport) -> u64| per_connection.iter().map(f).sum::<u64>();
        let first = sum(|r| r.first_transmissions);
        let first_lost = sum(|r| r.first_lost);
        let transmissions = sum(|r| r.transmissions);
        let packets_sent = sum(|r| r.packets_sent);
        let dropped = sum(|r| r.packets_dropped);
        let delivered = sum(|r| r.bytes_delivered);
        let cpu: Vec<f64> = rows.iter().map(|r| r.cpu_utilization).collect();
        let summary = Summary {
            scenario_id: s.name.clone(),
            protocol: s.protocol.name().to_string(),
            seed: s.seed,
            connections: s.connections,
            sim_time: s.sim_time,
            bucket: s.bucket,
            events,
            cpu_utilization: cpu_utilization(&cpu).unwrap_or(0.0),
            throughput_bps: if s.sim_time > 0.0 {
                delivered as f64 * 8.0 / s.sim_time
            } else {
                0.0
            },
            goodput_pct: goodput(first.saturating_sub(first_lost), transmissions).unwrap_or(100.0),
            loss_rate_pct: loss_rate(packets_sent, dropped.min(packets_sent)).unwrap_or(0.0),
            bytes_delivered: delivered,
            packets_sent,
            packets_acked: sum(|r| r.segments_acked),
            packets_dropped: dropped,
            first_transmissions: first,
            first_lost,
            transmissions,
            copy_user_bytes: sum(|r| r.copy_user_bytes),
            copy_bundle_bytes: sum(|r| r.copy_bundle_bytes),
            copy_dma_bytes: sum(|r| r.copy_dma_bytes),
            per_connection,
        };
        RunResult {
            rows,
            summary,
            trace,
        }
    }
}

/// Runs `s` under another protocol with the same file keys.
pub fn run_protocol(s: &Scenario, p: Protocol, trace: bool) -> Result<RunResult, RunError> {
    run(&s.with_protocol(p), trace)
}
