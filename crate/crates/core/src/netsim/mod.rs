//! Deterministic discrete-event network: an event queue, links with
//! bandwidth, delay, DropTail queues and loss, and route templates.

mod link;
mod queue;
mod topology;

pub use link::{Link, LinkCounters, LinkOutcome, LossModel};
pub use queue::EventQueue;
pub use topology::{
    build_topology, CustomLink, CustomPath, Direction, LinkParams, Topology, TopologySpec,
};

use thiserror::Error;

use crate::tcp::TcpSegment;
use crate::time::SimTime;

/// Bytes of IP header added to every SCTP packet on the wire. TCP segments
/// already count it.
pub const IP_HEADER_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("event at {at} is before the clock {now}")]
    PastEvent { at: SimTime, now: SimTime },
    #[error("dangling address: {0}")]
    DanglingAddress(String),
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one link's generator, independent of every other link.
pub fn link_seed(master: u64, link_id: u64) -> u64 {
    splitmix64(master ^ splitmix64(link_id.wrapping_add(0x5eed)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Sctp(Vec<u8>),
    Tcp(TcpSegment),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimPacket {
    pub conn: usize,
    pub dir: Direction,
    pub path: usize,
    pub data: bool,
    /// Data units (chunks or segments) on their first transmission.
    pub fresh: u32,
    /// Metrics bucket the packet was sent in.
    pub bucket: u32,
    pub seqno: Option<u32>,
    pub payload: Payload,
}

impl SimPacket {
    pub fn wire_len(&self) -> usize {
        match &self.payload {
            Payload::Sctp(b) => b.len() + IP_HEADER_LEN,
            Payload::Tcp(s) => s.wire_len(),
        }
    }

    pub fn protocol(&self) -> &'static str {
        match self.payload {
            Payload::Sctp(_) => "sctp",
            Payload::Tcp(_) => "tcp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Arrival(SimPacket),
    Timer { owner: usize, generation: u64 },
    AppSend { conn: usize, size: usize },
    Sample,
    SimEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DropRecord {
    pub conn: usize,
    pub bucket: u32,
    pub dir: Direction,
    pub data: bool,
    pub fresh: u32,
    pub queue: bool,
}

enum Internal {
    Hop { packet: SimPacket, hop: usize },
    Ext(Event),
}

pub struct Simulator {
    queue: EventQueue<Internal>,
    topology: Topology,
    trace: Option<Vec<String>>,
    drops: Vec<DropRecord>,
    executed: u64,
}

impl Simulator {
    pub fn new(topology: Topology) -> Self {
        Simulator {
            queue: EventQueue::new(),
            topology,
            trace: None,
            drops: Vec::new(),
            executed: 0,
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    /// Tab-separated lines: time, kind, node, link, size, protocol, tsn/seq.
    pub fn trace_lines(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn take_drops(&mut self) -> Vec<DropRecord> {
        std::mem::take(&mut self.drops)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn event_count(&self) -> u64 {
        self.executed
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, at: SimTime, event: Event) -> Result<(), SimError> {
        self.queue.schedule(at, Internal::Ext(event))
    }

    /// Puts a packet on the first link of its route at the current time.
    pub fn send(&mut self, packet: SimPacket) {
        let now = self.now();
        self.forward(packet, 0, now);
    }

    fn record(&mut self, t: SimTime, kind: &str, link: usize, p: &SimPacket) {
        if let Some(lines) = &mut self.trace {
            let l = self.topology.link(link);
            let seq = p.seqno.map_or_else(|| "-".to_string(), |s| s.to_string());
            lines.push(format!(
                "{t}\t{kind}\t{}\t{link}\t{}\t{}\t{seq}",
                l.from,
                p.wire_len(),
                p.protocol()
            ));
        }
    }

    fn forward(&mut self, packet: SimPacket, hop: usize, now: SimTime) {
        let link = self.topology.route(packet.conn, packet.dir, packet.path)[hop];
        let outcome = self
            .topology
            .link_mut(link)
            .transmit(packet.wire_len(), packet.data, now);
        match outcome {
            LinkOutcome::Arrive(at) => {
                self.record(now, "enq", link, &packet);
                self.queue
                    .schedule(at, Internal::Hop { packet, hop })
                    .expect("arrival lies in the future");
            }
            LinkOutcome::QueueDrop | LinkOutcome::Lost => {
                let queue = outcome == LinkOutcome::QueueDrop;
                self.record(now, if queue { "qdrop" } else { "loss" }, link, &packet);
                self.drops.push(DropRecord {
                    conn: packet.conn,
                    bucket: packet.bucket,
                    dir: packet.dir,
                    data: packet.data,
                    fresh: packet.fresh,
                    queue,
                });
            }
        }
    }

    /// Executes internal hops and returns the next event for the caller, or
    /// None once the queue is empty or the next event lies after `end`.
    pub fn next_event(&mut self, end: SimTime) -> Option<(SimTime, Event)> {
        loop {
            if self.queue.peek_time()? > end {
                return None;
            }
            let (t, ev) = self.queue.pop()?;
            self.executed += 1;
            match ev {
                Internal::Ext(e) => return Some((t, e)),
                Internal::Hop { packet, hop } => {
                    let link = self.topology.route(packet.conn, packet.dir, packet.path)[hop];
                    self.topology.link_mut(link).mark_delivered();
                    self.record(t, "recv", link, &packet);
                    let len = self
                        .topology
                        .route(packet.conn, packet.dir, packet.path)
                        .len();
                    if hop + 1 < len {
                        self.forward(packet, hop + 1, t);
                    } else {
                        return Some((t, Event::Arrival(packet)));
                    }
                }
            }
        }
    }

    /// Runs `f` on every caller-facing event up to `end`. Returns the number
    /// of events executed, hops included.
    pub fn run_until(
        &mut self,
        end: SimTime,
        mut f: impl FnMut(&mut Simulator, SimTime, Event),
    ) -> u64 {
        let before = self.executed;
        while let Some((t, e)) = self.next_event(end) {
            f(self, t, e);
        }
        self.executed - before
    }
}
