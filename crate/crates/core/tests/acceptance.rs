//! Acceptance suite. Prints one PASS/FAIL line per criterion. Failures are
//! reported but only change the exit status under ACCEPTANCE_STRICT=1, so a
//! workspace test run still reaches the targets after this one.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sctpsim::harness::{output, preset, run, sweep, Protocol, Scenario, SweepCell};
use sctpsim::metrics::{
    bandwidth_estimate, cpu_utilization, goodput, max_cwnd, throughput_est, uscpu,
};
use sctpsim::pipeline::{reassemble, CopyStage, SendPipeline};
use sctpsim::sctp::{
    AssocConfig, AssocEvent, AssocState, Association, Endpoint, Listener, SctpError,
};
use sctpsim::tcp::{TcpConfig, TcpConnection, TcpSegment};
use sctpsim::wire::{
    decode_packet, encode_packet, pad4, Chunk, InitChunk, Packet, COMMON_HEADER_LEN,
    DATA_HEADER_LEN,
};
use sctpsim::SimTime;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    number: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            number: 1,
            name: "cpu formula",
            limit: Duration::from_secs(1),
            check: cpu_formula,
        },
        Criterion {
            number: 2,
            name: "goodput formula",
            limit: Duration::from_secs(5),
            check: goodput_formula,
        },
        Criterion {
            number: 3,
            name: "window and throughput estimators",
            limit: Duration::from_secs(1),
            check: estimators,
        },
        Criterion {
            number: 4,
            name: "handshake and INIT flood",
            limit: Duration::from_secs(5),
            check: handshake,
        },
        Criterion {
            number: 5,
            name: "fragment and bundle oracle",
            limit: Duration::from_secs(30),
            check: fragment_bundle,
        },
        Criterion {
            number: 6,
            name: "copy accounting law",
            limit: Duration::from_secs(5),
            check: copy_law,
        },
        Criterion {
            number: 7,
            name: "reno oracle",
            limit: Duration::from_secs(10),
            check: reno_oracle,
        },
        Criterion {
            number: 8,
            name: "failover bound",
            limit: Duration::from_secs(10),
            check: failover,
        },
        Criterion {
            number: 9,
            name: "determinism",
            limit: Duration::from_secs(20),
            check: determinism,
        },
        Criterion {
            number: 10,
            name: "directional reproductions",
            limit: Duration::from_secs(180),
            check: directional,
        },
    ];
    // ACCEPTANCE_ONLY=7,8 runs a subset
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&c.number)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > c.limit => Err(format!(
                "took {:.1}s, limit {}s ({detail})",
                took.as_secs_f64(),
                c.limit.as_secs()
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "PASS {:>2} {} [{:.1}s] {detail}",
                c.number,
                c.name,
                took.as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL {:>2} {} [{:.1}s] {why}",
                    c.number,
                    c.name,
                    took.as_secs_f64()
                );
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1-3: formulas

fn cpu_formula() -> Outcome {
    let samples: Vec<f64> = [(6.0, 25.0), (4.0, 20.0), (7.0, 30.0)]
        .iter()
        .map(|&(idle, ipf)| uscpu(idle, ipf).unwrap())
        .collect();
    ensure!(samples == [69.0, 76.0, 63.0], "uscpu gave {samples:?}");
    let mean = cpu_utilization(&samples).unwrap();
    ensure!((mean - 69.33).abs() <= 0.005, "mean {mean}");
    Ok(format!("samples {samples:?}, mean {mean:.4}"))
}

fn goodput_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let s: u64 = rng.gen_range(1..=1_000_000);
        let a: u64 = rng.gen_range(0..=s);
        let g = goodput(a, s).unwrap();
        ensure!(g == 100.0 * a as f64 / s as f64, "goodput({a}, {s}) = {g}");
    }
    let mut s = preset("E3_goodput").unwrap().scenario();
    s.set("loss_rate", "0").unwrap();
    let mut seen = Vec::new();
    for p in Protocol::ALL {
        let r = run(&s.with_protocol(p), false).unwrap();
        let g = r.summary.goodput_pct;
        ensure!(format!("{g:.3}") == "100.000", "{p}: lossless goodput {g}");
        ensure!(r.summary.transmissions > 0, "{p}: nothing sent");
        seen.push(format!("{p} {g:.3}"));
    }
    Ok(format!(
        "1000 pairs exact; lossless 400 s E3: {}",
        seen.join(", ")
    ))
}

fn estimators() -> Outcome {
    let w = max_cwnd(0.2, 625000.0, 1024.0).unwrap();
    ensure!(w == 122, "max_cwnd {w}");
    let t = throughput_est(122.0, 1024.0, 0.2).unwrap();
    ensure!(t == 624640.0, "throughput_est {t}");
    let b = bandwidth_estimate(1000.0, 1.0, 1000.0, 1.0).unwrap();
    ensure!(((b - 1000.0) / 1000.0).abs() <= 1e-9, "fixed point {b}");
    Ok(format!("W {w}, throughput {t} B/s, fixed point {b}"))
}

// ---------------------------------------------------------------------------
// 4: handshake

/// Constant one-way delay, FIFO in both directions, no loss unless a filter
/// says so.
struct Channel<T> {
    delay: SimTime,
    to_server: VecDeque<(SimTime, T)>,
    to_client: VecDeque<(SimTime, T)>,
    delivered: usize,
}

impl<T> Channel<T> {
    fn new(delay: SimTime) -> Self {
        Channel {
            delay,
            to_server: VecDeque::new(),
            to_client: VecDeque::new(),
            delivered: 0,
        }
    }

    fn next_arrival(&self) -> Option<SimTime> {
        let a = self.to_server.front().map(|x| x.0);
        let b = self.to_client.front().map(|x| x.0);
        match (a, b) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

fn earliest(times: &[Option<SimTime>]) -> Option<SimTime> {
    times.iter().flatten().copied().min()
}

/// Client association and listener joined by a lockstep channel. `drop_data`
/// sees every client packet carrying DATA and may discard it.
struct SctpPair {
    client: Association,
    server: Listener,
    chan: Channel<Vec<u8>>,
    now: SimTime,
    sent_by_client: Vec<Vec<u8>>,
    data_packets: u64,
    drop_data: fn(u64) -> bool,
    cwnd_trace: Vec<u64>,
}

impl SctpPair {
    fn new(config: AssocConfig, delay: SimTime, drop_data: fn(u64) -> bool) -> Self {
        let client = Association::initiate(
            config.clone(),
            &Endpoint {
                port: 5000,
                addresses: vec![1],
            },
            80,
            &[2],
            11,
            SimTime::ZERO,
        )
        .unwrap();
        let mut p = SctpPair {
            client,
            server: Listener::new(config, 80, 12),
            chan: Channel::new(delay),
            now: SimTime::ZERO,
            sent_by_client: Vec::new(),
            data_packets: 0,
            drop_data,
            cwnd_trace: Vec::new(),
        };
        p.flush();
        p
    }

    fn flush(&mut self) {
        let at = self.now + self.chan.delay;
        while let Some(t) = self.client.poll_transmit() {
            self.sent_by_client.push(t.bytes.clone());
            if t.data_chunks > 0 {
                self.data_packets += 1;
                if (self.drop_data)(self.data_packets) {
                    continue;
                }
            }
            self.chan.to_server.push_back((at, t.bytes));
        }
        while let Some(t) = self.server.poll_transmit() {
            self.chan.to_client.push_back((at, t.bytes));
        }
        let cwnd = self.client.paths()[0].cwnd;
        if self.cwnd_trace.last() != Some(&cwnd) {
            self.cwnd_trace.push(cwnd);
        }
    }

    /// Advances to the next arrival or timer. Returns false when idle or
    /// past `end`.
    fn step(&mut self, end: SimTime) -> bool {
        let next = earliest(&[
            self.chan.next_arrival(),
            self.client.poll_timeout(),
            self.server.poll_timeout(),
        ]);
        let Some(t) = next.filter(|&t| t <= end) else {
            return false;
        };
        self.now = t;
        if self.chan.to_server.front().is_some_and(|x| x.0 == t) {
            let (_, bytes) = self.chan.to_server.pop_front().unwrap();
            self.chan.delivered += 1;
            let _ = self.server.handle_packet(t, &bytes, 0);
            for a in self.server.associations_mut() {
                a.deliver_all();
            }
        } else if self.chan.to_client.front().is_some_and(|x| x.0 == t) {
            let (_, bytes) = self.chan.to_client.pop_front().unwrap();
            self.chan.delivered += 1;
            let _ = self.client.handle_packet(t, &bytes, 0);
        } else {
            if self.client.poll_timeout() == Some(t) {
                self.client.handle_timeout(t).unwrap();
            }
            if self.server.poll_timeout() == Some(t) {
                self.server.handle_timeout(t).unwrap();
            }
        }
        self.flush();
        true
    }
}

fn spoofed_init(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut p = Packet::new(rng.gen_range(1024..u16::MAX), 80, 0);
    p.chunks.push(Chunk::Init(InitChunk {
        initiate_tag: rng.gen_range(1..u32::MAX),
        rwnd: 65536,
        out_streams: 1,
        in_streams: 1,
        initial_tsn: rng.gen(),
        addresses: vec![rng.gen()],
        cookie: None,
    }));
    encode_packet(&p, 1500).unwrap()
}

fn handshake() -> Outcome {
    let config = AssocConfig::default();

    let mut l = Listener::new(config.clone(), 80, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut init_acks = 0;
    for i in 0..10_000u64 {
        let bytes = spoofed_init(&mut rng);
        l.handle_packet(SimTime::from_nanos(i * 1000), &bytes, 0)
            .unwrap();
        while let Some(t) = l.poll_transmit() {
            let d = decode_packet(&t.bytes).unwrap();
            if matches!(d.packet.chunks.first(), Some(Chunk::InitAck(_))) {
                init_acks += 1;
            }
        }
    }
    ensure!(
        l.association_count() == 0,
        "{} associations allocated",
        l.association_count()
    );
    ensure!(init_acks == 10_000, "{init_acks} INIT_ACKs");
    ensure!(l.poll_timeout().is_none(), "listener armed a timer");

    let rtt = SimTime::from_millis(200);
    let mut p = SctpPair::new(config.clone(), SimTime::from_millis(100), |_| false);
    let mut established_at = None;
    while p.step(SimTime::from_secs(10)) {
        if established_at.is_none() && p.client.state() == AssocState::Established {
            established_at = Some(p.now);
        }
    }
    let at = established_at.ok_or("client never established")?;
    ensure!(at.as_nanos() == 2 * rtt.as_nanos(), "established at {at}");
    ensure!(
        p.chan.delivered == 4,
        "{} packets exchanged",
        p.chan.delivered
    );
    ensure!(
        p.server.association_count() == 1,
        "server has {} associations",
        p.server.association_count()
    );

    // cookie echoed 51 s after INIT_ACK, lifetime 50 s
    let stale = cookie_at(&config, SimTime::from_secs(51));
    ensure!(
        matches!(stale, Err(SctpError::StaleCookie { .. })),
        "51 s cookie gave {stale:?}"
    );
    let fresh = cookie_at(&config, SimTime::from_secs(49));
    ensure!(fresh.is_ok(), "49 s cookie gave {fresh:?}");
    Ok(format!(
        "0 records / 10000 INIT_ACKs; established at {at} s with 4 packets; 51 s cookie rejected"
    ))
}

/// Runs INIT / INIT_ACK at time zero and echoes the cookie at `echo_at`.
fn cookie_at(config: &AssocConfig, echo_at: SimTime) -> Result<(), SctpError> {
    let ep = Endpoint {
        port: 5000,
        addresses: vec![1],
    };
    let mut c = Association::initiate(config.clone(), &ep, 80, &[2], 5, SimTime::ZERO)?;
    let mut l = Listener::new(config.clone(), 80, 6);
    let init = c.poll_transmit().unwrap();
    l.handle_packet(SimTime::ZERO, &init.bytes, 0)?;
    let ack = l.poll_transmit().unwrap();
    c.handle_packet(SimTime::ZERO, &ack.bytes, 0)?;
    let echo = c.poll_transmit().unwrap();
    l.handle_packet(echo_at, &echo.bytes, 0)?;
    if l.association_count() != 1 {
        return Err(SctpError::NotEstablished);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 5: fragmentation and bundling

/// Chunk counts per packet of the best ordered split: fewest packets, then
/// the largest leading packets. Every split is enumerated.
fn packing_oracle(lens: &[usize], mtu: usize) -> Vec<usize> {
    let n = lens.len();
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut groups = Vec::new();
        let mut count = 0;
        let mut bytes = COMMON_HEADER_LEN;
        let mut ok = true;
        for (i, &len) in lens.iter().enumerate() {
            count += 1;
            bytes += len;
            if bytes > mtu {
                ok = false;
                break;
            }
            if i + 1 == n || mask & (1 << i) != 0 {
                groups.push(count);
                count = 0;
                bytes = COMMON_HEADER_LEN;
            }
        }
        if !ok {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => groups.len() < b.len() || (groups.len() == b.len() && groups > *b),
        };
        if better {
            best = Some(groups);
        }
    }
    best.expect("some split fits")
}

fn fragment_bundle() -> Outcome {
    let mtu = 1500;
    let template = Packet::new(5000, 80, 7);
    let mut packets_checked = 0;
    for chunk_size in [512usize, 1468] {
        for len in 1..=5000usize {
            let msg: Vec<u8> = (0..len).map(|i| (i * 31 + len) as u8).collect();
            let mut p = SendPipeline::new();
            let (_, mut descs) = p.fragment(&msg, chunk_size, 3, 9, true).unwrap();
            ensure!(
                descs.len() == len.div_ceil(chunk_size),
                "len {len} / {chunk_size}: {} chunks",
                descs.len()
            );
            for (i, d) in descs.iter_mut().enumerate() {
                d.tsn = 100 + i as u64;
            }
            let lens: Vec<usize> = descs
                .iter()
                .map(|d| pad4(DATA_HEADER_LEN + d.payload_len))
                .collect();
            let mut refs: Vec<_> = descs.iter_mut().collect();
            let encoded = p
                .stage_for_transmit(Vec::new(), &mut refs, &template, mtu, SimTime::ZERO)
                .unwrap();
            let mut fragments = Vec::new();
            let mut per_packet = Vec::new();
            for bytes in &encoded {
                ensure!(
                    bytes.len() <= mtu,
                    "len {len}: packet of {} bytes",
                    bytes.len()
                );
                let d = decode_packet(bytes).map_err(|e| e.to_string())?;
                per_packet.push(d.packet.chunks.len());
                for c in d.packet.chunks {
                    match c {
                        Chunk::Data(dc) => fragments.push(dc),
                        other => return Err(format!("unexpected chunk {other:?}")),
                    }
                }
            }
            packets_checked += encoded.len();
            let back = reassemble(&fragments).map_err(|e| e.to_string())?;
            ensure!(back == msg, "len {len} / {chunk_size}: reassembly differs");
            let oracle = packing_oracle(&lens, mtu);
            ensure!(
                per_packet == oracle,
                "len {len} / {chunk_size}: bundled {per_packet:?}, oracle {oracle:?}"
            );
        }
    }
    Ok(format!("10000 messages, {packets_checked} packets"))
}

// ---------------------------------------------------------------------------
// 6: copy accounting

fn copy_law() -> Outcome {
    let mut p = SctpPair::new(AssocConfig::default(), SimTime::from_millis(5), |_| false);
    while p.client.state() != AssocState::Established {
        ensure!(p.step(SimTime::from_secs(5)), "no handshake");
    }
    let mut payload = 0u64;
    for i in 0..60usize {
        let size = 1 + (i * 977) % 4000;
        let msg = vec![i as u8; size];
        let now = p.now;
        p.client
            .send_message(now, 0, &msg, true)
            .map_err(|e| e.to_string())?;
        payload += size as u64;
        p.flush();
        for _ in 0..3 {
            p.step(SimTime::from_secs(60));
        }
    }
    while p.step(SimTime::from_secs(60)) {}
    ensure!(
        p.client.rtx_queue_len() == 0 && p.client.send_queue_len() == 0,
        "data left unacknowledged"
    );
    ensure!(
        p.client.stats().data_chunks_retransmitted == 0,
        "retransmissions in a lossless run"
    );

    // header bytes from the packets the client put on the wire
    let mut wire = 0u64;
    let mut user = 0u64;
    for bytes in &p.sent_by_client {
        wire += bytes.len() as u64;
        let d = decode_packet(bytes).map_err(|e| e.to_string())?;
        for c in &d.packet.chunks {
            if let Chunk::Data(dc) = c {
                user += dc.user_bytes.len() as u64;
            }
        }
    }
    ensure!(user == payload, "DATA carried {user} of {payload} bytes");
    let h = wire - user;
    let acct = p.client.copies();
    let got = (
        acct.bytes(CopyStage::UserToMessage),
        acct.bytes(CopyStage::BundleToNic),
        acct.bytes(CopyStage::NicDma),
    );
    ensure!(
        got == (payload, payload + h, payload + h),
        "account {got:?}, expected ({payload}, {0}, {0})",
        payload + h
    );
    let stages = acct.active_stages();
    ensure!(stages.len() == 3, "stages {stages:?}");
    Ok(format!(
        "P {payload}, H {h}, {} packets",
        p.sent_by_client.len()
    ))
}

// ---------------------------------------------------------------------------
// 7: Reno oracle

/// cwnd after every change for a 1000-byte MSS, 3000-byte initial window and
/// a receive window too large to matter, every 50th data segment dropped,
/// one round trip per flight. Worked out by hand, round by round.
fn reno_table() -> Vec<u64> {
    let k = |r: std::ops::RangeInclusive<u64>| r.map(|x| x * 1000).collect::<Vec<_>>();
    let mut t = Vec::new();
    // slow start, one MSS per ACK: ACKs 1..49
    t.extend(k(4..=52));
    // segment 50 lost: third dupack halves the flight of 52 segments
    // (ssthresh 26000) and inflates by three, then one MSS per dupack
    t.extend(k(29..=69));
    // dupacks for 94..99 and 101 (100 was lost) keep inflating
    t.extend(k(70..=76));
    // ACK of 99 ends recovery at ssthresh
    t.push(26000);
    // 100 missing: flight 26 segments, ssthresh 13000, 17 dupacks
    t.extend(k(16..=30));
    // dupacks from 119..125
    t.extend(k(31..=37));
    // ACK of 125 deflates; ACK 126 still slow start (cwnd == ssthresh)
    t.extend([13000, 14000]);
    // congestion avoidance, cwnd += MSS*MSS/cwnd per ACK, ACKs 127..147
    t.extend([14071, 14142, 14212]);
    t.extend([
        14282, 14352, 14421, 14490, 14559, 14627, 14695, 14763, 14830, 14897, 14964, 15030, 15096,
        15162,
    ]);
    t.extend([15227, 15292, 15357, 15422]);
    // segment 148 (the 150th transmission) lost: flight 15, ssthresh 7500
    t.extend([10500, 11500, 12500, 13500, 14500, 15500, 16500, 17500]);
    t.extend([18500, 19500, 20500, 21500]);
    // ACK of 162 ends recovery; 163 slow start; 164 avoidance
    t.extend([7500, 8500, 8617]);
    t
}

/// TCP sender and receiver over the lockstep channel, dropping every 50th
/// data segment from the sender.
fn tcp_lockstep(config: TcpConfig, bytes: usize, until: SimTime) -> (TcpConnection, TcpConnection) {
    let delay = SimTime::from_millis(50);
    let mut c = TcpConnection::connect(config.clone(), 21, SimTime::ZERO);
    let mut s = TcpConnection::listen(config, 22);
    c.write(SimTime::ZERO, &vec![7u8; bytes]);
    let mut chan: Channel<TcpSegment> = Channel::new(delay);
    let mut data_sent = 0u64;
    let mut now = SimTime::ZERO;
    loop {
        let at = now + delay;
        while let Some(seg) = c.poll_transmit() {
            if !seg.payload.is_empty() {
                data_sent += 1;
                if data_sent % 50 == 0 {
                    continue;
                }
            }
            chan.to_server.push_back((at, seg));
        }
        while let Some(seg) = s.poll_transmit() {
            chan.to_client.push_back((at, seg));
        }
        let Some(t) = earliest(&[chan.next_arrival(), c.poll_timeout(), s.poll_timeout()])
            .filter(|&t| t <= until)
        else {
            break;
        };
        now = t;
        if chan.to_server.front().is_some_and(|x| x.0 == t) {
            let (_, seg) = chan.to_server.pop_front().unwrap();
            s.handle_segment(t, &seg);
            s.read();
        } else if chan.to_client.front().is_some_and(|x| x.0 == t) {
            let (_, seg) = chan.to_client.pop_front().unwrap();
            c.handle_segment(t, &seg);
        } else {
            if c.poll_timeout() == Some(t) {
                c.handle_timeout(t);
            }
            if s.poll_timeout() == Some(t) {
                s.handle_timeout(t);
            }
        }
    }
    (c, s)
}

/// Checks a cwnd series for the Reno shape: growth until a loss, each
/// reduction to about half of the window before it, growth again after.
/// Returns the number of halvings.
fn reno_skeleton(trace: &[u64], floor: u64) -> Result<usize, String> {
    let peak_before_first = trace
        .iter()
        .zip(trace.iter().skip(1))
        .take_while(|(a, b)| b >= a)
        .count();
    ensure!(
        peak_before_first >= 10,
        "only {peak_before_first} increases before the first loss"
    );
    ensure!(
        trace[peak_before_first] >= 4 * trace[0],
        "slow start reached {} from {}",
        trace[peak_before_first],
        trace[0]
    );
    let mut halvings = 0;
    for w in trace.windows(2) {
        let (before, after) = (w[0], w[1]);
        if after < before {
            ensure!(
                after >= floor,
                "cwnd fell to {after}, below {floor}: a timeout"
            );
            if after * 10 <= before * 6 {
                halvings += 1;
            }
        }
    }
    ensure!(halvings >= 2, "{halvings} halvings");
    // the transfer may end mid-recovery, so the final reduction is exempt
    let cuts: Vec<usize> = (1..trace.len())
        .filter(|&i| trace[i] < trace[i - 1])
        .collect();
    for &i in cuts.iter().rev().skip(1) {
        ensure!(
            trace[i + 1..].iter().any(|&w| w > trace[i]),
            "no growth after the reduction to {}",
            trace[i]
        );
    }
    Ok(halvings)
}

fn reno_oracle() -> Outcome {
    let config = TcpConfig {
        mss: 1000,
        initial_cwnd: 3000,
        rwnd: 1_000_000,
        delayed_ack: false,
        ..TcpConfig::default()
    };
    let (c, _) = tcp_lockstep(config, 400_000, SimTime::from_secs(20));
    ensure!(c.stats().timeouts == 0, "{} timeouts", c.stats().timeouts);
    let got: Vec<u64> = c.cwnd_trace().iter().map(|&(_, w)| w).collect();
    let want = reno_table();
    ensure!(
        got.len() >= want.len(),
        "trace has {} entries, table {}",
        got.len(),
        want.len()
    );
    if let Some(i) = (0..want.len()).find(|&i| got[i] != want[i]) {
        return Err(format!("entry {i}: trace {} table {}", got[i], want[i]));
    }
    let tcp_halvings = reno_skeleton(&got, 2000)?;

    // SCTP over the same channel with the same drop pattern
    let config = AssocConfig {
        initial_rwnd: 1_000_000,
        ..AssocConfig::default()
    };
    let mtu = config.mtu as u64;
    let mut p = SctpPair::new(config, SimTime::from_millis(50), |n| n % 50 == 0);
    while p.client.state() != AssocState::Established {
        ensure!(p.step(SimTime::from_secs(5)), "no handshake");
    }
    let now = p.now;
    let msgs: Vec<Vec<u8>> = (0..400).map(|_| vec![3u8; 1000]).collect();
    let refs: Vec<(u16, &[u8])> = msgs.iter().map(|m| (0u16, m.as_slice())).collect();
    p.client
        .send_messages(now, &refs, true)
        .map_err(|e| e.to_string())?;
    p.flush();
    while p.step(SimTime::from_secs(20)) {}
    ensure!(
        p.client.stats().timeouts == 0,
        "sctp: {} timeouts",
        p.client.stats().timeouts
    );
    let fast = p
        .client
        .events()
        .iter()
        .filter(|(_, e)| matches!(e, AssocEvent::FastRetransmit(_)))
        .count();
    ensure!(fast >= 2, "sctp: {fast} fast retransmits");
    let sctp_halvings = reno_skeleton(&p.cwnd_trace, mtu).map_err(|e| format!("sctp: {e}"))?;
    for w in p.cwnd_trace.windows(2) {
        if w[1] < w[0] {
            ensure!(
                w[1] == (w[0] / 2).max(4 * mtu),
                "sctp: cwnd {} cut to {}",
                w[0],
                w[1]
            );
        }
    }
    Ok(format!(
        "{} table entries match; halvings tcp {tcp_halvings}, sctp {sctp_halvings}",
        want.len()
    ))
}

// ---------------------------------------------------------------------------
// 8: failover

fn failover() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/failover.scn");
    let s = Scenario::load(&path).map_err(|e| e.to_string())?;
    ensure!(
        s.protocol == Protocol::SctpOptimized,
        "protocol {}",
        s.protocol
    );
    let r = run(&s, false).map_err(|e| e.to_string())?;
    let c = &r.summary.per_connection[0];
    let established = c.established_at.ok_or("never established")?;
    let done = c.completed_at.ok_or("transfer did not complete")?;
    ensure!(
        c.path_failures.iter().any(|&(_, p)| p == 0),
        "path 0 never declared inactive: {:?}",
        c.path_failures
    );
    ensure!(c.timeouts >= 7, "{} timeouts", c.timeouts);
    ensure!(
        c.bytes_delivered == s.transfer_bytes,
        "delivered {}",
        c.bytes_delivered
    );
    let backoff: f64 = (0..7).map(|i| (4.0 * 2f64.powi(i)).min(60.0)).sum();
    ensure!(backoff == 240.0, "backoff sum {backoff}");
    let bound = established + backoff;
    ensure!(
        done <= bound,
        "completed at {done:.3} s, bound {bound:.3} s"
    );
    Ok(format!(
        "established {established:.3} s, path 0 failed at {:.3} s, completed {done:.3} s <= {bound:.3} s",
        c.path_failures[0].0
    ))
}

// ---------------------------------------------------------------------------
// 9: determinism

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for s in preset("E2_scaling").unwrap().scenarios() {
        let mut s = s;
        s.seed = 42;
        let stem = format!("{}_{}_s42", s.name, s.protocol);
        for dir in [a.path(), b.path()] {
            let r = run(&s, false).map_err(|e| e.to_string())?;
            output::write_run(&r, dir, &stem).map_err(|e| e.to_string())?;
        }
        for suffix in ["csv", "summary.json"] {
            let name = format!("{stem}.{suffix}");
            let x = std::fs::read(a.path().join(&name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.path().join(&name)).map_err(|e| e.to_string())?;
            ensure!(!x.is_empty() && x == y, "{name} differs between runs");
            files += 1;
        }
    }
    Ok(format!("{files} file pairs identical"))
}

// ---------------------------------------------------------------------------
// 10: directional reproductions

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn mean_over_seeds(s: &Scenario, p: Protocol, f: fn(&sctpsim::harness::Summary) -> f64) -> f64 {
    let total: f64 = SEEDS
        .iter()
        .map(|&seed| {
            let mut s = s.with_protocol(p);
            s.seed = seed;
            f(&run(&s, false).expect("run").summary)
        })
        .sum();
    total / SEEDS.len() as f64
}

fn cell<'a>(cells: &'a [SweepCell], p: Protocol, value: f64) -> &'a SweepCell {
    cells
        .iter()
        .find(|c| c.protocol == p.name() && c.value == value)
        .expect("sweep cell")
}

fn directional() -> Outcome {
    let mut problems = Vec::new();
    let mut notes = Vec::new();

    // E1
    let t_e1 = Instant::now();
    let e1 = preset("E1_cpu").unwrap().scenario();
    let cpu = |p| mean_over_seeds(&e1, p, |s| s.cpu_utilization);
    let (base, tcp, opt) = (
        cpu(Protocol::SctpBaseline),
        cpu(Protocol::Tcp),
        cpu(Protocol::SctpOptimized),
    );
    notes.push(format!(
        "E1 cpu baseline {base:.2} tcp {tcp:.2} optimized {opt:.2} ({:.0}s)",
        t_e1.elapsed().as_secs_f64()
    ));
    if !(base >= tcp && tcp >= opt) {
        problems.push("E1 ordering".to_string());
    }

    // E2
    let t_e2 = Instant::now();
    let e2 = preset("E2_scaling").unwrap().scenario();
    let conns: Vec<String> = (1..=5).map(|n| n.to_string()).collect();
    let r = sweep(&e2, "connections", &conns, &SEEDS, &Protocol::ALL).map_err(|e| e.to_string())?;
    for p in Protocol::ALL {
        let series: Vec<f64> = (1..=5)
            .map(|n| cell(&r.cells, p, n as f64).throughput_bps)
            .collect();
        notes.push(format!(
            "E2 {p} b/s {:?}",
            series.iter().map(|x| x.round()).collect::<Vec<_>>()
        ));
        // the same 1% noise band as the optimized/baseline comparison
        if let Some(n) = (1..series.len()).find(|&i| series[i] < series[i - 1] * 0.99) {
            problems.push(format!("E2 {p} drops from {} to {} connections", n, n + 1));
        }
    }
    notes.push(format!("E2 sweep {:.0}s", t_e2.elapsed().as_secs_f64()));
    for n in 1..=5 {
        let o = cell(&r.cells, Protocol::SctpOptimized, n as f64).throughput_bps;
        let b = cell(&r.cells, Protocol::SctpBaseline, n as f64).throughput_bps;
        if o < b * 0.99 {
            problems.push(format!("E2 optimized below baseline at {n} connections"));
        }
    }

    // E3
    let t_e3 = Instant::now();
    let e3 = preset("E3_goodput").unwrap().scenario();
    let gp = |p| mean_over_seeds(&e3, p, |s| s.goodput_pct);
    let (tcp, base, opt) = (
        gp(Protocol::Tcp),
        gp(Protocol::SctpBaseline),
        gp(Protocol::SctpOptimized),
    );
    notes.push(format!(
        "E3 goodput tcp {tcp:.3} baseline {base:.3} optimized {opt:.3} ({:.0}s)",
        t_e3.elapsed().as_secs_f64()
    ));
    for (p, g) in [
        (Protocol::SctpBaseline, base),
        (Protocol::SctpOptimized, opt),
    ] {
        if g < tcp {
            problems.push(format!("E3 {p} goodput {g:.3} < tcp {tcp:.3}"));
        }
    }

    // E4
    let t_e4 = Instant::now();
    let e4 = preset("E4_loss").unwrap();
    let (key, rates) = e4.sweep.clone().unwrap();
    let r =
        sweep(&e4.scenario(), key, &rates, &SEEDS, &Protocol::ALL).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for c in r.cells.iter().filter(|c| c.protocol != "tcp") {
        let tcp = cell(&r.cells, Protocol::Tcp, c.value).loss_rate_pct;
        worst = worst.max(c.loss_rate_pct - tcp);
        if c.loss_rate_pct > tcp + 1.0 {
            problems.push(format!(
                "E4 {} at {} b/s: loss {:.3}% vs tcp {tcp:.3}%",
                c.protocol, c.value, c.loss_rate_pct
            ));
        }
    }
    notes.push(format!(
        "E4 worst sctp-tcp loss gap {worst:.3} points ({:.0}s)",
        t_e4.elapsed().as_secs_f64()
    ));

    if problems.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(format!("{} | {}", problems.join(", "), notes.join("; ")))
    }
}
