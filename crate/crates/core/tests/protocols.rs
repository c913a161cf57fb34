use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sctpsim::sctp::{AssocConfig, AssocState, Association, Endpoint, Listener, ReceivedMessage};
use sctpsim::tcp::{TcpConfig, TcpConnection, TcpSegment, TcpState};
use sctpsim::wire::{decode_packet, encode_packet, Chunk, Packet};
use sctpsim::SimTime;

/// One-way delay with independent random loss in each direction. Returns
/// every message the server application received.
struct Lossy {
    rng: ChaCha8Rng,
    loss: f64,
    delay: SimTime,
    up: VecDeque<(SimTime, Vec<u8>)>,
    down: VecDeque<(SimTime, Vec<u8>)>,
}

impl Lossy {
    fn new(seed: u64, loss: f64) -> Self {
        Lossy {
            rng: ChaCha8Rng::seed_from_u64(seed),
            loss,
            delay: SimTime::from_millis(30),
            up: VecDeque::new(),
            down: VecDeque::new(),
        }
    }

    fn keep(&mut self) -> bool {
        self.rng.gen::<f64>() >= self.loss
    }
}

fn sctp_pair(config: &AssocConfig) -> (Association, Listener) {
    let client = Association::initiate(
        config.clone(),
        &Endpoint {
            port: 4000,
            addresses: vec![1],
        },
        9,
        &[2],
        31,
        SimTime::ZERO,
    )
    .unwrap();
    (client, Listener::new(config.clone(), 9, 32))
}

/// Drives both ends until `until` or until nothing is pending.
fn pump_sctp(
    client: &mut Association,
    server: &mut Listener,
    ch: &mut Lossy,
    now: &mut SimTime,
    until: SimTime,
    got: &mut Vec<ReceivedMessage>,
) {
    loop {
        let at = *now + ch.delay;
        while let Some(t) = client.poll_transmit() {
            if ch.keep() {
                ch.up.push_back((at, t.bytes));
            }
        }
        while let Some(t) = server.poll_transmit() {
            if ch.keep() {
                ch.down.push_back((at, t.bytes));
            }
        }
        let next = [
            ch.up.front().map(|x| x.0),
            ch.down.front().map(|x| x.0),
            client.poll_timeout(),
            server.poll_timeout(),
        ]
        .into_iter()
        .flatten()
        .min();
        let Some(t) = next.filter(|&t| t <= until) else {
            return;
        };
        *now = t;
        if ch.up.front().is_some_and(|x| x.0 == t) {
            let (_, b) = ch.up.pop_front().unwrap();
            // a stale cookie is refused; the client keeps retrying
            let _ = server.handle_packet(t, &b, 0);
            for a in server.associations_mut() {
                got.extend(a.deliver_all());
            }
        } else if ch.down.front().is_some_and(|x| x.0 == t) {
            let (_, b) = ch.down.pop_front().unwrap();
            client.handle_packet(t, &b, 0).unwrap();
        } else {
            if client.poll_timeout() == Some(t) {
                client.handle_timeout(t).unwrap();
            }
            if server.poll_timeout() == Some(t) {
                server.handle_timeout(t).unwrap();
            }
        }
        client.check_invariants().unwrap();
    }
}

fn establish(client: &mut Association, server: &mut Listener, ch: &mut Lossy, now: &mut SimTime) {
    let mut sink = Vec::new();
    pump_sctp(client, server, ch, now, SimTime::from_secs(600), &mut sink);
    assert_eq!(client.state(), AssocState::Established);
}

fn message(stream: u16, index: u32, len: usize) -> Vec<u8> {
    let mut m = Vec::with_capacity(len.max(6));
    m.extend_from_slice(&stream.to_be_bytes());
    m.extend_from_slice(&index.to_be_bytes());
    while m.len() < len {
        m.push((index as usize + m.len()) as u8);
    }
    m
}

fn parse(m: &ReceivedMessage) -> (u16, u32) {
    let p = &m.payload;
    (
        u16::from_be_bytes([p[0], p[1]]),
        u32::from_be_bytes([p[2], p[3], p[4], p[5]]),
    )
}

fn sctp_transfer(
    seed: u64,
    loss: f64,
    ordered: bool,
) -> (Vec<ReceivedMessage>, BTreeMap<(u16, u32), Vec<u8>>) {
    let config = AssocConfig {
        out_streams: 4,
        ..AssocConfig::default()
    };
    let (mut c, mut s) = sctp_pair(&config);
    let mut ch = Lossy::new(seed, 0.0);
    let mut now = SimTime::ZERO;
    establish(&mut c, &mut s, &mut ch, &mut now);
    ch.loss = loss;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let mut sent = BTreeMap::new();
    let mut got = Vec::new();
    for i in 0..120u32 {
        let stream = rng.gen_range(0..4u16);
        let len = rng.gen_range(6..4000);
        let m = message(stream, i, len);
        c.send_message(now, stream, &m, ordered).unwrap();
        sent.insert((stream, i), m);
        let until = now + SimTime::from_millis(20);
        pump_sctp(&mut c, &mut s, &mut ch, &mut now, until, &mut got);
    }
    pump_sctp(
        &mut c,
        &mut s,
        &mut ch,
        &mut now,
        SimTime::from_secs(3000),
        &mut got,
    );
    assert_eq!(
        c.rtx_queue_len() + c.send_queue_len(),
        0,
        "data left behind"
    );
    (got, sent)
}

#[test]
fn streams_deliver_in_order_exactly_once_under_loss() {
    for seed in 0..4 {
        let (got, sent) = sctp_transfer(seed, 0.1, true);
        assert_eq!(got.len(), sent.len(), "seed {seed}");
        let mut last: BTreeMap<u16, u32> = BTreeMap::new();
        for m in &got {
            let (stream, index) = parse(m);
            assert_eq!(m.stream_id, stream);
            assert_eq!(&m.payload, &sent[&(stream, index)]);
            if let Some(&prev) = last.get(&stream) {
                assert!(index > prev, "stream {stream}: {index} after {prev}");
            }
            last.insert(stream, index);
        }
    }
}

#[test]
fn unordered_messages_arrive_exactly_once() {
    let (got, sent) = sctp_transfer(7, 0.15, false);
    let mut seen: Vec<(u16, u32)> = got.iter().map(parse).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), got.len(), "duplicate delivery");
    assert_eq!(seen, sent.keys().copied().collect::<Vec<_>>());
    assert!(got.iter().all(|m| !m.ordered));
}

#[test]
fn loss_on_one_stream_does_not_hold_back_another() {
    let config = AssocConfig {
        out_streams: 2,
        ..AssocConfig::default()
    };
    let (mut c, mut s) = sctp_pair(&config);
    let mut ch = Lossy::new(1, 0.0);
    let mut now = SimTime::ZERO;
    establish(&mut c, &mut s, &mut ch, &mut now);

    // the first stream-0 message is lost once; stream 1 keeps flowing
    let mut got = Vec::new();
    c.send_message(now, 0, &message(0, 0, 100), true).unwrap();
    let lost = c.poll_transmit().unwrap();
    assert!(lost.data_chunks > 0);
    for i in 1..4 {
        c.send_message(now, 1, &message(1, i, 100), true).unwrap();
    }
    let until = now + SimTime::from_millis(100);
    pump_sctp(&mut c, &mut s, &mut ch, &mut now, until, &mut got);
    let streams: Vec<u16> = got.iter().map(|m| m.stream_id).collect();
    assert_eq!(streams, [1, 1, 1]);
    pump_sctp(
        &mut c,
        &mut s,
        &mut ch,
        &mut now,
        SimTime::from_secs(60),
        &mut got,
    );
    assert_eq!(got.len(), 4);
    assert_eq!(got[3].stream_id, 0);
}

#[test]
fn wrong_tag_changes_nothing() {
    let config = AssocConfig::default();
    let (mut c, mut s) = sctp_pair(&config);
    let mut ch = Lossy::new(1, 0.0);
    let mut now = SimTime::ZERO;
    establish(&mut c, &mut s, &mut ch, &mut now);
    let before = (
        c.cumulative_tsn_acked(),
        c.next_tsn(),
        c.state(),
        c.stats().clone(),
    );

    let mut p = Packet::new(9, 4000, c.local_tag() ^ 1);
    p.chunks.push(Chunk::Shutdown {
        cumulative_tsn_ack: 0,
        ack: false,
    });
    let bytes = encode_packet(&p, 1500).unwrap();
    let _ = c.handle_packet(now, &bytes, 0);
    assert!(c.poll_transmit().is_none());
    let after = (
        c.cumulative_tsn_acked(),
        c.next_tsn(),
        c.state(),
        c.stats().clone(),
    );
    assert_eq!(before.0, after.0);
    assert_eq!(before.1, after.1);
    assert_eq!(before.2, after.2);
    assert_eq!(after.3.packets_discarded, before.3.packets_discarded + 1);
}

#[test]
fn handshake_survives_loss() {
    for seed in 0..6 {
        let config = AssocConfig::default();
        let (mut c, mut s) = sctp_pair(&config);
        let mut ch = Lossy::new(seed, 0.2);
        let mut now = SimTime::ZERO;
        establish(&mut c, &mut s, &mut ch, &mut now);
        assert_eq!(s.association_count(), 1, "seed {seed}");
    }
}

#[test]
fn shutdown_closes_both_ends() {
    let config = AssocConfig::default();
    let (mut c, mut s) = sctp_pair(&config);
    let mut ch = Lossy::new(3, 0.0);
    let mut now = SimTime::ZERO;
    establish(&mut c, &mut s, &mut ch, &mut now);
    let mut got = Vec::new();
    c.send_message(now, 0, b"last words", true).unwrap();
    c.shutdown(now).unwrap();
    pump_sctp(
        &mut c,
        &mut s,
        &mut ch,
        &mut now,
        SimTime::from_secs(60),
        &mut got,
    );
    assert_eq!(got.len(), 1);
    assert!(c.is_closed());
    assert!(s.associations().all(|a| a.is_closed()));
}

#[test]
fn init_ack_carries_the_initiate_tag_back() {
    let config = AssocConfig::default();
    let (mut c, mut s) = sctp_pair(&config);
    let init = c.poll_transmit().unwrap();
    s.handle_packet(SimTime::ZERO, &init.bytes, 0).unwrap();
    let ack = decode_packet(&s.poll_transmit().unwrap().bytes)
        .unwrap()
        .packet;
    assert_eq!(ack.header.verification_tag, c.local_tag());
    assert!(matches!(&ack.chunks[0], Chunk::InitAck(i) if i.cookie.is_some()));
}

// ---------------------------------------------------------------------------

fn pump_tcp(
    c: &mut TcpConnection,
    s: &mut TcpConnection,
    ch: &mut VecDeque<(SimTime, bool, TcpSegment)>,
    rng: &mut ChaCha8Rng,
    loss: f64,
    now: &mut SimTime,
    received: &mut Vec<u8>,
) {
    let delay = SimTime::from_millis(25);
    loop {
        let at = *now + delay;
        while let Some(seg) = c.poll_transmit() {
            if rng.gen::<f64>() >= loss {
                ch.push_back((at, true, seg));
            }
        }
        while let Some(seg) = s.poll_transmit() {
            if rng.gen::<f64>() >= loss {
                ch.push_back((at, false, seg));
            }
        }
        let next = [ch.front().map(|x| x.0), c.poll_timeout(), s.poll_timeout()]
            .into_iter()
            .flatten()
            .min();
        let Some(t) = next.filter(|&t| t < SimTime::from_secs(5000)) else {
            return;
        };
        *now = t;
        if ch.front().is_some_and(|x| x.0 == t) {
            let (_, up, seg) = ch.pop_front().unwrap();
            if up {
                s.handle_segment(t, &seg);
                received.extend(s.read());
            } else {
                c.handle_segment(t, &seg);
            }
        } else {
            if c.poll_timeout() == Some(t) {
                c.handle_timeout(t);
            }
            if s.poll_timeout() == Some(t) {
                s.handle_timeout(t);
            }
        }
    }
}

#[test]
fn tcp_delivers_the_byte_stream_under_loss() {
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..200_000).map(|_| rng.gen()).collect();
        let mut c = TcpConnection::connect(TcpConfig::default(), seed, SimTime::ZERO);
        let mut s = TcpConnection::listen(TcpConfig::default(), seed + 100);
        c.write(SimTime::ZERO, &data);
        c.close(SimTime::ZERO);
        let mut ch = VecDeque::new();
        let mut now = SimTime::ZERO;
        let mut received = Vec::new();
        pump_tcp(
            &mut c,
            &mut s,
            &mut ch,
            &mut rng,
            0.05,
            &mut now,
            &mut received,
        );
        assert_eq!(received.len(), data.len(), "seed {seed}");
        assert!(received == data, "seed {seed}: stream corrupted");
        assert_eq!(c.unacked_bytes(), 0);
        assert!(c.stats().fast_retransmits + c.stats().timeouts > 0);
    }
}

#[test]
fn tcp_lossless_transfer_never_retransmits() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data = vec![5u8; 100_000];
    let mut c = TcpConnection::connect(TcpConfig::default(), 1, SimTime::ZERO);
    let mut s = TcpConnection::listen(TcpConfig::default(), 2);
    c.write(SimTime::ZERO, &data);
    let mut ch = VecDeque::new();
    let mut now = SimTime::ZERO;
    let mut received = Vec::new();
    pump_tcp(
        &mut c,
        &mut s,
        &mut ch,
        &mut rng,
        0.0,
        &mut now,
        &mut received,
    );
    assert_eq!(received, data);
    assert_eq!(c.state(), TcpState::Established);
    assert_eq!(c.stats().fast_retransmits, 0);
    assert_eq!(c.stats().timeouts, 0);
    // slow start only: every cwnd change is an increase
    let trace = c.cwnd_trace();
    assert!(trace.windows(2).all(|w| w[1].1 > w[0].1));
}
