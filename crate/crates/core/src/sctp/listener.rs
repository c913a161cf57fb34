use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::association::Association;
use super::config::AssocConfig;
use super::cookie::{Cookie, CookieError};
use super::{SctpError, Transmit};
use crate::time::SimTime;
use crate::wire::{self, Chunk, InitChunk, Packet, TagVerdict, CAUSE_STALE_COOKIE};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ListenerStats {
    pub inits: u64,
    pub cookies_accepted: u64,
    pub stale_cookies: u64,
    pub bad_cookies: u64,
    pub out_of_the_blue: u64,
    pub bad_packets: u64,
}

/// Passive side. Answers INIT without keeping state and only allocates an
/// association once a valid cookie comes back.
#[derive(Debug)]
pub struct Listener {
    config: AssocConfig,
    port: u16,
    key: [u8; 32],
    rng: ChaCha8Rng,
    associations: Vec<Association>,
    by_tag: HashMap<u32, usize>,
    outbox: VecDeque<Transmit>,
    stats: ListenerStats,
}

impl Listener {
    pub fn new(config: AssocConfig, port: u16, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut key = [0u8; 32];
        rng.fill(&mut key);
        Listener {
            config,
            port,
            key,
            rng,
            associations: Vec::new(),
            by_tag: HashMap::new(),
            outbox: VecDeque::new(),
            stats: ListenerStats::default(),
        }
    }

    pub fn stats(&self) -> &ListenerStats {
        &self.stats
    }

    pub fn association_count(&self) -> usize {
        self.associations.len()
    }

    pub fn associations(&self) -> impl Iterator<Item = &Association> {
        self.associations.iter()
    }

    pub fn associations_mut(&mut self) -> impl Iterator<Item = &mut Association> {
        self.associations.iter_mut()
    }

    pub fn association(&self, index: usize) -> Option<&Association> {
        self.associations.get(index)
    }

    pub fn association_mut(&mut self, index: usize) -> Option<&mut Association> {
        self.associations.get_mut(index)
    }

    pub fn handle_packet(
        &mut self,
        now: SimTime,
        bytes: &[u8],
        from_path: usize,
    ) -> Result<(), SctpError> {
        let packet = match wire::decode_packet(bytes) {
            Ok(d) => d.packet,
            Err(e) => {
                self.stats.bad_packets += 1;
                return Err(e.into());
            }
        };
        if packet.starts_with_init() {
            if wire::verify_tag(&packet, 0) == TagVerdict::Discard {
                self.stats.out_of_the_blue += 1;
                return Err(SctpError::TagMismatch);
            }
            if let Some(Chunk::Init(init)) = packet.chunks.first() {
                return self.answer_init(now, &packet, init, from_path);
            }
        }
        if let Some(Chunk::CookieEcho(raw)) = packet.chunks.first() {
            if !self.by_tag.contains_key(&packet.header.verification_tag) {
                self.accept_cookie(now, &packet, raw, from_path)?;
            }
        }
        match self.by_tag.get(&packet.header.verification_tag) {
            Some(&i) => self.associations[i].handle_packet(now, bytes, from_path),
            None => {
                self.stats.out_of_the_blue += 1;
                Err(SctpError::TagMismatch)
            }
        }
    }

    fn answer_init(
        &mut self,
        now: SimTime,
        packet: &Packet,
        init: &InitChunk,
        from_path: usize,
    ) -> Result<(), SctpError> {
        self.stats.inits += 1;
        let local_tag = loop {
            let t: u32 = self.rng.gen();
            if t != 0 && !self.by_tag.contains_key(&t) {
                break t;
            }
        };
        let local_initial_tsn: u32 = self.rng.gen();
        let out_streams = self.config.out_streams.min(init.in_streams).max(1);
        let cookie = Cookie {
            created_at: now,
            peer_tag: init.initiate_tag,
            local_tag,
            peer_initial_tsn: init.initial_tsn,
            local_initial_tsn,
            peer_rwnd: init.rwnd,
            local_port: self.port,
            peer_port: packet.header.src_port,
            out_streams,
            in_streams: init.out_streams,
            seed: self.rng.gen(),
            addresses: init.addresses.clone(),
        };
        let ack = InitChunk {
            initiate_tag: local_tag,
            rwnd: self.config.initial_rwnd,
            out_streams,
            in_streams: u16::MAX,
            initial_tsn: local_initial_tsn,
            addresses: Vec::new(),
            cookie: Some(cookie.seal(&self.key)),
        };
        let mut reply = Packet::new(self.port, packet.header.src_port, init.initiate_tag);
        reply.chunks.push(Chunk::InitAck(ack));
        self.push(from_path, &reply)
    }

    fn accept_cookie(
        &mut self,
        now: SimTime,
        packet: &Packet,
        raw: &[u8],
        from_path: usize,
    ) -> Result<(), SctpError> {
        let cookie = match Cookie::open(raw, &self.key) {
            Ok(c) => c,
            Err(CookieError::BadSignature) | Err(CookieError::Malformed) => {
                self.stats.bad_cookies += 1;
                return Err(SctpError::BadCookieSignature);
            }
        };
        if cookie.local_tag != packet.header.verification_tag {
            self.stats.out_of_the_blue += 1;
            return Err(SctpError::TagMismatch);
        }
        let age = cookie.age(now);
        if age > self.config.valid_cookie_life {
            self.stats.stale_cookies += 1;
            let mut abort = Packet::new(self.port, cookie.peer_port, cookie.peer_tag);
            abort.chunks.push(Chunk::Abort {
                cause: CAUSE_STALE_COOKIE,
            });
            self.push(from_path, &abort)?;
            return Err(SctpError::StaleCookie {
                age,
                life: self.config.valid_cookie_life,
            });
        }
        self.stats.cookies_accepted += 1;
        let a = Association::from_cookie(self.config.clone(), &cookie, from_path, now);
        self.by_tag
            .insert(cookie.local_tag, self.associations.len());
        self.associations.push(a);
        Ok(())
    }

    fn push(&mut self, path: usize, p: &Packet) -> Result<(), SctpError> {
        let bytes = wire::encode_packet(p, self.config.mtu)?;
        self.outbox.push_back(Transmit {
            path,
            bytes,
            data_chunks: 0,
            retransmitted_chunks: 0,
            first_tsn: None,
        });
        Ok(())
    }

    /// Stateless replies first, then each association's queue.
    pub fn poll_transmit(&mut self) -> Option<Transmit> {
        if let Some(t) = self.outbox.pop_front() {
            return Some(t);
        }
        self.associations.iter_mut().find_map(|a| a.poll_transmit())
    }

    pub fn poll_timeout(&self) -> Option<SimTime> {
        self.associations
            .iter()
            .filter_map(|a| a.poll_timeout())
            .min()
    }

    pub fn handle_timeout(&mut self, now: SimTime) -> Result<(), SctpError> {
        for a in &mut self.associations {
            if a.poll_timeout().is_some_and(|t| t <= now) {
                a.handle_timeout(now)?;
            }
        }
        Ok(())
    }
}
