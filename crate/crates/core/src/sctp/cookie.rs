//! State cookie carried in INIT_ACK and echoed back in COOKIE_ECHO.
//!
//! The cookie holds everything needed to build the association, so the
//! listener keeps no per-INIT state. A truncated SHA-256 over a per-listener
//! secret and the cookie body authenticates it.

use sha2::{Digest, Sha256};

use crate::time::SimTime;

const MAC_LEN: usize = 8;
const FIXED_LEN: usize = 8 + 4 * 6 + 2 * 4 + 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cookie {
    pub created_at: SimTime,
    pub peer_tag: u32,
    pub local_tag: u32,
    pub peer_initial_tsn: u32,
    pub local_initial_tsn: u32,
    pub peer_rwnd: u32,
    pub local_port: u16,
    pub peer_port: u16,
    pub out_streams: u16,
    pub in_streams: u16,
    /// Seed for the association's own generator.
    pub seed: u32,
    pub addresses: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CookieError {
    Malformed,
    BadSignature,
}

fn mac(key: &[u8; 32], body: &[u8]) -> [u8; MAC_LEN] {
    let digest = Sha256::new()
        .chain_update(key)
        .chain_update(body)
        .finalize();
    let mut out = [0u8; MAC_LEN];
    out.copy_from_slice(&digest[..MAC_LEN]);
    out
}

impl Cookie {
    pub fn seal(&self, key: &[u8; 32]) -> Vec<u8> {
        let mut b = Vec::with_capacity(FIXED_LEN + 4 * self.addresses.len() + MAC_LEN);
        b.extend_from_slice(&self.created_at.as_nanos().to_be_bytes());
        for v in [
            self.peer_tag,
            self.local_tag,
            self.peer_initial_tsn,
            self.local_initial_tsn,
            self.peer_rwnd,
            self.seed,
        ] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        for v in [
            self.local_port,
            self.peer_port,
            self.out_streams,
            self.in_streams,
        ] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(&(self.addresses.len() as u16).to_be_bytes());
        for a in &self.addresses {
            b.extend_from_slice(&a.to_be_bytes());
        }
        let m = mac(key, &b);
        b.extend_from_slice(&m);
        b
    }

    pub fn open(bytes: &[u8], key: &[u8; 32]) -> Result<Cookie, CookieError> {
        if bytes.len() < FIXED_LEN + MAC_LEN {
            return Err(CookieError::Malformed);
        }
        let (body, tag) = bytes.split_at(bytes.len() - MAC_LEN);
        if mac(key, body) != tag {
            return Err(CookieError::BadSignature);
        }
        let u32_at = |i: usize| u32::from_be_bytes(body[i..i + 4].try_into().unwrap());
        let u16_at = |i: usize| u16::from_be_bytes([body[i], body[i + 1]]);
        let n = u16_at(40) as usize;
        if body.len() != FIXED_LEN + 4 * n {
            return Err(CookieError::Malformed);
        }
        Ok(Cookie {
            created_at: SimTime::from_nanos(u64::from_be_bytes(body[..8].try_into().unwrap())),
            peer_tag: u32_at(8),
            local_tag: u32_at(12),
            peer_initial_tsn: u32_at(16),
            local_initial_tsn: u32_at(20),
            peer_rwnd: u32_at(24),
            seed: u32_at(28),
            local_port: u16_at(32),
            peer_port: u16_at(34),
            out_streams: u16_at(36),
            in_streams: u16_at(38),
            addresses: (0..n).map(|i| u32_at(FIXED_LEN + 4 * i)).collect(),
        })
    }

    pub fn age(&self, now: SimTime) -> f64 {
        now.saturating_sub(self.created_at).as_secs_f64()
    }
}
