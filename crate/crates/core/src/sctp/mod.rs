//! SCTP-lite: cookie handshake, multi-streaming, SACK reliability with
//! TCP-style congestion control, heartbeats and multi-homed failover.
//!
//! Everything here is sans-IO. An [`Association`] or [`Listener`] consumes
//! packets and timer expiries and queues [`Transmit`]s for the caller, who
//! owns the clock.

mod association;
mod config;
mod cookie;
mod listener;
mod path;
mod stream;

pub use association::{AssocEvent, AssocState, AssocStats, Association, Endpoint};
pub use config::AssocConfig;
pub use cookie::{Cookie, CookieError};
pub use listener::{Listener, ListenerStats};
pub use path::PathState;
pub use stream::{ReceivedMessage, StreamState};

use thiserror::Error;

use crate::pipeline::PipelineError;
use crate::rto::NonPositiveSample;
use crate::wire::WireError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SctpError {
    #[error("no peer addresses")]
    NoAddresses,
    #[error("association not established")]
    NotEstablished,
    #[error("stream {0} out of range")]
    BadStream(u16),
    #[error("cookie expired {age:.3}s after creation (lifetime {life}s)")]
    StaleCookie { age: f64, life: f64 },
    #[error("cookie signature invalid")]
    BadCookieSignature,
    #[error("verification tag mismatch")]
    TagMismatch,
    #[error("no such path {0}")]
    BadPath(usize),
    #[error(transparent)]
    Sample(#[from] NonPositiveSample),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// An encoded packet ready for the network, addressed by path index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmit {
    pub path: usize,
    pub bytes: Vec<u8>,
    pub data_chunks: u32,
    pub retransmitted_chunks: u32,
    /// TSN of the first DATA chunk, for tracing.
    pub first_tsn: Option<u32>,
}

/// Maps a 32-bit serial number onto the 64-bit line closest to `reference`.
pub(crate) fn unwrap_serial(value: u32, reference: u64) -> u64 {
    let diff = value.wrapping_sub(reference as u32) as i32 as i64;
    (reference as i64 + diff) as u64
}
