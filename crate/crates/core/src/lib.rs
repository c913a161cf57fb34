//! Packet-level simulator for an SCTP-style transport and a TCP Reno
//! baseline over a deterministic discrete-event network, with copy-cost
//! accounting and CSV metrics.
//!
//! The transports are sans-IO state machines: feed them packets and
//! timeouts, drain `poll_transmit`. [`harness::run`] wires them to
//! [`netsim::Simulator`] for whole experiments.

pub mod harness;
pub mod metrics;
pub mod netsim;
pub mod pipeline;
pub mod rto;
pub mod sctp;
pub mod tcp;
pub mod time;
pub mod wire;

pub use harness::{run, Protocol, Scenario};
pub use time::SimTime;
