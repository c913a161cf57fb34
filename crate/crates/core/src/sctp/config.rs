use serde::Serialize;

use crate::rto::RtoParams;

/// Association tunables. `Default` yields the tuned data-centre parameter
/// table; [`AssocConfig::standard`] yields the stock defaults used for the
/// unoptimized preset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssocConfig {
    pub rto_initial: f64,
    pub rto_min: f64,
    pub rto_max: f64,
    pub rto_alpha: f64,
    pub rto_beta: f64,
    pub assoc_max_retrans: u32,
    pub path_max_retrans: u32,
    pub max_init_retransmits: u32,
    pub valid_cookie_life: f64,
    /// Heartbeats are sent only when this is set.
    pub heartbeat_enabled: bool,
    pub hb_interval: f64,
    pub initial_rwnd: u32,
    pub out_streams: u16,
    pub mtu: usize,
    pub chunk_size: usize,
    /// Initial congestion window is capped at this many MTUs.
    pub rtx_cwnd_multiplier: u32,
    /// Accepted for configuration fidelity; concurrent multipath is not modelled.
    pub cmt_cwnd: u32,
    pub cmt_delayed_ack: u32,
    pub sack_delay: f64,
    pub sack_every: u32,
    /// Fast retransmit threshold in missing reports.
    pub fast_rtx_threshold: u32,
    /// Packets one send opportunity may put on the wire beyond the current
    /// flight; 0 disables the limit.
    pub max_burst: u32,
    /// Account receive-side copies in a separate ledger.
    pub rx_copies: bool,
}

impl Default for AssocConfig {
    fn default() -> Self {
        AssocConfig {
            rto_initial: 4.0,
            rto_min: 1.0,
            rto_max: 60.0,
            rto_alpha: 0.125,
            rto_beta: 0.25,
            assoc_max_retrans: 10,
            path_max_retrans: 6,
            max_init_retransmits: 9,
            valid_cookie_life: 50.0,
            heartbeat_enabled: false,
            hb_interval: 25.0,
            initial_rwnd: 65536,
            out_streams: 1,
            mtu: 1500,
            chunk_size: 1468,
            rtx_cwnd_multiplier: 4,
            cmt_cwnd: 1,
            cmt_delayed_ack: 1,
            sack_delay: 0.2,
            sack_every: 2,
            fast_rtx_threshold: 4,
            max_burst: 4,
            rx_copies: true,
        }
    }
}

impl AssocConfig {
    /// Stock protocol defaults.
    pub fn standard() -> Self {
        AssocConfig {
            rto_initial: 3.0,
            valid_cookie_life: 60.0,
            hb_interval: 30.0,
            max_init_retransmits: 8,
            ..AssocConfig::default()
        }
    }

    pub fn rto_params(&self) -> RtoParams {
        RtoParams {
            initial: self.rto_initial,
            min: self.rto_min,
            max: self.rto_max,
            alpha: self.rto_alpha,
            beta: self.rto_beta,
        }
    }

    pub fn initial_cwnd(&self) -> u64 {
        let mtu = self.mtu as u64;
        (self.rtx_cwnd_multiplier as u64 * mtu).min((2 * mtu).max(4380))
    }
}
