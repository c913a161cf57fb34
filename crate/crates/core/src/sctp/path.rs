use crate::rto::{NonPositiveSample, RtoEstimator, RtoParams};
use crate::time::SimTime;

/// One destination address of a multi-homed association.
#[derive(Clone, Debug)]
pub struct PathState {
    pub address: u32,
    pub active: bool,
    pub error_count: u32,
    pub cwnd: u64,
    pub ssthresh: u64,
    /// Payload bytes sent on this path and neither acknowledged nor marked
    /// for retransmission.
    pub flight_size: u64,
    pub partial_bytes_acked: u64,
    pub hb_due_at: SimTime,
    pub(crate) rto: RtoEstimator,
    pub(crate) t3_deadline: Option<SimTime>,
    /// TSN currently timed for an RTT sample, with its send time.
    pub(crate) timed: Option<(u64, SimTime)>,
    pub(crate) last_data_sent: Option<SimTime>,
    pub(crate) hb_outstanding: bool,
}

impl PathState {
    pub fn new(address: u32, params: RtoParams, cwnd: u64, ssthresh: u64) -> Self {
        PathState {
            address,
            active: true,
            error_count: 0,
            cwnd,
            ssthresh,
            flight_size: 0,
            partial_bytes_acked: 0,
            hb_due_at: SimTime::MAX,
            rto: RtoEstimator::new(params),
            t3_deadline: None,
            timed: None,
            last_data_sent: None,
            hb_outstanding: false,
        }
    }

    pub fn rto(&self) -> f64 {
        self.rto.rto()
    }

    pub fn srtt(&self) -> Option<f64> {
        self.rto.srtt()
    }

    pub fn rttvar(&self) -> Option<f64> {
        self.rto.rttvar()
    }

    pub fn t3_deadline(&self) -> Option<SimTime> {
        self.t3_deadline
    }

    pub fn update_rto(&mut self, sample: f64) -> Result<f64, NonPositiveSample> {
        self.rto.update(sample)
    }

    pub(crate) fn rto_duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.rto.rto())
    }
}
