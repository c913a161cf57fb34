//! Retransmission timeout estimation shared by both transports.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("rtt sample must be positive, got {0}")]
pub struct NonPositiveSample(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RtoParams {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RtoParams {
    fn default() -> Self {
        RtoParams {
            initial: 4.0,
            min: 1.0,
            max: 60.0,
            alpha: 0.125,
            beta: 0.25,
        }
    }
}

/// Smoothed RTT state. All values are in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RtoEstimator {
    params: RtoParams,
    srtt: Option<f64>,
    rttvar: Option<f64>,
    rto: f64,
}

impl RtoEstimator {
    pub fn new(params: RtoParams) -> Self {
        RtoEstimator {
            params,
            srtt: None,
            rttvar: None,
            rto: params.initial.clamp(params.min, params.max),
        }
    }

    pub fn rto(&self) -> f64 {
        self.rto
    }

    pub fn srtt(&self) -> Option<f64> {
        self.srtt
    }

    pub fn rttvar(&self) -> Option<f64> {
        self.rttvar
    }

    pub fn params(&self) -> &RtoParams {
        &self.params
    }

    pub fn update(&mut self, sample: f64) -> Result<f64, NonPositiveSample> {
        if !(sample > 0.0) {
            return Err(NonPositiveSample(sample));
        }
        let (a, b) = (self.params.alpha, self.params.beta);
        match (self.srtt, self.rttvar) {
            (Some(srtt), Some(rttvar)) => {
                self.rttvar = Some((1.0 - b) * rttvar + b * (srtt - sample).abs());
                self.srtt = Some((1.0 - a) * srtt + a * sample);
            }
            _ => {
                self.srtt = Some(sample);
                self.rttvar = Some(sample / 2.0);
            }
        }
        let raw = self.srtt.unwrap() + 4.0 * self.rttvar.unwrap();
        self.rto = raw.clamp(self.params.min, self.params.max);
        Ok(self.rto)
    }

    /// Doubles the timeout, capped at the maximum.
    pub fn backoff(&mut self) -> f64 {
        self.rto = (self.rto * 2.0).min(self.params.max);
        self.rto
    }
}
