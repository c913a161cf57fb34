//! CPU, goodput, window and throughput formulas, and per-bucket
//! aggregation into CSV rows.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::pipeline::{CopyAccount, CopyStage, StageMultipliers};
use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{name} = {value} outside [0, 100] or idle + ipf above 100")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("no samples")]
    EmptySamples,
    #[error("nothing was sent")]
    ZeroSent,
    #[error("dropped {dropped} exceeds sent {sent}")]
    DroppedExceedsSent { sent: u64, dropped: u64 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("rtt must be positive")]
    NonPositiveRtt,
    #[error("cpu capacity must be positive")]
    NonPositiveCapacity,
}

pub fn uscpu(idle_pct: f64, ipf_pct: f64) -> Result<f64, MetricsError> {
    for (name, v) in [("idle_pct", idle_pct), ("ipf_pct", ipf_pct)] {
        if !(0.0..=100.0).contains(&v) {
            return Err(MetricsError::OutOfRange { name, value: v });
        }
    }
    if idle_pct + ipf_pct > 100.0 {
        return Err(MetricsError::OutOfRange {
            name: "idle_pct + ipf_pct",
            value: idle_pct + ipf_pct,
        });
    }
    Ok(100.0 - idle_pct - ipf_pct)
}

pub fn cpu_utilization(samples: &[f64]) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Acknowledged first transmissions as a percentage of all transmissions.
pub fn goodput(acked_segments: u64, sent_segments: u64) -> Result<f64, MetricsError> {
    if sent_segments == 0 {
        return Err(MetricsError::ZeroSent);
    }
    Ok(acked_segments as f64 * 100.0 / sent_segments as f64)
}

/// Window in packets: floor(rtt * bandwidth / p_k).
pub fn max_cwnd(rtt: f64, bandwidth: f64, p_k: f64) -> Result<u64, MetricsError> {
    for (name, v) in [("rtt", rtt), ("bandwidth", bandwidth), ("p_k", p_k)] {
        if !(v > 0.0) {
            return Err(MetricsError::NonPositive(name));
        }
    }
    Ok((rtt * bandwidth / p_k).floor() as u64)
}

/// Bytes per second.
pub fn throughput_est(w: f64, mss: f64, rtt: f64) -> Result<f64, MetricsError> {
    if !(rtt > 0.0) {
        return Err(MetricsError::NonPositiveRtt);
    }
    Ok(w * mss / rtt)
}

/// (b_prev * rtt + p_k) / (rtt + t_k), bytes per second.
pub fn bandwidth_estimate(b_prev: f64, rtt: f64, p_k: f64, t_k: f64) -> Result<f64, MetricsError> {
    if !(rtt > 0.0) {
        return Err(MetricsError::NonPositiveRtt);
    }
    if t_k < 0.0 {
        return Err(MetricsError::NonPositive("t_k"));
    }
    Ok((b_prev * rtt + p_k) / (rtt + t_k))
}

/// The formula taken term by term: b_prev * rtt + p_k / rtt + t_k. Its terms
/// do not share units; kept for comparison only.
pub fn bandwidth_estimate_literal(
    b_prev: f64,
    rtt: f64,
    p_k: f64,
    t_k: f64,
) -> Result<f64, MetricsError> {
    if !(rtt > 0.0) {
        return Err(MetricsError::NonPositiveRtt);
    }
    Ok(b_prev * rtt + p_k / rtt + t_k)
}

pub fn loss_rate(sent: u64, dropped: u64) -> Result<f64, MetricsError> {
    if sent == 0 {
        return Err(MetricsError::ZeroSent);
    }
    if dropped > sent {
        return Err(MetricsError::DroppedExceedsSent { sent, dropped });
    }
    Ok(dropped as f64 * 100.0 / sent as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CpuSample {
    pub idle_pct: f64,
    pub ipf_pct: f64,
    pub at: SimTime,
}

impl CpuSample {
    /// Utilized share, clamped to [0, 100].
    pub fn uscpu(&self) -> f64 {
        (100.0 - self.idle_pct - self.ipf_pct).clamp(0.0, 100.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostModel {
    /// Work units per copied byte, before the stage multiplier.
    pub per_byte: f64,
    pub multipliers: StageMultipliers,
    pub per_call: f64,
    /// Work units per second.
    pub capacity: f64,
    pub ipf_pct: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            per_byte: 1.0,
            multipliers: StageMultipliers::default(),
            per_call: 200.0,
            capacity: 400_000.0,
            ipf_pct: 25.0,
        }
    }
}

impl CostModel {
    pub fn work(&self, copies: &CopyAccount, calls: u64) -> f64 {
        CopyStage::ALL
            .iter()
            .map(|&s| copies.bytes(s) as f64 * self.per_byte * self.multipliers.get(s))
            .sum::<f64>()
            + calls as f64 * self.per_call
    }
}

/// One sample per interval from that interval's copy delta and send calls.
pub fn synthesize_cpu_samples(
    intervals: &[(CopyAccount, u64)],
    model: &CostModel,
    interval: f64,
    start: SimTime,
) -> Result<Vec<CpuSample>, MetricsError> {
    if !(model.capacity > 0.0) {
        return Err(MetricsError::NonPositiveCapacity);
    }
    if !(interval > 0.0) {
        return Err(MetricsError::NonPositive("interval"));
    }
    Ok(intervals
        .iter()
        .enumerate()
        .map(|(i, (copies, calls))| {
            let work = model.work(copies, *calls);
            let idle = (100.0 * (1.0 - work / (model.capacity * interval))).max(0.0);
            CpuSample {
                idle_pct: idle,
                ipf_pct: model.ipf_pct,
                at: start + SimTime::from_secs_f64(interval * i as f64),
            }
        })
        .collect())
}

/// Counters for one (bucket, connection) cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BucketStats {
    pub copies: CopyAccount,
    pub calls: u64,
    pub bytes_delivered: u64,
    pub first_transmissions: u64,
    /// First transmissions that never reached the receiver.
    pub fresh_lost: u64,
    pub transmissions: u64,
    pub segments_acked: u64,
    pub packets_sent: u64,
    pub packets_dropped: u64,
    pub cwnd: Option<u64>,
    pub srtt: Option<f64>,
}

/// One CSV line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario_id: String,
    pub protocol: String,
    pub seed: u64,
    pub connections: usize,
    pub connection: usize,
    pub time_bucket: u32,
    pub cpu_utilization: f64,
    pub throughput_bps: f64,
    pub goodput_pct: f64,
    pub loss_rate_pct: f64,
    pub copy_user_bytes: u64,
    pub copy_bundle_bytes: u64,
    pub copy_dma_bytes: u64,
    pub packets_sent: u64,
    pub packets_acked: u64,
    pub packets_dropped: u64,
    pub throughput_est: f64,
}

pub const CSV_COLUMNS: [&str; 17] = [
    "scenario_id",
    "protocol",
    "seed",
    "connections",
    "connection",
    "time_bucket",
    "cpu_utilization",
    "throughput_bps",
    "goodput_pct",
    "loss_rate_pct",
    "copy_user_bytes",
    "copy_bundle_bytes",
    "copy_dma_bytes",
    "packets_sent",
    "packets_acked",
    "packets_dropped",
    "throughput_est",
];

#[derive(Clone, Debug)]
pub struct RunMeta {
    pub scenario_id: String,
    pub protocol: String,
    pub seed: u64,
    pub connections: usize,
    pub bucket: f64,
}

/// Accumulates per-bucket counters during a run.
#[derive(Clone, Debug, Default)]
pub struct Collector {
    cells: BTreeMap<(u32, usize), BucketStats>,
    bucket: f64,
    buckets: u32,
}

impl Collector {
    pub fn new(bucket: f64, sim_time: f64) -> Self {
        let buckets = if sim_time > 0.0 {
            (sim_time / bucket).ceil() as u32
        } else {
            0
        };
        Collector {
            cells: BTreeMap::new(),
            bucket,
            buckets,
        }
    }

    pub fn bucket_count(&self) -> u32 {
        self.buckets
    }

    pub fn bucket_of(&self, t: SimTime) -> u32 {
        let b = (t.as_secs_f64() / self.bucket).floor() as u32;
        b.min(self.buckets.saturating_sub(1))
    }

    pub fn cell(&mut self, bucket: u32, conn: usize) -> &mut BucketStats {
        self.cells.entry((bucket, conn)).or_default()
    }

    pub fn at(&mut self, t: SimTime, conn: usize) -> &mut BucketStats {
        let b = self.bucket_of(t);
        self.cell(b, conn)
    }

    pub fn get(&self, bucket: u32, conn: usize) -> Option<&BucketStats> {
        self.cells.get(&(bucket, conn))
    }

    /// Rows ordered by (bucket, connection); every bucket of every connection
    /// appears, even if idle.
    pub fn rows(&self, meta: &RunMeta, model: &CostModel) -> Vec<MetricsRow> {
        let empty = BucketStats::default();
        let mut rows = Vec::new();
        for b in 0..self.buckets {
            for c in 0..meta.connections {
                let s = self.cells.get(&(b, c)).unwrap_or(&empty);
                rows.push(row_for(meta, model, self.bucket, b, c, s));
            }
        }
        rows
    }
}

fn row_for(
    meta: &RunMeta,
    model: &CostModel,
    bucket: f64,
    b: u32,
    c: usize,
    s: &BucketStats,
) -> MetricsRow {
    let sample = synthesize_cpu_samples(&[(s.copies, s.calls)], model, bucket, SimTime::ZERO)
        .ok()
        .and_then(|v| v.first().copied());
    let cpu = sample.map_or(0.0, |x| x.uscpu());
    // nothing sent means nothing wasted
    let gp = goodput(
        s.first_transmissions.saturating_sub(s.fresh_lost),
        s.transmissions,
    )
    .unwrap_or(100.0);
    let loss = loss_rate(s.packets_sent, s.packets_dropped.min(s.packets_sent)).unwrap_or(0.0);
    let est = match (s.cwnd, s.srtt) {
        (Some(w), Some(rtt)) => throughput_est(w as f64, 1.0, rtt).unwrap_or(0.0) * 8.0,
        _ => 0.0,
    };
    MetricsRow {
        scenario_id: meta.scenario_id.clone(),
        protocol: meta.protocol.clone(),
        seed: meta.seed,
        connections: meta.connections,
        connection: c,
        time_bucket: b,
        cpu_utilization: cpu,
        throughput_bps: s.bytes_delivered as f64 * 8.0 / bucket,
        goodput_pct: gp,
        loss_rate_pct: loss,
        copy_user_bytes: s.copies.bytes(CopyStage::UserToMessage),
        copy_bundle_bytes: s.copies.bytes(CopyStage::BundleToNic),
        copy_dma_bytes: s.copies.bytes(CopyStage::NicDma),
        packets_sent: s.packets_sent,
        packets_acked: s.segments_acked,
        packets_dropped: s.packets_dropped,
        throughput_est: est,
    }
}
