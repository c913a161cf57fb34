use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub enum LossModel {
    None,
    Bernoulli(f64),
    /// Drops every n-th data packet, counting only packets that got past the
    /// queue.
    EveryNthData(u64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LinkCounters {
    pub offered: u64,
    pub delivered: u64,
    pub queue_dropped: u64,
    pub lost: u64,
    pub bytes_offered: u64,
}

impl LinkCounters {
    pub fn in_flight(&self) -> u64 {
        self.offered - self.delivered - self.queue_dropped - self.lost
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkOutcome {
    Arrive(SimTime),
    QueueDrop,
    /// Serialized but lost on the wire.
    Lost,
}

#[derive(Clone, Debug)]
pub struct Link {
    pub id: usize,
    pub from: String,
    pub to: String,
    pub bandwidth_bps: f64,
    pub prop_delay: SimTime,
    pub queue_limit: usize,
    pub loss: LossModel,
    rng: ChaCha8Rng,
    busy_until: SimTime,
    departures: VecDeque<SimTime>,
    data_seen: u64,
    counters: LinkCounters,
}

impl Link {
    pub fn new(
        id: usize,
        from: &str,
        to: &str,
        bandwidth_bps: f64,
        prop_delay: SimTime,
        queue_limit: usize,
        loss: LossModel,
        seed: u64,
    ) -> Self {
        Link {
            id,
            from: from.to_string(),
            to: to.to_string(),
            bandwidth_bps,
            prop_delay,
            queue_limit,
            loss,
            rng: ChaCha8Rng::seed_from_u64(seed),
            busy_until: SimTime::ZERO,
            departures: VecDeque::new(),
            data_seen: 0,
            counters: LinkCounters::default(),
        }
    }

    pub fn counters(&self) -> &LinkCounters {
        &self.counters
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    pub fn serialization(&self, bytes: usize) -> SimTime {
        SimTime::from_secs_f64(bytes as f64 * 8.0 / self.bandwidth_bps)
    }

    /// Packets queued or being serialized at `now`.
    pub fn occupancy(&mut self, now: SimTime) -> usize {
        while self.departures.front().is_some_and(|&d| d <= now) {
            self.departures.pop_front();
        }
        self.departures.len()
    }

    pub fn transmit(&mut self, bytes: usize, data: bool, now: SimTime) -> LinkOutcome {
        self.counters.offered += 1;
        self.counters.bytes_offered += bytes as u64;
        if self.occupancy(now) >= self.queue_limit {
            self.counters.queue_dropped += 1;
            return LinkOutcome::QueueDrop;
        }
        let departure = now.max(self.busy_until) + self.serialization(bytes);
        self.busy_until = departure;
        self.departures.push_back(departure);
        let lost = match self.loss {
            LossModel::None => false,
            LossModel::Bernoulli(p) => p > 0.0 && self.rng.gen::<f64>() < p,
            LossModel::EveryNthData(n) => {
                if data {
                    self.data_seen += 1;
                    n > 0 && self.data_seen % n == 0
                } else {
                    false
                }
            }
        };
        if lost {
            self.counters.lost += 1;
            LinkOutcome::Lost
        } else {
            LinkOutcome::Arrive(departure + self.prop_delay)
        }
    }

    pub(crate) fn mark_delivered(&mut self) {
        self.counters.delivered += 1;
    }
}
