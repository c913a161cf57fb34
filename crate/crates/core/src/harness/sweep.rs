//! Parameter sweeps: values x seeds x protocols, one simulator per cell.

use serde::Serialize;

use super::driver::{run, RunResult};
use super::scenario::{Protocol, Scenario, ScenarioError, Traffic};
use super::HarnessError;

pub const SWEEPABLE: [&str; 5] = [
    "connections",
    "loss_rate",
    "paced_rate",
    "message_size",
    "packet_size",
];

/// Totals of one (protocol, value, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRun {
    pub protocol: String,
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub throughput_bps: f64,
    pub goodput_pct: f64,
    pub loss_rate_pct: f64,
    pub cpu_utilization: f64,
    pub bytes_delivered: u64,
    pub packets_sent: u64,
    pub packets_dropped: u64,
}

/// Mean over seeds of one (protocol, value) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub protocol: String,
    pub param: String,
    pub value: f64,
    pub seeds: usize,
    pub throughput_bps: f64,
    pub goodput_pct: f64,
    pub loss_rate_pct: f64,
    pub cpu_utilization: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    pub cells: Vec<SweepCell>,
}

/// Applies one sweep value to a copy of `base`.
pub fn apply(base: &Scenario, key: &str, value: &str) -> Result<Scenario, ScenarioError> {
    let mut s = base.clone();
    match key {
        "message_size" | "packet_size" => s.set("packet_size", value)?,
        "paced_rate" => {
            s.set("paced_rate", value)?;
            s.set("traffic", "paced")?;
        }
        "connections" | "loss_rate" => s.set(key, value)?,
        _ => return Err(ScenarioError::UnsweepableKey(key.to_string())),
    }
    Ok(s)
}

fn numeric(s: &Scenario, key: &str) -> f64 {
    match key {
        "connections" => s.connections as f64,
        "loss_rate" => s.loss_rate,
        "paced_rate" => match s.traffic {
            Traffic::Paced { rate_bps } => rate_bps,
            _ => 0.0,
        },
        _ => s.message_size as f64,
    }
}

struct Job {
    scenario: Scenario,
    value: f64,
}

fn execute(job: &Job) -> Result<(Job, RunResult), HarnessError> {
    let r = run(&job.scenario, false)?;
    Ok((
        Job {
            scenario: job.scenario.clone(),
            value: job.value,
        },
        r,
    ))
}

pub fn sweep(
    base: &Scenario,
    key: &str,
    values: &[String],
    seeds: &[u64],
    protocols: &[Protocol],
) -> Result<SweepResult, HarnessError> {
    if values.is_empty() || !SWEEPABLE.contains(&key) {
        return Err(ScenarioError::UnsweepableKey(key.to_string()).into());
    }
    let mut jobs = Vec::new();
    for &p in protocols {
        let proto = base.with_protocol(p);
        for v in values {
            let s = apply(&proto, key, v)?;
            let value = numeric(&s, key);
            for &seed in seeds {
                let mut scenario = s.clone();
                scenario.seed = seed;
                jobs.push(Job { scenario, value });
            }
        }
    }

    #[cfg(feature = "parallel")]
    let done: Vec<_> = {
        use rayon::prelude::*;
        jobs.par_iter().map(execute).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let done: Vec<_> = jobs.iter().map(execute).collect::<Result<_, _>>()?;

    let mut runs: Vec<SweepRun> = done
        .into_iter()
        .map(|(job, r)| {
            let m = &r.summary;
            SweepRun {
                protocol: job.scenario.protocol.name().to_string(),
                param: key.to_string(),
                value: job.value,
                seed: job.scenario.seed,
                throughput_bps: m.throughput_bps,
                goodput_pct: m.goodput_pct,
                loss_rate_pct: m.loss_rate_pct,
                cpu_utilization: m.cpu_utilization,
                bytes_delivered: m.bytes_delivered,
                packets_sent: m.packets_sent,
                packets_dropped: m.packets_dropped,
            }
        })
        .collect();
    runs.sort_by(|a, b| {
        a.protocol
            .cmp(&b.protocol)
            .then(a.value.total_cmp(&b.value))
            .then(a.seed.cmp(&b.seed))
    });
    let cells = aggregate(&runs);
    Ok(SweepResult { runs, cells })
}

/// Per-(protocol, value) means, in the order the runs are sorted.
pub fn aggregate(runs: &[SweepRun]) -> Vec<SweepCell> {
    let mut cells: Vec<SweepCell> = Vec::new();
    let mut group: Vec<&SweepRun> = Vec::new();
    let flush = |group: &mut Vec<&SweepRun>, cells: &mut Vec<SweepCell>| {
        if let Some(first) = group.first() {
            let n = group.len() as f64;
            let mean = |f: fn(&SweepRun) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            cells.push(SweepCell {
                protocol: first.protocol.clone(),
                param: first.param.clone(),
                value: first.value,
                seeds: group.len(),
                throughput_bps: mean(|r| r.throughput_bps),
                goodput_pct: mean(|r| r.goodput_pct),
                loss_rate_pct: mean(|r| r.loss_rate_pct),
                cpu_utilization: mean(|r| r.cpu_utilization),
            });
        }
        group.clear();
    };
    for r in runs {
        if group
            .first()
            .is_some_and(|g| g.protocol != r.protocol || g.value != r.value)
        {
            flush(&mut group, &mut cells);
        }
        group.push(r);
    }
    flush(&mut group, &mut cells);
    cells
}

pub fn runs_csv(runs: &[SweepRun]) -> String {
    to_csv(runs)
}

pub fn cells_csv(cells: &[SweepCell]) -> String {
    to_csv(cells)
}

fn to_csv<T: Serialize>(items: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in items {
        w.serialize(i).expect("sweep rows serialize");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}
