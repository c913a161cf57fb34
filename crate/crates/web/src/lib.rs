//! Browser bindings. Each export takes plain values and returns a JSON
//! string; errors come back as a thrown string.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use sctpsim::harness::{run, Protocol, Scenario};
use sctpsim::pipeline::{CopyStage, SendPipeline};
use sctpsim::wire::{decode_packet, Chunk, Packet};
use sctpsim::SimTime;

const FAILOVER: &str = include_str!("../../core/scenarios/failover.scn");

/// Runs a scenario (file syntax) under one protocol. Returns the summary,
/// the aggregate per-bucket rows and connection 0's cwnd trace.
pub fn simulate_json(scenario: &str, protocol: &str) -> Result<String, String> {
    let p = Protocol::parse(protocol).ok_or_else(|| format!("unknown protocol {protocol:?}"))?;
    let s = Scenario::parse(scenario)
        .map_err(|e| e.to_string())?
        .with_protocol(p);
    let r = run(&s, false).map_err(|e| e.to_string())?;
    let cwnd = r
        .summary
        .per_connection
        .first()
        .map(|c| c.cwnd_trace.clone())
        .unwrap_or_default();
    let buckets: Vec<_> = r
        .rows
        .iter()
        .filter(|row| row.connection == 0)
        .map(|row| {
            json!({
                "t": row.time_bucket,
                "throughput": row.throughput_bps,
                "goodput": row.goodput_pct,
                "cpu": row.cpu_utilization,
            })
        })
        .collect();
    Ok(json!({ "summary": r.summary, "buckets": buckets, "cwnd": cwnd }).to_string())
}

#[derive(Serialize)]
struct Failover {
    primary_loss: f64,
    established_at: Option<f64>,
    completed_at: Option<f64>,
    timeouts: u64,
    path_failures: Vec<(f64, usize)>,
    primary_changes: Vec<(f64, usize)>,
}

/// Dual-homed 64 KiB transfer with the given loss on path 0.
pub fn failover_json(primary_loss: f64, seed: u32) -> Result<String, String> {
    let mut s = Scenario::parse(FAILOVER).map_err(|e| e.to_string())?;
    s.set("model.primary_loss", &primary_loss.to_string())
        .map_err(|e| e.to_string())?;
    s.set("model.seed", &seed.to_string())
        .map_err(|e| e.to_string())?;
    let r = run(&s, false).map_err(|e| e.to_string())?;
    let c = &r.summary.per_connection[0];
    let out = Failover {
        primary_loss,
        established_at: c.established_at,
        completed_at: c.completed_at,
        timeouts: c.timeouts,
        path_failures: c.path_failures.clone(),
        primary_changes: c.primary_changes.clone(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Fragments and bundles messages of the given sizes (comma separated) the
/// way the send path does, and reports the packet layout and copy totals.
pub fn packetize_json(sizes: &str, mtu: usize, chunk_size: usize) -> Result<String, String> {
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("bad size {s:?}")))
        .collect::<Result<_, _>>()?;
    if sizes.is_empty() {
        return Err("no messages".into());
    }
    let mut pipe = SendPipeline::new();
    let mut descriptors = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let (_, mut d) = pipe
            .fragment(&vec![0u8; n], chunk_size, 0, i as u16, true)
            .map_err(|e| e.to_string())?;
        descriptors.append(&mut d);
    }
    for (tsn, d) in descriptors.iter_mut().enumerate() {
        d.tsn = tsn as u64;
    }
    let mut refs: Vec<_> = descriptors.iter_mut().collect();
    let packets = pipe
        .stage_for_transmit(
            Vec::new(),
            &mut refs,
            &Packet::new(1, 2, 1),
            mtu,
            SimTime::ZERO,
        )
        .map_err(|e| e.to_string())?;
    pipe.dma_transmit(&packets);

    let layout: Vec<_> = packets
        .iter()
        .map(|bytes| {
            let p = decode_packet(bytes).expect("own encoding decodes").packet;
            let chunks: Vec<_> = p
                .chunks
                .iter()
                .filter_map(|c| match c {
                    Chunk::Data(d) => Some(json!({
                        "tsn": d.tsn,
                        "ssn": d.ssn,
                        "len": d.user_bytes.len(),
                        "begin": d.fragment_begin,
                        "end": d.fragment_end,
                    })),
                    _ => None,
                })
                .collect();
            json!({ "bytes": bytes.len(), "chunks": chunks })
        })
        .collect();
    let copies: Vec<_> = CopyStage::ALL
        .iter()
        .map(|&s| {
            let t = pipe.copies().get(s);
            json!({ "stage": format!("{s:?}"), "count": t.count, "bytes": t.bytes })
        })
        .collect();
    Ok(json!({ "packets": layout, "copies": copies }).to_string())
}

#[wasm_bindgen]
pub fn simulate(scenario: &str, protocol: &str) -> Result<String, JsValue> {
    simulate_json(scenario, protocol).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn failover(primary_loss: f64, seed: u32) -> Result<String, JsValue> {
    failover_json(primary_loss, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn packetize(sizes: &str, mtu: usize, chunk_size: usize) -> Result<String, JsValue> {
    packetize_json(sizes, mtu, chunk_size).map_err(|e| JsValue::from_str(&e))
}
