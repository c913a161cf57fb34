//! Scenario files: flat `key: value` lines, `#` starts a comment.
//!
//! Keys without a prefix are the simulator parameter table plus a few
//! experiment keys. Modeling knobs live under `model.`.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::CostModel;
use crate::pipeline::StageMultipliers;
use crate::sctp::AssocConfig;
use crate::tcp::TcpConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: invalid value for {key}: {msg}")]
    InvalidValue {
        key: String,
        line: usize,
        msg: String,
    },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("cannot sweep {0:?}")]
    UnsweepableKey(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Tcp,
    SctpBaseline,
    SctpOptimized,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [
        Protocol::Tcp,
        Protocol::SctpBaseline,
        Protocol::SctpOptimized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::SctpBaseline => "sctp_baseline",
            Protocol::SctpOptimized => "sctp_optimized",
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        Protocol::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn is_sctp(self) -> bool {
        self != Protocol::Tcp
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Dumbbell,
    Dualpath,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Traffic {
    /// Writes as fast as the send buffer allows.
    Greedy,
    /// One message every size*8/rate seconds.
    Paced { rate_bps: f64 },
    /// Greedy for `on` seconds, silent for `off`.
    OnOff { on: f64, off: f64 },
}

/// Parameters accepted for completeness that do not change the model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InertKeys {
    pub debug_mask: i64,
    pub debug_file_index: i64,
    pub application_buffer_size: u64,
    pub channel_type: String,
    pub no_of_changes: u32,
    pub radio_propagation_model: String,
    pub network_interface_type: String,
    pub mac_type: String,
    pub link_layer_type: String,
    pub interface_queue_type: String,
    pub pause_time: f64,
}

impl Default for InertKeys {
    fn default() -> Self {
        InertKeys {
            debug_mask: 1,
            debug_file_index: 0,
            application_buffer_size: 0,
            channel_type: "Wireless Channel".into(),
            no_of_changes: 10,
            radio_propagation_model: "Two Ray Ground".into(),
            network_interface_type: "OFDM".into(),
            mac_type: "Mac/802_16/BS".into(),
            link_layer_type: "Logical Link".into(),
            interface_queue_type: "Drop Tail/Priority Queue".into(),
            pause_time: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub protocol: Protocol,
    pub topology: TopologyKind,
    pub connections: usize,
    pub traffic: Traffic,
    pub message_size: usize,
    pub loss_rate: f64,
    /// Overrides the loss of path 0 (both directions) when set.
    pub primary_loss: Option<f64>,
    pub sim_time: f64,
    pub seed: u64,
    pub bucket: f64,
    pub assoc: AssocConfig,
    pub tcp_delayed_ack: bool,
    pub bottleneck_bps: f64,
    pub bottleneck_delay: f64,
    pub queue_limit: usize,
    pub access_bps: f64,
    pub access_delay: f64,
    /// 0 means the sender keeps a default backlog.
    pub send_buffer_size: u64,
    /// Total bytes per connection; 0 means unbounded.
    pub transfer_bytes: u64,
    /// Connections start uniformly within [0, start_jitter).
    pub start_jitter: f64,
    pub burst_time: f64,
    pub cost: CostModel,
    pub bc_literal: bool,
    pub inert: InertKeys,
    /// Entries applied on top of the protocol defaults, kept so the protocol
    /// can be changed later.
    #[serde(skip)]
    entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

pub const TABLE_KEYS: [&str; 36] = [
    "debug_mask",
    "debug_file_index",
    "mtu",
    "data_chunk_size",
    "number_of_out_streams",
    "cmt_congestion_window",
    "cmt_del_acknowledgement",
    "rtx_congestion_window",
    "heart_beat_timer",
    "initial_receiving_window",
    "queue_size_limit",
    "hb_interval",
    "maximum_initial_retransmits",
    "rto_initial",
    "rto_max",
    "rto_min",
    "rto_beta",
    "rto_alpha",
    "association_maximum_retransmission",
    "valid_cookie_life",
    "path_maximum_retransmission",
    "application_buffer_size",
    "send_buffer_size",
    "channel_type",
    "drop_tail",
    "simulation_time",
    "packet_size",
    "application",
    "burst_time",
    "no_of_changes",
    "radio_propagation_model",
    "network_interface_type",
    "mac_type",
    "link_layer_type",
    "interface_queue_type",
    "pause_time",
];

pub const EXPERIMENT_KEYS: [&str; 7] = [
    "name",
    "protocol",
    "topology",
    "connections",
    "traffic",
    "paced_rate",
    "loss_rate",
];

pub const MODEL_KEYS: [&str; 18] = [
    "model.seed",
    "model.bucket",
    "model.cost.per_byte",
    "model.cost.user",
    "model.cost.bundle",
    "model.cost.dma",
    "model.cost.per_call",
    "model.cpu_capacity",
    "model.ipf_pct",
    "model.bc_literal",
    "model.rx_copies",
    "model.tcp_delayed_ack",
    "model.primary_loss",
    "model.access_bandwidth",
    "model.access_delay",
    "model.transfer_bytes",
    "model.start_jitter",
    "model.sack_delay",
];

/// Multipliers of the tuned SCTP build: cheaper bundling and DMA staging.
pub fn optimized_multipliers() -> StageMultipliers {
    StageMultipliers {
        user_to_message: 1.0,
        bundle_to_nic: 0.25,
        nic_dma: 0.5,
    }
}

impl Scenario {
    /// Defaults for `protocol` with no file entries.
    pub fn defaults(protocol: Protocol) -> Scenario {
        let assoc = match protocol {
            Protocol::SctpBaseline => AssocConfig::standard(),
            _ => AssocConfig::default(),
        };
        let cost = match protocol {
            Protocol::SctpOptimized => CostModel {
                multipliers: optimized_multipliers(),
                ipf_pct: 20.0,
                ..CostModel::default()
            },
            Protocol::SctpBaseline => CostModel::default(),
            Protocol::Tcp => CostModel {
                ipf_pct: 20.0,
                ..CostModel::default()
            },
        };
        Scenario {
            name: "scenario".into(),
            protocol,
            topology: TopologyKind::Dumbbell,
            connections: 1,
            traffic: Traffic::Greedy,
            message_size: 1024,
            loss_rate: 0.0,
            primary_loss: None,
            sim_time: 400.0,
            seed: 1,
            bucket: 1.0,
            assoc,
            tcp_delayed_ack: false,
            bottleneck_bps: 5e6,
            bottleneck_delay: 0.2,
            queue_limit: 50,
            access_bps: 100e6,
            access_delay: 0.001,
            send_buffer_size: 0,
            transfer_bytes: 0,
            start_jitter: 1.0,
            burst_time: 0.5,
            cost,
            bc_literal: false,
            inert: InertKeys::default(),
            entries: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let entries = tokenize(text)?;
        Self::from_entries(entries, None)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text)
    }

    fn from_entries(
        entries: Vec<Entry>,
        protocol: Option<Protocol>,
    ) -> Result<Scenario, ScenarioError> {
        let mut chosen = Protocol::SctpOptimized;
        for e in &entries {
            if e.key == "protocol" {
                chosen = Protocol::parse(&e.value)
                    .ok_or_else(|| invalid(e, "expected tcp, sctp_baseline or sctp_optimized"))?;
            }
        }
        let protocol = protocol.unwrap_or(chosen);
        let mut s = Scenario::defaults(protocol);
        let mut paced_rate = None;
        let mut traffic = None;
        for e in &entries {
            match e.key.as_str() {
                "paced_rate" => paced_rate = Some(rate(e)?),
                "traffic" => traffic = Some(e.clone()),
                "protocol" => {}
                _ => s.apply(e)?,
            }
        }
        if let Some(t) = traffic {
            s.traffic = match t.value.as_str() {
                "greedy" => Traffic::Greedy,
                "paced" => Traffic::Paced {
                    rate_bps: paced_rate
                        .ok_or_else(|| invalid(&t, "paced traffic needs paced_rate"))?,
                },
                "onoff" => Traffic::OnOff {
                    on: s.burst_time,
                    off: s.burst_time,
                },
                _ => return Err(invalid(&t, "expected greedy, paced or onoff")),
            };
        } else if let Some(r) = paced_rate {
            s.traffic = Traffic::Paced { rate_bps: r };
        }
        s.entries = entries;
        s.validate()?;
        Ok(s)
    }

    /// Same file entries, defaults taken from another protocol.
    pub fn with_protocol(&self, protocol: Protocol) -> Scenario {
        let mut s = Self::from_entries(self.entries.clone(), Some(protocol))
            .expect("entries were valid before");
        // programmatic edits made after parsing survive
        s.seed = self.seed;
        s
    }

    /// Sets one key as if it appeared at the end of the file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        let e = Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: 0,
        };
        let mut entries = self.entries.clone();
        entries.push(e);
        let seed = self.seed;
        *self = Self::from_entries(entries, Some(self.protocol))?;
        if key != "model.seed" {
            self.seed = seed;
        }
        Ok(())
    }

    pub fn tcp_config(&self) -> TcpConfig {
        TcpConfig {
            mss: self.assoc.mtu - crate::tcp::HEADER_LEN,
            initial_cwnd: self.assoc.initial_cwnd(),
            rwnd: self.assoc.initial_rwnd,
            rto: self.assoc.rto_params(),
            delayed_ack: self.tcp_delayed_ack,
            max_retrans: self.assoc.assoc_max_retrans,
            ..TcpConfig::default()
        }
    }

    fn apply(&mut self, e: &Entry) -> Result<(), ScenarioError> {
        let a = &mut self.assoc;
        match e.key.as_str() {
            "name" => self.name = e.value.clone(),
            "topology" => {
                self.topology = match e.value.as_str() {
                    "dumbbell" => TopologyKind::Dumbbell,
                    "dualpath" => TopologyKind::Dualpath,
                    _ => return Err(invalid(e, "expected dumbbell or dualpath")),
                }
            }
            "connections" => self.connections = int(e)?,
            "loss_rate" => self.loss_rate = num(e)?,
            "debug_mask" => self.inert.debug_mask = int(e)?,
            "debug_file_index" => self.inert.debug_file_index = int(e)?,
            "mtu" => a.mtu = int(e)?,
            "data_chunk_size" => a.chunk_size = int(e)?,
            "number_of_out_streams" => a.out_streams = int(e)?,
            "cmt_congestion_window" => a.cmt_cwnd = int(e)?,
            "cmt_del_acknowledgement" => a.cmt_delayed_ack = int(e)?,
            "rtx_congestion_window" => a.rtx_cwnd_multiplier = int(e)?,
            "heart_beat_timer" => a.heartbeat_enabled = int::<u32>(e)? != 0,
            "initial_receiving_window" => a.initial_rwnd = int(e)?,
            "queue_size_limit" => self.queue_limit = int(e)?,
            "hb_interval" => a.hb_interval = num(e)?,
            "maximum_initial_retransmits" => a.max_init_retransmits = int(e)?,
            "rto_initial" => a.rto_initial = num(e)?,
            "rto_max" => a.rto_max = num(e)?,
            "rto_min" => a.rto_min = num(e)?,
            "rto_beta" => a.rto_beta = num(e)?,
            "rto_alpha" => a.rto_alpha = num(e)?,
            "association_maximum_retransmission" => a.assoc_max_retrans = int(e)?,
            "valid_cookie_life" => a.valid_cookie_life = num(e)?,
            "path_maximum_retransmission" => a.path_max_retrans = int(e)?,
            "application_buffer_size" => self.inert.application_buffer_size = int(e)?,
            "send_buffer_size" => self.send_buffer_size = int(e)?,
            "channel_type" => self.inert.channel_type = e.value.clone(),
            "drop_tail" => {
                let (bw, delay) = drop_tail(e)?;
                self.bottleneck_bps = bw;
                self.bottleneck_delay = delay;
            }
            "simulation_time" => self.sim_time = num(e)?,
            "packet_size" => self.message_size = int(e)?,
            "application" => {
                if !e.value.eq_ignore_ascii_case("ftp") {
                    return Err(invalid(e, "only ftp is supported"));
                }
            }
            "burst_time" => self.burst_time = num(e)?,
            "no_of_changes" => self.inert.no_of_changes = int(e)?,
            "radio_propagation_model" => self.inert.radio_propagation_model = e.value.clone(),
            "network_interface_type" => self.inert.network_interface_type = e.value.clone(),
            "mac_type" => self.inert.mac_type = e.value.clone(),
            "link_layer_type" => self.inert.link_layer_type = e.value.clone(),
            "interface_queue_type" => self.inert.interface_queue_type = e.value.clone(),
            "pause_time" => self.inert.pause_time = num(e)?,
            "model.seed" => self.seed = int(e)?,
            "model.bucket" => self.bucket = num(e)?,
            "model.cost.per_byte" => self.cost.per_byte = num(e)?,
            "model.cost.user" => self.cost.multipliers.user_to_message = num(e)?,
            "model.cost.bundle" => self.cost.multipliers.bundle_to_nic = num(e)?,
            "model.cost.dma" => self.cost.multipliers.nic_dma = num(e)?,
            "model.cost.per_call" => self.cost.per_call = num(e)?,
            "model.cpu_capacity" => self.cost.capacity = num(e)?,
            "model.ipf_pct" => self.cost.ipf_pct = num(e)?,
            "model.bc_literal" => self.bc_literal = boolean(e)?,
            "model.rx_copies" => a.rx_copies = boolean(e)?,
            "model.tcp_delayed_ack" => self.tcp_delayed_ack = boolean(e)?,
            "model.primary_loss" => self.primary_loss = Some(num(e)?),
            "model.access_bandwidth" => self.access_bps = bandwidth(e, &e.value)?,
            "model.access_delay" => self.access_delay = duration(e, &e.value)?,
            "model.transfer_bytes" => self.transfer_bytes = int(e)?,
            "model.start_jitter" => self.start_jitter = num(e)?,
            "model.sack_delay" => a.sack_delay = num(e)?,
            _ => {
                return Err(ScenarioError::UnknownKey {
                    key: e.key.clone(),
                    line: e.line,
                })
            }
        }
        Ok(())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .rev()
            .find(|e| e.key == key)
            .map_or(0, |e| e.line)
    }

    fn check(&self, ok: bool, key: &str, msg: &str) -> Result<(), ScenarioError> {
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::InvalidValue {
                key: key.to_string(),
                line: self.line_of(key),
                msg: msg.to_string(),
            })
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let a = &self.assoc;
        self.check(a.rto_min > 0.0, "rto_min", "must be > 0")?;
        self.check(a.rto_max >= a.rto_min, "rto_max", "must be >= rto_min")?;
        self.check(
            a.rto_initial >= a.rto_min && a.rto_initial <= a.rto_max,
            "rto_initial",
            "must lie within [rto_min, rto_max]",
        )?;
        self.check(
            a.rto_alpha > 0.0 && a.rto_alpha < 1.0,
            "rto_alpha",
            "must be in (0, 1)",
        )?;
        self.check(
            a.rto_beta > 0.0 && a.rto_beta < 1.0,
            "rto_beta",
            "must be in (0, 1)",
        )?;
        self.check(
            (128..=65535).contains(&a.mtu),
            "mtu",
            "must be in [128, 65535]",
        )?;
        self.check(
            a.chunk_size >= 1 && a.chunk_size + 28 <= a.mtu,
            "data_chunk_size",
            "must be >= 1 and fit in one packet",
        )?;
        self.check(a.out_streams >= 1, "number_of_out_streams", "must be >= 1")?;
        self.check(
            a.initial_rwnd >= 1500,
            "initial_receiving_window",
            "must be >= 1500",
        )?;
        self.check(
            a.rtx_cwnd_multiplier >= 1,
            "rtx_congestion_window",
            "must be >= 1",
        )?;
        self.check(a.hb_interval > 0.0, "hb_interval", "must be > 0")?;
        self.check(
            a.valid_cookie_life > 0.0,
            "valid_cookie_life",
            "must be > 0",
        )?;
        self.check(self.queue_limit >= 1, "queue_size_limit", "must be >= 1")?;
        self.check(self.sim_time >= 0.0, "simulation_time", "must be >= 0")?;
        self.check(self.message_size >= 1, "packet_size", "must be >= 1")?;
        self.check(
            (1..=1000).contains(&self.connections),
            "connections",
            "must be in [1, 1000]",
        )?;
        self.check(
            (0.0..=1.0).contains(&self.loss_rate),
            "loss_rate",
            "must be a probability",
        )?;
        if let Some(p) = self.primary_loss {
            self.check(
                (0.0..=1.0).contains(&p),
                "model.primary_loss",
                "must be a probability",
            )?;
        }
        self.check(self.bucket > 0.0, "model.bucket", "must be > 0")?;
        self.check(
            self.cost.capacity > 0.0,
            "model.cpu_capacity",
            "must be > 0",
        )?;
        self.check(
            (0.0..=100.0).contains(&self.cost.ipf_pct),
            "model.ipf_pct",
            "must be a percentage",
        )?;
        self.check(self.burst_time > 0.0, "burst_time", "must be > 0")?;
        self.check(
            self.bottleneck_bps > 0.0,
            "drop_tail",
            "bandwidth must be > 0",
        )?;
        self.check(
            self.access_bps > 0.0,
            "model.access_bandwidth",
            "must be > 0",
        )?;
        self.check(
            self.start_jitter >= 0.0,
            "model.start_jitter",
            "must be >= 0",
        )?;
        if let Traffic::Paced { rate_bps } = self.traffic {
            self.check(rate_bps > 0.0, "paced_rate", "must be > 0")?;
        }
        Ok(())
    }
}

fn tokenize(text: &str) -> Result<Vec<Entry>, ScenarioError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once(':') else {
            return Err(ScenarioError::ParseError {
                line,
                msg: format!("expected `key: value`, got {body:?}"),
            });
        };
        let key = k.trim();
        let value = v.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ScenarioError::ParseError {
                line,
                msg: "empty key or value".into(),
            });
        }
        if !is_known(key) {
            return Err(ScenarioError::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(out)
}

pub fn is_known(key: &str) -> bool {
    TABLE_KEYS.contains(&key) || EXPERIMENT_KEYS.contains(&key) || MODEL_KEYS.contains(&key)
}

fn invalid(e: &Entry, msg: &str) -> ScenarioError {
    ScenarioError::InvalidValue {
        key: e.key.clone(),
        line: e.line,
        msg: msg.to_string(),
    }
}

const UNIT_WORDS: [&str; 9] = [
    "seconds", "second", "secs", "sec", "s", "attempts", "attempt", "bytes", "b",
];

/// Strips a trailing unit word ("25 seconds", "9 attempts").
fn strip_unit(v: &str) -> &str {
    let v = v.trim();
    for w in UNIT_WORDS {
        if let Some(head) = v.strip_suffix(w) {
            let head = head.trim_end();
            if !head.is_empty() && head.ends_with(|c: char| c.is_ascii_digit() || c == '.') {
                return head;
            }
        }
    }
    // "6 attempts (per destination address)"
    match v.find(" (") {
        Some(p) => strip_unit(&v[..p]),
        None => v,
    }
}

fn num(e: &Entry) -> Result<f64, ScenarioError> {
    let v = strip_unit(&e.value);
    let parsed = if let Some((n, d)) = v.split_once('/') {
        match (n.trim().parse::<f64>(), d.trim().parse::<f64>()) {
            (Ok(n), Ok(d)) if d != 0.0 => Ok(n / d),
            _ => Err(()),
        }
    } else {
        v.parse::<f64>().map_err(|_| ())
    };
    match parsed {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(invalid(e, "expected a number")),
    }
}

fn int<T: std::str::FromStr>(e: &Entry) -> Result<T, ScenarioError> {
    strip_unit(&e.value)
        .parse::<T>()
        .map_err(|_| invalid(e, "expected a non-negative integer"))
}

fn boolean(e: &Entry) -> Result<bool, ScenarioError> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(invalid(e, "expected true or false")),
    }
}

fn split_number(s: &str) -> (&str, &str) {
    let s = s.trim();
    let end = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(s.len());
    (&s[..end], s[end..].trim())
}

/// "5Mb", "100 Mb", "1.5Mbps", "64Kb", "1000" (bits per second).
fn bandwidth(e: &Entry, s: &str) -> Result<f64, ScenarioError> {
    let (n, unit) = split_number(s);
    let n: f64 = n
        .parse()
        .map_err(|_| invalid(e, "expected a bandwidth like 5Mb"))?;
    let scale = match unit.trim_end_matches("ps").trim_end_matches("/s") {
        "" | "b" => 1.0,
        "Kb" | "kb" | "K" | "k" => 1e3,
        "Mb" | "mb" | "M" | "m" => 1e6,
        "Gb" | "gb" | "G" | "g" => 1e9,
        _ => return Err(invalid(e, "unknown bandwidth unit")),
    };
    Ok(n * scale)
}

/// "200ms", "0.2s", "150us", "2" (seconds).
fn duration(e: &Entry, s: &str) -> Result<f64, ScenarioError> {
    let (n, unit) = split_number(s);
    let n: f64 = n
        .parse()
        .map_err(|_| invalid(e, "expected a duration like 200ms"))?;
    let scale = match unit {
        "" | "s" => 1.0,
        "ms" => 1e-3,
        "us" => 1e-6,
        _ => return Err(invalid(e, "unknown time unit")),
    };
    Ok(n * scale)
}

fn rate(e: &Entry) -> Result<f64, ScenarioError> {
    bandwidth(e, &e.value)
}

/// "5 Mb 200ms" -> (5e6 bits/s, 0.2 s).
fn drop_tail(e: &Entry) -> Result<(f64, f64), ScenarioError> {
    let v = e.value.trim();
    let split = v
        .char_indices()
        .skip(1)
        .find(|&(i, c)| c.is_ascii_digit() && v[..i].ends_with(|p: char| p.is_whitespace()))
        .map(|(i, _)| i)
        .ok_or_else(|| invalid(e, "expected `<bandwidth> <delay>`, e.g. 5Mb 200ms"))?;
    let bw = bandwidth(e, v[..split].trim())?;
    let d = duration(e, v[split..].trim())?;
    Ok((bw, d))
}
