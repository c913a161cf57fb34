//! The four canned experiments.

use super::scenario::{Protocol, Scenario, ScenarioError};

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Scenario file contents.
    pub text: &'static str,
    pub protocols: Vec<Protocol>,
    /// Key and values swept, if any.
    pub sweep: Option<(&'static str, Vec<String>)>,
}

impl Preset {
    /// The base scenario for the first listed protocol.
    pub fn scenario(&self) -> Scenario {
        let s = Scenario::parse(self.text).expect("preset scenario parses");
        s.with_protocol(self.protocols[0])
    }

    /// One scenario per protocol.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let base = self.scenario();
        self.protocols
            .iter()
            .map(|&p| base.with_protocol(p))
            .collect()
    }
}

pub const PRESET_NAMES: [&str; 4] = ["E1_cpu", "E2_scaling", "E3_goodput", "E4_loss"];

fn values<T: ToString>(v: impl IntoIterator<Item = T>) -> Vec<String> {
    v.into_iter().map(|x| x.to_string()).collect()
}

pub fn preset(name: &str) -> Result<Preset, ScenarioError> {
    let all = Protocol::ALL.to_vec();
    Ok(match name {
        "E1_cpu" => Preset {
            name: "E1_cpu",
            description: "CPU utilization for 12 KB messages, all three protocols",
            text: include_str!("../../scenarios/e1_cpu.scn"),
            protocols: all,
            sweep: None,
        },
        "E2_scaling" => Preset {
            name: "E2_scaling",
            description: "aggregate throughput for 1..10 connections over a shared bottleneck",
            text: include_str!("../../scenarios/e2_scaling.scn"),
            protocols: all,
            sweep: Some(("connections", values(1..=10))),
        },
        "E3_goodput" => Preset {
            name: "E3_goodput",
            description: "goodput of 128 byte messages on 4 streams with 1% loss",
            text: include_str!("../../scenarios/e3_goodput.scn"),
            protocols: all,
            sweep: None,
        },
        "E4_loss" => Preset {
            name: "E4_loss",
            description: "loss rate against paced sending rate",
            text: include_str!("../../scenarios/e4_loss.scn"),
            protocols: all,
            sweep: Some((
                "paced_rate",
                values(["0.5Mb", "1Mb", "1.5Mb", "2Mb", "2.5Mb", "3Mb"]),
            )),
        },
        _ => return Err(ScenarioError::UnknownPreset(name.to_string())),
    })
}

pub fn presets() -> Vec<Preset> {
    PRESET_NAMES
        .iter()
        .map(|n| preset(n).expect("known preset"))
        .collect()
}
