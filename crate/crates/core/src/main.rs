use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sctpsim::harness::{
    output, preset, presets, run, sweep, HarnessError, Protocol, Scenario, ScenarioError,
};

#[derive(Parser)]
#[command(name = "sctpsim", version, about = "SCTP / TCP packet-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in experiment (see preset-list).
    #[arg(long)]
    preset: Option<String>,
    /// Protocol: tcp, sctp_baseline or sctp_optimized. Repeatable.
    #[arg(long)]
    protocol: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV plus summary.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write a per-packet trace.
        #[arg(long)]
        trace: bool,
    },
    /// Sweep one key over values, seeds and protocols.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// connections, loss_rate, paced_rate or message_size.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in experiments.
    PresetList,
    /// Parse and check a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn protocols(names: &[String], fallback: Vec<Protocol>) -> Result<Vec<Protocol>, HarnessError> {
    if names.is_empty() {
        return Ok(fallback);
    }
    names
        .iter()
        .map(|n| {
            Protocol::parse(n).ok_or_else(|| {
                HarnessError::Scenario(ScenarioError::InvalidValue {
                    key: "protocol".into(),
                    line: 0,
                    msg: format!("unknown protocol {n:?}"),
                })
            })
        })
        .collect()
}

/// Base scenario, the protocols to run and any sweep carried by a preset.
fn load(
    source: &Source,
) -> Result<(Scenario, Vec<Protocol>, Option<(String, Vec<String>)>), HarnessError> {
    match (&source.scenario, &source.preset) {
        (Some(path), _) => {
            let s = Scenario::load(path)?;
            let ps = protocols(&source.protocol, vec![s.protocol])?;
            Ok((s, ps, None))
        }
        (None, Some(name)) => {
            let p = preset(name)?;
            let ps = protocols(&source.protocol, p.protocols.clone())?;
            let sw = p.sweep.clone().map(|(k, v)| (k.to_string(), v));
            Ok((p.scenario(), ps, sw))
        }
        (None, None) => {
            let s = Scenario::parse("")?;
            let ps = protocols(&source.protocol, vec![s.protocol])?;
            Ok((s, ps, None))
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            source,
            seed,
            out,
            trace,
        } => {
            let (base, ps, _) = load(&source)?;
            for p in ps {
                let mut s = base.with_protocol(p);
                if let Some(seed) = seed {
                    s.seed = seed;
                }
                let r = run(&s, trace)?;
                let stem = format!("{}_{}_s{}", s.name, p, s.seed);
                let files = output::write_run(&r, &out, &stem)?;
                println!(
                    "{p}: throughput {:.0} b/s, goodput {:.3}%, loss {:.3}%, cpu {:.2}% -> {}",
                    r.summary.throughput_bps,
                    r.summary.goodput_pct,
                    r.summary.loss_rate_pct,
                    r.summary.cpu_utilization,
                    files.csv.display()
                );
            }
            Ok(())
        }
        Command::Sweep {
            source,
            param,
            values,
            seeds,
            out,
        } => {
            let (base, ps, preset_sweep) = load(&source)?;
            let (key, vals) = match (param, preset_sweep) {
                (Some(k), _) => (k, values),
                (None, Some((k, v))) => (k, if values.is_empty() { v } else { values }),
                (None, None) => return Err(ScenarioError::UnsweepableKey(String::new()).into()),
            };
            let r = sweep(&base, &key, &vals, &seeds, &ps)?;
            std::fs::create_dir_all(&out)?;
            let stem = format!("{}_sweep_{key}", base.name);
            std::fs::write(
                out.join(format!("{stem}_runs.csv")),
                sweep::runs_csv(&r.runs),
            )?;
            let cells = out.join(format!("{stem}.csv"));
            std::fs::write(&cells, sweep::cells_csv(&r.cells))?;
            for c in &r.cells {
                println!(
                    "{} {key}={} throughput {:.0} b/s goodput {:.3}% loss {:.3}%",
                    c.protocol, c.value, c.throughput_bps, c.goodput_pct, c.loss_rate_pct
                );
            }
            println!("-> {}", cells.display());
            Ok(())
        }
        Command::PresetList => {
            for p in presets() {
                let sweep = p
                    .sweep
                    .as_ref()
                    .map(|(k, v)| format!(" (sweeps {k} over {})", v.join(",")))
                    .unwrap_or_default();
                println!("{:<12} {}{sweep}", p.name, p.description);
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let s = Scenario::load(&scenario)?;
            println!(
                "ok: {} ({}, {} connection(s), {} s)",
                s.name, s.protocol, s.connections, s.sim_time
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
