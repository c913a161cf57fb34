//! CSV, summary and trace files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::driver::RunResult;
use super::HarnessError;
use crate::metrics::{MetricsRow, CSV_COLUMNS};

/// Header plus one line per row; the header is written even with no rows.
pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[MetricsRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn summary_json(result: &RunResult) -> String {
    let mut s = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Files written for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub trace: Option<PathBuf>,
}

/// Writes `<stem>.csv`, `<stem>.summary.json` and, when a trace was
/// recorded, `<stem>.trace.tsv` into `dir`.
pub fn write_run(result: &RunResult, dir: &Path, stem: &str) -> Result<RunFiles, HarnessError> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    write_csv(&result.rows, fs::File::create(&csv)?)?;
    let summary = dir.join(format!("{stem}.summary.json"));
    fs::write(&summary, summary_json(result))?;
    let trace = if result.trace.is_empty() {
        None
    } else {
        let p = dir.join(format!("{stem}.trace.tsv"));
        let mut body = String::from("time\tkind\tnode\tlink\tsize\tproto\tseq\n");
        for l in &result.trace {
            body.push_str(l);
            body.push('\n');
        }
        fs::write(&p, body)?;
        Some(p)
    };
    Ok(RunFiles {
        csv,
        summary,
        trace,
    })
}
