//! Report and event CSV formats.
//!
//! Result files must be byte-identical across re-runs of the same
//! manifest, so every field is formatted with a fixed precision and the
//! `seconds` column is a deterministic placeholder; per-round wall times
//! go to the log instead.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use elicitsim::sim::{FreeEventRecord, SimulationResult};

pub const REPORT_HEADER: &str = "iter,strategy,mae,elicited,free,seconds";
pub const EVENTS_HEADER: &str = "iter,user,source,target,rating,sim,status";

/// Serializes one or more runs into the report CSV (one block of rows per
/// strategy, rounds in order).
pub fn render_report(results: &[SimulationResult]) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for result in results {
        for report in &result.reports {
            let _ = writeln!(
                out,
                "{},{},{:.6},{},{},0.000",
                report.iter, result.strategy, report.mae, report.elicited, report.free
            );
        }
    }
    out
}

pub fn render_events(events: &[FreeEventRecord]) -> String {
    let mut out = String::new();
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{}",
            e.iter, e.user, e.source, e.target, e.rating, e.similarity, e.status
        );
    }
    out
}

/// One parsed report row, as consumed by `plot`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub iter: usize,
    pub strategy: String,
    pub mae: f64,
}

pub fn parse_report(path: &Path) -> Result<Vec<ReportRow>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != REPORT_HEADER {
                return Err(format!(
                    "{}: unexpected header `{line}` (expected `{REPORT_HEADER}`)",
                    path.display()
                ));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(format!("{}:{}: expected 6 fields", path.display(), idx + 1));
        }
        let parse_err = |what: &str| format!("{}:{}: invalid {what}", path.display(), idx + 1);
        rows.push(ReportRow {
            iter: fields[0].parse().map_err(|_| parse_err("iter"))?,
            strategy: fields[1].to_string(),
            mae: fields[2].parse().map_err(|_| parse_err("mae"))?,
        });
    }
    Ok(rows)
}
