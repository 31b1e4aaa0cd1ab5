//! Writing run artifacts to disk and loading them back for plotting.

use std::fs;
use std::path::Path;

use tassim_core::model::NodeId;
use tassim_core::trace::{self, GateEvent, TraceLog};
use tassim_core::RunResult;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn write(path: &Path, contents: &str) -> Result<(), CsvError> {
    fs::write(path, contents).map_err(|source| CsvError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Write frames.csv, latency.csv, gates.csv, meters.csv and summary.txt.
pub fn write_run_artifacts(result: &RunResult, out_dir: &Path) -> Result<(), CsvError> {
    fs::create_dir_all(out_dir).map_err(|source| CsvError::Write {
        path: out_dir.display().to_string(),
        source,
    })?;
    write(&out_dir.join("frames.csv"), &trace::frames_csv(&result.trace))?;
    write(&out_dir.join("latency.csv"), &trace::latency_csv(&result.trace))?;
    write(&out_dir.join("gates.csv"), &trace::gates_csv(&result.trace))?;
    write(&out_dir.join("meters.csv"), &trace::meters_csv(&result.trace))?;
    write(&out_dir.join("summary.txt"), &summary_text(result))?;
    Ok(())
}

/// Human-readable run summary; also printed to standard output by `run`.
pub fn summary_text(result: &RunResult) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "stream  emitted  delivered  dropped  in_flight  max_latency_ns");
    for (name, s) in &result.stats.per_stream {
        let max_latency = trace::latency_series(&result.trace, name)
            .ok()
            .and_then(|recs| recs.iter().filter_map(|r| r.latency_ns()).max())
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{name:<7} {:<8} {:<10} {:<8} {:<10} {max_latency}",
            s.emitted, s.delivered, s.dropped, s.in_flight
        );
    }
    let total = result.stats.total();
    let _ = writeln!(
        out,
        "total   {:<8} {:<10} {:<8} {:<10}",
        total.emitted, total.delivered, total.dropped, total.in_flight
    );
    if !result.stats.drops_by_reason.is_empty() {
        let _ = writeln!(out, "drops by reason:");
        for (reason, count) in &result.stats.drops_by_reason {
            let _ = writeln!(out, "  {reason}: {count}");
        }
    }
    let deferrals: u64 = result.stats.ports.iter().map(|p| p.deferrals).sum();
    let _ = writeln!(out, "deferred past gate close: {deferrals}");
    for p in &result.stats.ports {
        for q in 0..8 {
            if p.peak_occupancy[q] > 0 {
                let _ = writeln!(
                    out,
                    "port {}->{} q{q}: peak {} B, final {} B",
                    p.node, p.to, p.peak_occupancy[q], p.final_occupancy[q]
                );
            }
        }
    }
    out
}

fn intern(names: &mut Vec<String>, name: &str) -> u32 {
    if let Some(i) = names.iter().position(|n| n == name) {
        return i as u32;
    }
    names.push(name.to_string());
    (names.len() - 1) as u32
}

/// Load frames.csv and gates.csv from a run directory back into a trace
/// log, rebuilding the name tables in first-seen order.
pub fn load_trace_dir(dir: &Path) -> Result<TraceLog, CsvError> {
    let frames_path = dir.join("frames.csv");
    let frames_text = fs::read_to_string(&frames_path).map_err(|source| CsvError::Read {
        path: frames_path.display().to_string(),
        source,
    })?;

    let mut log = TraceLog::default();
    // First pass: collect names in order of appearance.
    for line in frames_text.lines().skip(1).filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(CsvError::Format {
                path: frames_path.display().to_string(),
                message: "expected 8 columns".into(),
            });
        }
        intern(&mut log.node_names, cols[1]);
        intern(&mut log.stream_names, cols[2]);
        if let Some(to) = cols[7].split(' ').find_map(|p| p.strip_prefix("to=")) {
            intern(&mut log.node_names, to);
        }
    }
    log.frame_events =
        trace::parse_frames_csv(&frames_text, &log).map_err(|message| CsvError::Format {
            path: frames_path.display().to_string(),
            message,
        })?;

    let gates_path = dir.join("gates.csv");
    if let Ok(text) = fs::read_to_string(&gates_path) {
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(CsvError::Format {
                    path: gates_path.display().to_string(),
                    message: format!("line {}: expected 5 columns", i + 1),
                });
            }
            let (node, to) = cols[2].split_once("->").ok_or_else(|| CsvError::Format {
                path: gates_path.display().to_string(),
                message: format!("line {}: bad port '{}'", i + 1, cols[2]),
            })?;
            let parse_err = |message: String| CsvError::Format {
                path: gates_path.display().to_string(),
                message,
            };
            log.gate_events.push(GateEvent {
                time: cols[0]
                    .parse()
                    .map_err(|_| parse_err(format!("line {}: bad time", i + 1)))?,
                node: NodeId(intern(&mut log.node_names, node)),
                port_to: NodeId(intern(&mut log.node_names, to)),
                queue: cols[3]
                    .parse()
                    .map_err(|_| parse_err(format!("line {}: bad queue", i + 1)))?,
                open: cols[4] == "open",
            });
        }
    }
    Ok(log)
}

/// Streams × seq rows of latency.csv, parsed back (used by tests).
pub fn parse_latency_csv(
    text: &str,
) -> Result<Vec<(String, u32, u64, Option<u64>, bool)>, String> {
    let mut out = Vec::new();
    let mut lines = text.lines();
    if lines.next() != Some(trace::LATENCY_CSV_HEADER) {
        return Err("bad latency.csv header".into());
    }
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err("expected 6 columns".into());
        }
        let deliver = if cols[3].is_empty() {
            None
        } else {
            Some(cols[3].parse().map_err(|_| "bad deliver_ns")?)
        };
        out.push((
            cols[0].to_string(),
            cols[1].parse().map_err(|_| "bad seq")?,
            cols[2].parse().map_err(|_| "bad emit_ns")?,
            deliver,
            cols[5] == "true",
        ));
    }
    Ok(out)
}
