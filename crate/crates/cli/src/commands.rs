//! Command implementations behind the CLI: validate, run, plot. Everything
//! returns a process exit code: 0 success, 1 validation/feasibility
//! failure, 2 I/O error.

use std::path::{Path, PathBuf};

use crate::config::{ConfigDoc, ConfigFileError};
use crate::{csvio, svg};
use tassim_core::{engine, validator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

fn load_config(path: &Path) -> Result<tassim_core::SimConfig, i32> {
    let doc = match ConfigDoc::load(path) {
        Ok(doc) => doc,
        Err(ConfigFileError::Io { path, source }) => {
            eprintln!("error: cannot read {path}: {source}");
            return Err(EXIT_IO);
        }
        Err(err) => {
            eprintln!("error: {err}");
            return Err(EXIT_INVALID);
        }
    };
    match doc.to_sim_config() {
        Ok(config) => Ok(config),
        Err(err) => {
            eprintln!("error: {err}");
            Err(EXIT_INVALID)
        }
    }
}

/// Validate and simulate one configuration, writing traces and a summary
/// into `out_dir`.
pub fn cmd_run(config_path: &Path, out_dir: &Path, until: Option<u64>) -> i32 {
    let mut config = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(until) = until {
        config.sim_end = until;
    }

    let diagnostics = validator::validate_config(&config);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("invalid: {d}");
        }
        return EXIT_INVALID;
    }

    let result = match engine::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };

    if let Err(e) = csvio::write_run_artifacts(&result, out_dir) {
        eprintln!("error: {e}");
        return EXIT_IO;
    }
    print!("{}", csvio::summary_text(&result));
    println!("artifacts written to {}", out_dir.display());
    EXIT_OK
}

/// Run several configurations, each into `out_dir/<config stem>`, with up
/// to `jobs` in parallel. Returns the worst exit code.
pub fn cmd_run_batch(configs: &[PathBuf], out_dir: &Path, until: Option<u64>, jobs: usize) -> i32 {
    if configs.len() == 1 {
        return cmd_run(&configs[0], out_dir, until);
    }
    let jobs = jobs.max(1);
    let mut worst = EXIT_OK;
    for chunk in configs.chunks(jobs) {
        let handles: Vec<_> = chunk
            .iter()
            .map(|path| {
                let path = path.clone();
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "run".into());
                let dir = out_dir.join(stem);
                std::thread::spawn(move || cmd_run(&path, &dir, until))
            })
            .collect();
        for h in handles {
            let code = h.join().unwrap_or(EXIT_IO);
            worst = worst.max(code);
        }
    }
    worst
}

/// Validate a configuration and probe its fault-free feasibility.
pub fn cmd_validate(config_path: &Path) -> i32 {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let diagnostics = validator::validate_config(&config);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("invalid: {d}");
        }
        return EXIT_INVALID;
    }
    if config.streams.is_empty() {
        println!("valid; no streams, feasibility check skipped");
        return EXIT_OK;
    }
    match validator::check_feasibility(&config) {
        Ok(report) => {
            print!("{report}");
            if report.feasible {
                EXIT_OK
            } else {
                EXIT_INVALID
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub enum PlotKind {
    Occupancy {
        port: Option<String>,
        queue: u8,
        period_ns: u64,
    },
    Latency {
        streams: Vec<String>,
    },
}

/// Render a chart from the CSVs written by `run`.
pub fn cmd_plot(trace_dir: &Path, out_svg: &Path, kind: PlotKind) -> i32 {
    let log = match csvio::load_trace_dir(trace_dir) {
        Ok(log) => log,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_IO;
        }
    };
    let rendered = match kind {
        PlotKind::Occupancy {
            port,
            queue,
            period_ns,
        } => {
            let (node, to) = match &port {
                Some(p) => match p.split_once("->") {
                    Some((a, b)) => (a.to_string(), b.to_string()),
                    None => {
                        eprintln!("error: --port must be of the form NODE->NODE");
                        return EXIT_INVALID;
                    }
                },
                None => {
                    // Default: the busiest egress queue in the trace.
                    match busiest_port(&log, queue) {
                        Some(pair) => pair,
                        None => {
                            eprintln!("error: no enqueue events in trace");
                            return EXIT_INVALID;
                        }
                    }
                }
            };
            let until = log
                .frame_events
                .iter()
                .map(|e| e.time)
                .max()
                .unwrap_or(1)
                .max(1);
            svg::occupancy_chart(&log, &node, &to, queue, period_ns, until)
        }
        PlotKind::Latency { streams } => svg::latency_chart(&log, &streams),
    };
    match rendered {
        Ok(text) => {
            if let Some(parent) = out_svg.parent() {
                if !parent.as_os_str().is_empty() {
                    if let Err(e) = std::fs::create_dir_all(parent) {
                        eprintln!("error: cannot create {}: {e}", parent.display());
                        return EXIT_IO;
                    }
                }
            }
            match std::fs::write(out_svg, text) {
                Ok(()) => {
                    println!("wrote {}", out_svg.display());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: cannot write {}: {e}", out_svg.display());
                    EXIT_IO
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

fn busiest_port(log: &tassim_core::TraceLog, queue: u8) -> Option<(String, String)> {
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for e in &log.frame_events {
        if e.queue == Some(queue) && e.kind == tassim_core::trace::FrameEventKind::Enqueue {
            if let Some(to) = e.port_to {
                *counts.entry((e.node.0, to.0)).or_insert(0) += 1;
            }
        }
    }
    counts
        .into_iter()
        .max_by_key(|(_, c)| *c)
        .map(|((n, t), _)| {
            (
                log.node_names[n as usize].clone(),
                log.node_names[t as usize].clone(),
            )
        })
}
