use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tassim::commands::{self, PlotKind};
use tassim::config::Dur;

#[derive(Parser)]
#[command(
    name = "tassim",
    about = "Deterministic simulator for time-aware-shaper scheduled Ethernet traffic",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, simulate and write trace CSVs plus a summary.
    Run {
        /// Configuration file(s); several run as a batch into per-config
        /// subdirectories.
        #[arg(long = "config", required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        /// Output directory for frames.csv, latency.csv, gates.csv,
        /// meters.csv and summary.txt.
        #[arg(long = "out", default_value = "out")]
        out: PathBuf,
        /// Stop the simulation at this time (e.g. "10ms"), overriding the
        /// configured sim_end.
        #[arg(long = "until")]
        until: Option<String>,
        /// Reserved for randomized scenario generation.
        #[arg(long = "seed")]
        seed: Option<u64>,
        /// Parallel runs in batch mode.
        #[arg(long = "jobs", default_value_t = 1)]
        jobs: usize,
    },
    /// Check a configuration and probe fault-free feasibility.
    Validate {
        #[arg(long = "config")]
        config: PathBuf,
    },
    /// Render an SVG chart from the CSVs of a previous run.
    Plot {
        /// Directory containing frames.csv (and gates.csv).
        #[arg(long = "trace")]
        trace: PathBuf,
        /// Output SVG path.
        #[arg(long = "out")]
        out: PathBuf,
        /// Chart kind: occupancy or latency.
        #[arg(long = "kind", default_value = "latency")]
        kind: String,
        /// Egress port "NODE->NODE" for occupancy charts; defaults to the
        /// busiest one.
        #[arg(long = "port")]
        port: Option<String>,
        /// Queue index for occupancy charts.
        #[arg(long = "queue", default_value_t = 7)]
        queue: u8,
        /// Period marker spacing for occupancy charts (e.g. "60us").
        #[arg(long = "period", default_value = "60us")]
        period: String,
        /// Streams to include in latency charts (default: all).
        #[arg(long = "streams", num_args = 0.., value_delimiter = ',')]
        streams: Vec<String>,
    },
}

fn parse_dur(text: &str) -> Result<u64, String> {
    serde_json::from_value::<Dur>(serde_json::Value::String(text.to_string()))
        .map(|d| d.0)
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            out,
            until,
            seed,
            jobs,
        } => {
            if seed.is_some() {
                eprintln!("note: --seed is reserved and currently unused");
            }
            let until = match until.as_deref().map(parse_dur).transpose() {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: bad --until: {e}");
                    return ExitCode::from(commands::EXIT_INVALID as u8);
                }
            };
            commands::cmd_run_batch(&config, &out, until, jobs)
        }
        Command::Validate { config } => commands::cmd_validate(&config),
        Command::Plot {
            trace,
            out,
            kind,
            port,
            queue,
            period,
            streams,
        } => {
            let kind = match kind.as_str() {
                "occupancy" => {
                    let period_ns = match parse_dur(&period) {
                        Ok(v) => v,
                        Err(e) => {
                            eprintln!("error: bad --period: {e}");
                            return ExitCode::from(commands::EXIT_INVALID as u8);
                        }
                    };
                    PlotKind::Occupancy {
                        port,
                        queue,
                        period_ns,
                    }
                }
                "latency" => PlotKind::Latency { streams },
                other => {
                    eprintln!("error: unknown chart kind '{other}'");
                    return ExitCode::from(commands::EXIT_INVALID as u8);
                }
            };
            commands::cmd_plot(&trace, &out, kind)
        }
    };
    ExitCode::from(code as u8)
}
