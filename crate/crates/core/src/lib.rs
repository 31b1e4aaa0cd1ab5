//! Deterministic discrete-event simulation of per-stream scheduled Ethernet
//! traffic under time-aware shaping, with fault injection and per-stream
//! filtering/policing at bridge ingress.
//!
//! The crate is `no_std` + `alloc`: the kernel is pure integer-nanosecond
//! arithmetic with no IO, no floating point and no global state, so two runs
//! of the same configuration produce bit-identical traces. File formats, the
//! CLI and chart rendering live in the companion `tassim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod engine;
pub mod faults;
pub mod model;
pub mod psfp;
pub mod scenarios;
pub mod tas;
pub mod trace;
pub mod validator;

pub use engine::{run, RunResult, RunStats};
pub use model::{ConfigError, SimConfig, TimeNs};
pub use trace::TraceLog;
