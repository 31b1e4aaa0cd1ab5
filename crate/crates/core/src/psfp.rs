//! Per-stream filtering and policing at bridge ingress: ordered stream
//! filters, timed stream gates with internal priority values, and two-rate
//! three-color flow meters.
//!
//! Token buckets are refilled lazily at frame arrival using exact integer
//! arithmetic: bucket levels are kept in units of 1/(8e9) byte, so a refill
//! of `cir` bit/s over `dt` ns adds exactly `cir * dt` units. No tick events
//! and no rounding drift.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{collections::BTreeMap, format};

use crate::model::{cycle_phase, ConfigError, DurNs, TimeNs};

/// Scale factor of bucket levels: one byte = 8e9 units (bit/s times ns).
const TOKEN_SCALE: u128 = 8_000_000_000;

/// Wildcard-capable match field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamMatch {
    Any,
    Stream(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorityMatch {
    Any,
    Priority(u8),
}

/// One entry of the ordered filter table; first match wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamFilter {
    pub match_stream: StreamMatch,
    pub match_priority: PriorityMatch,
    /// Frames larger than this are dropped by the filter.
    pub max_sdu: Option<u32>,
    pub gate_ref: String,
    pub meter_ref: Option<String>,
}

/// Per-filter counters; matched = passed + dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterCounters {
    pub matched: u64,
    pub passed: u64,
    pub dropped: u64,
}

/// One interval of a stream gate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamGateEntry {
    pub start: DurNs,
    pub end: DurNs,
    pub open: bool,
    /// Internal priority value assigned to passing frames; queue selection
    /// only, the frame's PCP is not rewritten.
    pub ipv: Option<u8>,
}

/// Timed stream gate: cyclic open/closed intervals with optional IPV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamGate {
    pub cycle_time: DurNs,
    pub base_time: TimeNs,
    pub entries: Vec<StreamGateEntry>,
}

impl StreamGate {
    pub fn always_open() -> Self {
        StreamGate {
            cycle_time: 1_000_000,
            base_time: 0,
            entries: alloc::vec![StreamGateEntry {
                start: 0,
                end: 1_000_000,
                open: true,
                ipv: None,
            }],
        }
    }

    pub fn state_at(&self, t: TimeNs) -> &StreamGateEntry {
        let phase = cycle_phase(t, self.base_time, self.cycle_time);
        self.entries
            .iter()
            .find(|e| e.start <= phase && phase < e.end)
            .expect("stream gate entries cover the cycle")
    }

    pub fn check(&self) -> Result<(), String> {
        if self.cycle_time == 0 {
            return Err(String::from("stream gate cycle_time must be positive"));
        }
        let mut cursor = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.start != cursor || e.end <= e.start {
                return Err(format!("stream gate entry {i} breaks cycle coverage"));
            }
            cursor = e.end;
        }
        if cursor != self.cycle_time {
            return Err(String::from("stream gate entries do not cover the cycle"));
        }
        Ok(())
    }
}

/// Static parameters of a two-rate three-color marker (color-blind).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowMeterSpec {
    /// Committed information rate, bits per second.
    pub cir: u64,
    /// Committed burst size, bytes.
    pub cbs: u64,
    /// Excess information rate, bits per second.
    pub eir: u64,
    /// Excess burst size, bytes.
    pub ebs: u64,
    /// Drop yellow frames as well as red ones.
    pub drop_yellow: bool,
}

/// Live meter state; buckets start full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowMeter {
    pub spec: FlowMeterSpec,
    /// Committed bucket level in 1/(8e9) bytes.
    committed: u128,
    /// Excess bucket level in 1/(8e9) bytes.
    excess: u128,
    last_update: TimeNs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MeterColor {
    Green,
    Yellow,
    Red,
}

impl MeterColor {
    pub fn as_str(self) -> &'static str {
        match self {
            MeterColor::Green => "green",
            MeterColor::Yellow => "yellow",
            MeterColor::Red => "red",
        }
    }
}

impl FlowMeter {
    pub fn new(spec: FlowMeterSpec) -> Self {
        FlowMeter {
            committed: spec.cbs as u128 * TOKEN_SCALE,
            excess: spec.ebs as u128 * TOKEN_SCALE,
            last_update: 0,
            spec,
        }
    }

    pub fn committed_bytes(&self) -> u64 {
        (self.committed / TOKEN_SCALE) as u64
    }

    pub fn excess_bytes(&self) -> u64 {
        (self.excess / TOKEN_SCALE) as u64
    }

    /// Color one frame of `size` bytes arriving at `t`: refill both buckets
    /// over the elapsed time, then green if the committed bucket covers the
    /// frame, else yellow if the excess bucket does, else red. Only the
    /// bucket that admits the frame is debited.
    pub fn meter_frame(&mut self, size: u32, t: TimeNs) -> Result<MeterColor, ConfigError> {
        if t < self.last_update {
            return Err(ConfigError::invalid(format!(
                "meter time went backwards: {t} < {}",
                self.last_update
            )));
        }
        let dt = (t - self.last_update) as u128;
        self.last_update = t;
        let cap_c = self.spec.cbs as u128 * TOKEN_SCALE;
        let cap_e = self.spec.ebs as u128 * TOKEN_SCALE;
        self.committed = (self.committed + self.spec.cir as u128 * dt).min(cap_c);
        self.excess = (self.excess + self.spec.eir as u128 * dt).min(cap_e);

        let need = size as u128 * TOKEN_SCALE;
        if need <= self.committed {
            self.committed -= need;
            Ok(MeterColor::Green)
        } else if need <= self.excess {
            self.excess -= need;
            Ok(MeterColor::Yellow)
        } else {
            Ok(MeterColor::Red)
        }
    }
}

/// PSFP configuration of one bridge.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfpConfig {
    pub filters: Vec<StreamFilter>,
    pub gates: BTreeMap<String, StreamGate>,
    pub meters: BTreeMap<String, FlowMeterSpec>,
    /// Drop frames matched by no filter instead of passing them unchanged.
    pub fail_closed: bool,
}

impl Default for PsfpConfig {
    fn default() -> Self {
        PsfpConfig {
            filters: Vec::new(),
            gates: BTreeMap::new(),
            meters: BTreeMap::new(),
            fail_closed: false,
        }
    }
}

impl PsfpConfig {
    pub fn check(&self) -> Result<(), String> {
        for (name, gate) in &self.gates {
            gate.check().map_err(|e| format!("stream gate '{name}': {e}"))?;
        }
        for (i, f) in self.filters.iter().enumerate() {
            if !self.gates.contains_key(&f.gate_ref) {
                return Err(format!("filter {i} references unknown gate '{}'", f.gate_ref));
            }
            if let Some(m) = &f.meter_ref {
                if !self.meters.contains_key(m) {
                    return Err(format!("filter {i} references unknown meter '{m}'"));
                }
            }
        }
        Ok(())
    }
}

/// Live PSFP state of one bridge during a run.
#[derive(Debug, Clone)]
pub struct PsfpState {
    pub config: PsfpConfig,
    pub counters: Vec<FilterCounters>,
    /// Meter name -> (index into trace meter table, live meter).
    pub meters: BTreeMap<String, (u32, FlowMeter)>,
}

/// Outcome of ingress filtering for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVerdict {
    /// Frame passes; enqueue it at this internal priority.
    Pass { effective_priority: u8 },
    Drop(crate::trace::DropReason),
}

/// Meter decision made while filtering, for trace recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeterDecision {
    pub meter_index: u32,
    pub color: MeterColor,
}

impl PsfpState {
    pub fn new(config: PsfpConfig, meter_index_base: u32) -> Self {
        let counters = alloc::vec![FilterCounters::default(); config.filters.len()];
        let meters = config
            .meters
            .iter()
            .enumerate()
            .map(|(i, (name, spec))| {
                (
                    name.clone(),
                    (meter_index_base + i as u32, FlowMeter::new(*spec)),
                )
            })
            .collect();
        PsfpState {
            config,
            counters,
            meters,
        }
    }

    /// Run one frame through the filter table. Returns the verdict plus any
    /// meter decision taken on the way.
    pub fn filter_frame(
        &mut self,
        stream_name: &str,
        priority: u8,
        size: u32,
        t: TimeNs,
    ) -> Result<(FilterVerdict, Option<MeterDecision>), ConfigError> {
        use crate::trace::DropReason;

        let matched = self.config.filters.iter().position(|f| {
            let stream_ok = match &f.match_stream {
                StreamMatch::Any => true,
                StreamMatch::Stream(s) => s == stream_name,
            };
            let prio_ok = match f.match_priority {
                PriorityMatch::Any => true,
                PriorityMatch::Priority(p) => p == priority,
            };
            stream_ok && prio_ok
        });

        let Some(idx) = matched else {
            return if self.config.fail_closed {
                Ok((FilterVerdict::Drop(DropReason::PsfpNoMatch), None))
            } else {
                Ok((
                    FilterVerdict::Pass {
                        effective_priority: priority,
                    },
                    None,
                ))
            };
        };

        self.counters[idx].matched += 1;
        let filter = self.config.filters[idx].clone();

        if let Some(max_sdu) = filter.max_sdu {
            if size > max_sdu {
                self.counters[idx].dropped += 1;
                return Ok((FilterVerdict::Drop(DropReason::PsfpMaxSdu), None));
            }
        }

        let gate = self
            .config
            .gates
            .get(&filter.gate_ref)
            .ok_or_else(|| ConfigError::invalid("filter references unknown gate"))?;
        let entry = *gate.state_at(t);
        if !entry.open {
            self.counters[idx].dropped += 1;
            return Ok((FilterVerdict::Drop(DropReason::PsfpGateClosed), None));
        }
        let effective_priority = entry.ipv.unwrap_or(priority);

        let mut decision = None;
        if let Some(meter_name) = &filter.meter_ref {
            let (meter_index, meter) = self
                .meters
                .get_mut(meter_name)
                .ok_or_else(|| ConfigError::invalid("filter references unknown meter"))?;
            let color = meter.meter_frame(size, t)?;
            decision = Some(MeterDecision {
                meter_index: *meter_index,
                color,
            });
            let drop = match color {
                MeterColor::Red => Some(DropReason::PsfpMeterRed),
                MeterColor::Yellow if meter.spec.drop_yellow => Some(DropReason::PsfpMeterYellow),
                _ => None,
            };
            if let Some(reason) = drop {
                self.counters[idx].dropped += 1;
                return Ok((FilterVerdict::Drop(reason), decision));
            }
        }

        self.counters[idx].passed += 1;
        Ok((
            FilterVerdict::Pass { effective_priority },
            decision,
        ))
    }
}
