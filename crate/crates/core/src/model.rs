//! Domain types and pure time/schedule arithmetic shared by all other
//! modules: frames, streams, gate control lists, topology and the top-level
//! simulation configuration.
//!
//! All times are integer nanoseconds. Durations and instants are plain `u64`
//! aliases rather than wrappers; the kernel never touches floating point.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{collections::BTreeMap, format};
use thiserror::Error;

/// Absolute simulation time in nanoseconds.
pub type TimeNs = u64;
/// Duration in nanoseconds.
pub type DurNs = u64;

/// Sentinel for "never happens" (e.g. a gate that stays open forever).
pub const NEVER: TimeNs = u64::MAX;

pub const NS_PER_US: u64 = 1_000;
pub const NS_PER_MS: u64 = 1_000_000;

/// Minimum/maximum Ethernet frame size in bytes (enforced unless the config
/// explicitly allows nonstandard sizes).
pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 1522;

/// Preamble + SFD + interframe gap, counted only when `include_l1_overhead`
/// is set.
pub const L1_OVERHEAD_BYTES: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("configuration error: {0}")]
    Invalid(String),
    #[error("unknown stream '{0}'")]
    UnknownStream(String),
    #[error("stream '{stream}' has no emission with seq {seq}")]
    UnknownSeq { stream: String, seq: u32 },
}

impl ConfigError {
    pub fn invalid(msg: impl AsRef<str>) -> Self {
        ConfigError::Invalid(String::from(msg.as_ref()))
    }
}

/// Interned stream identity used by the kernel. Index into the stream table
/// of the compiled configuration; synthetic (injected) streams get indices
/// past the configured ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamId(pub u32);

/// Interned node identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// 8-bit transmission gate vector; bit q set means the gate of queue q is
/// open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateMask(pub u8);

impl GateMask {
    pub const ALL_OPEN: GateMask = GateMask(0xff);
    pub const ALL_CLOSED: GateMask = GateMask(0);

    pub fn single(queue: u8) -> Self {
        GateMask(1 << queue)
    }

    pub fn is_open(self, queue: u8) -> bool {
        self.0 & (1 << queue) != 0
    }
}

/// A unit of scheduled traffic in flight through the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub stream: StreamId,
    pub seq: u32,
    /// On-wire frame size in bytes (L2, without preamble/IFG).
    pub size: u32,
    /// PCP value, selects the egress priority queue.
    pub priority: u8,
    /// Talker emission instant (actual, after fault perturbation).
    pub created_at: TimeNs,
    /// (node, time) stamps collected at every arrival along the path.
    pub arrivals: Vec<(NodeId, TimeNs)>,
}

/// One entry of a gate control list: a half-open interval `[start, end)`
/// relative to the cycle start, mapped to a gate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GclEntry {
    pub start: DurNs,
    pub end: DurNs,
    pub gates: GateMask,
}

/// Cyclic timed sequence of gate vectors driving one egress port.
///
/// Entries must be contiguous and cover `[0, cycle_time)` exactly; the
/// schedule repeats indefinitely, phase-anchored at `base_time`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateControlList {
    pub cycle_time: DurNs,
    pub base_time: TimeNs,
    pub entries: Vec<GclEntry>,
}

/// Reduce an absolute instant to a cycle phase, handling base times larger
/// than `t`.
pub(crate) fn cycle_phase(t: TimeNs, base_time: TimeNs, cycle_time: DurNs) -> DurNs {
    debug_assert!(cycle_time > 0);
    ((t as i128 - base_time as i128).rem_euclid(cycle_time as i128)) as u64
}

impl GateControlList {
    /// A single-entry list that keeps every gate open forever.
    pub fn always_open(cycle_time: DurNs) -> Self {
        GateControlList {
            cycle_time,
            base_time: 0,
            entries: alloc::vec![GclEntry {
                start: 0,
                end: cycle_time,
                gates: GateMask::ALL_OPEN,
            }],
        }
    }

    /// Index of the entry whose `[start, end)` interval contains the phase
    /// of `t`.
    pub fn entry_index_at(&self, t: TimeNs) -> usize {
        let phase = cycle_phase(t, self.base_time, self.cycle_time);
        // Entries are sorted and contiguous; a linear scan keeps this simple
        // and the lists are short.
        self.entries
            .iter()
            .position(|e| e.start <= phase && phase < e.end)
            .expect("GCL entries cover the cycle")
    }

    /// Gate vector in force at instant `t`.
    pub fn gate_state_at(&self, t: TimeNs) -> GateMask {
        self.entries[self.entry_index_at(t)].gates
    }

    /// Earliest `t' > t` at which the gate of `queue` transitions from open
    /// to closed, or [`NEVER`] if it stays open for the whole cycle.
    ///
    /// The gate must be open at `t`.
    pub fn next_gate_close(&self, queue: u8, t: TimeNs) -> Result<TimeNs, ConfigError> {
        let idx = self.entry_index_at(t);
        if !self.entries[idx].gates.is_open(queue) {
            return Err(ConfigError::invalid(format!(
                "next_gate_close: gate of queue {queue} is closed at {t}"
            )));
        }
        let phase = cycle_phase(t, self.base_time, self.cycle_time);
        let n = self.entries.len();
        let mut boundary = self.entries[idx].end - phase; // ns until end of current entry
        for step in 1..=n {
            let e = &self.entries[(idx + step) % n];
            if !e.gates.is_open(queue) {
                return Ok(t + boundary);
            }
            boundary += e.end - e.start;
        }
        Ok(NEVER)
    }

    /// Absolute time of the next entry boundary strictly after `t`.
    pub fn next_boundary(&self, t: TimeNs) -> TimeNs {
        let idx = self.entry_index_at(t);
        let phase = cycle_phase(t, self.base_time, self.cycle_time);
        t + (self.entries[idx].end - phase)
    }

    /// Structural validity: positive cycle, contiguous entries covering
    /// `[0, cycle_time)` exactly.
    pub fn check(&self) -> Result<(), String> {
        if self.cycle_time == 0 {
            return Err(String::from("cycle_time must be positive"));
        }
        if self.entries.is_empty() {
            return Err(String::from("GCL has no entries"));
        }
        let mut cursor = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.start != cursor {
                return Err(format!(
                    "GCL gap or overlap at entry {i}: starts at {} but previous ended at {cursor}",
                    e.start
                ));
            }
            if e.end <= e.start {
                return Err(format!("GCL entry {i} is empty or reversed"));
            }
            cursor = e.end;
        }
        if cursor != self.cycle_time {
            return Err(format!(
                "GCL entries cover [0, {cursor}) but cycle_time is {}",
                self.cycle_time
            ));
        }
        Ok(())
    }
}

/// Periodic talker behaviour of one stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSpec {
    pub stream_id: String,
    pub talker: String,
    pub listener: String,
    /// Bridges traversed in order, talker and listener excluded.
    pub path: Vec<String>,
    pub period: DurNs,
    pub send_offset: DurNs,
    pub frame_size: u32,
    pub priority: u8,
    pub frames_per_period: u32,
}

impl StreamSpec {
    /// Number of frames emitted before `sim_end`.
    pub fn emission_count(&self, sim_end: TimeNs) -> u64 {
        if self.period == 0 || self.send_offset >= sim_end {
            return if self.send_offset < sim_end {
                self.frames_per_period as u64
            } else {
                0
            };
        }
        let periods = (sim_end - 1 - self.send_offset) / self.period + 1;
        periods * self.frames_per_period as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    EndStation,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeDef {
    pub name: String,
    pub kind: NodeKind,
}

/// Full-duplex link; the simulator derives one independent channel per
/// direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkDef {
    pub node_a: String,
    pub node_b: String,
    /// Transmission rate in bits per second.
    pub rate: u64,
    pub propagation_delay: DurNs,
}

/// Static next-hop entry; normally derived from stream paths, accepted in
/// configs for cross-checking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardingEntry {
    pub bridge: String,
    pub stream: String,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    pub nodes: Vec<NodeDef>,
    pub links: Vec<LinkDef>,
    pub forwarding: Vec<ForwardingEntry>,
}

impl Topology {
    pub fn node(&self, name: &str) -> Option<&NodeDef> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn has_link(&self, a: &str, b: &str) -> bool {
        self.links
            .iter()
            .any(|l| (l.node_a == a && l.node_b == b) || (l.node_a == b && l.node_b == a))
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&LinkDef> {
        self.links
            .iter()
            .find(|l| (l.node_a == a && l.node_b == b) || (l.node_a == b && l.node_b == a))
    }
}

/// Key of an egress port: the owning node plus the neighbor the port faces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PortKey {
    pub node: String,
    pub to: String,
}

impl PortKey {
    pub fn new(node: impl AsRef<str>, to: impl AsRef<str>) -> Self {
        PortKey {
            node: String::from(node.as_ref()),
            to: String::from(to.as_ref()),
        }
    }
}

impl core::fmt::Display for PortKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}->{}", self.node, self.to)
    }
}

/// Top-level simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: Topology,
    pub streams: Vec<StreamSpec>,
    /// Gate control lists per egress port; ports without an entry are
    /// always open.
    pub gcls: BTreeMap<PortKey, GateControlList>,
    /// PSFP ingress configuration per bridge.
    pub psfp: BTreeMap<String, crate::psfp::PsfpConfig>,
    pub scenario: crate::faults::FaultScenario,
    pub sim_end: TimeNs,
    /// Byte capacity per egress queue; 0 means unbounded.
    pub queue_capacity: u64,
    /// Fixed ingress-to-egress delay per bridge hop.
    pub processing_delay: DurNs,
    /// Add preamble + IFG (20 bytes) to on-wire transmission time.
    pub include_l1_overhead: bool,
    /// Permit frame sizes outside the Ethernet bounds of 64..=1522 bytes.
    pub allow_nonstandard_frame_sizes: bool,
}

impl SimConfig {
    pub fn new(topology: Topology, streams: Vec<StreamSpec>, sim_end: TimeNs) -> Self {
        SimConfig {
            topology,
            streams,
            gcls: BTreeMap::new(),
            psfp: BTreeMap::new(),
            scenario: crate::faults::FaultScenario::default(),
            sim_end,
            queue_capacity: 0,
            processing_delay: 0,
            include_l1_overhead: false,
            allow_nonstandard_frame_sizes: false,
        }
    }

    /// On-wire transmission duration of `size` bytes on a link of `rate`
    /// bits/s, rounded up to whole nanoseconds.
    pub fn tx_duration(&self, size: u32, rate: u64) -> DurNs {
        let wire_bytes = if self.include_l1_overhead {
            size as u128 + L1_OVERHEAD_BYTES as u128
        } else {
            size as u128
        };
        let bits = wire_bytes * 8 * 1_000_000_000u128;
        bits.div_ceil(rate as u128) as u64
    }
}

/// Least common multiple of all stream periods.
///
/// Errors on an empty stream list or a zero period.
pub fn hyperperiod(streams: &[StreamSpec]) -> Result<DurNs, ConfigError> {
    if streams.is_empty() {
        return Err(ConfigError::invalid(
            "hyperperiod of an empty stream list is undefined",
        ));
    }
    let mut acc: u64 = 1;
    for s in streams {
        if s.period == 0 {
            return Err(ConfigError::invalid(format!(
                "stream '{}' has zero period",
                s.stream_id
            )));
        }
        let g = gcd(acc, s.period);
        let l = (acc as u128 / g as u128) * s.period as u128;
        if l > u64::MAX as u128 {
            return Err(ConfigError::invalid("hyperperiod overflows u64"));
        }
        acc = l as u64;
    }
    Ok(acc)
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Convenience: `gate_state_at` as a free function matching the module-level
/// operation naming.
pub fn gate_state_at(gcl: &GateControlList, t: TimeNs) -> GateMask {
    gcl.gate_state_at(t)
}

/// Convenience alias for [`GateControlList::next_gate_close`].
pub fn next_gate_close(gcl: &GateControlList, queue: u8, t: TimeNs) -> Result<TimeNs, ConfigError> {
    gcl.next_gate_close(queue, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn us(v: u64) -> u64 {
        v * NS_PER_US
    }

    fn sample_gcl() -> GateControlList {
        // cycle 60 us, q7 open [0, 30), all closed [30, 60)
        GateControlList {
            cycle_time: us(60),
            base_time: 0,
            entries: vec![
                GclEntry {
                    start: 0,
                    end: us(30),
                    gates: GateMask::single(7),
                },
                GclEntry {
                    start: us(30),
                    end: us(60),
                    gates: GateMask::ALL_CLOSED,
                },
            ],
        }
    }

    #[test]
    fn hyperperiod_of_equal_periods() {
        let streams: Vec<StreamSpec> = (0..7)
            .map(|i| StreamSpec {
                stream_id: format!("s{i}"),
                talker: String::from("t"),
                listener: String::from("l"),
                path: vec![String::from("b")],
                period: us(60),
                send_offset: 0,
                frame_size: 500,
                priority: 7,
                frames_per_period: 1,
            })
            .collect();
        assert_eq!(hyperperiod(&streams).unwrap(), us(60));
    }

    #[test]
    fn hyperperiod_single_stream_is_period() {
        let s = StreamSpec {
            stream_id: String::from("a"),
            talker: String::from("t"),
            listener: String::from("l"),
            path: vec![],
            period: 12_345,
            send_offset: 0,
            frame_size: 100,
            priority: 0,
            frames_per_period: 1,
        };
        assert_eq!(hyperperiod(&[s]).unwrap(), 12_345);
    }

    #[test]
    fn hyperperiod_is_lcm() {
        let mk = |p| StreamSpec {
            stream_id: format!("p{p}"),
            talker: String::from("t"),
            listener: String::from("l"),
            path: vec![],
            period: p,
            send_offset: 0,
            frame_size: 100,
            priority: 0,
            frames_per_period: 1,
        };
        assert_eq!(hyperperiod(&[mk(us(2)), mk(us(3))]).unwrap(), us(6));
    }

    #[test]
    fn hyperperiod_empty_is_error() {
        assert!(hyperperiod(&[]).is_err());
    }

    #[test]
    fn gate_state_interior_point() {
        let gcl = sample_gcl();
        assert!(gcl.gate_state_at(us(10)).is_open(7));
    }

    #[test]
    fn gate_state_half_open_boundary() {
        let gcl = sample_gcl();
        // At exactly 30 us the [30, 60) entry is in force.
        assert_eq!(gcl.gate_state_at(us(30)), GateMask::ALL_CLOSED);
    }

    #[test]
    fn gate_state_wraps_modularly() {
        let gcl = sample_gcl();
        // 75 mod 60 = 15, inside the open window.
        assert!(gcl.gate_state_at(us(75)).is_open(7));
    }

    #[test]
    fn gate_state_with_base_time_in_future() {
        let mut gcl = sample_gcl();
        gcl.base_time = us(45); // phase(0) = (0 - 45) mod 60 = 15
        assert!(gcl.gate_state_at(0).is_open(7));
        assert_eq!(gcl.gate_state_at(us(15)), GateMask::ALL_CLOSED);
    }

    #[test]
    fn next_close_single_window() {
        let gcl = sample_gcl();
        assert_eq!(gcl.next_gate_close(7, us(10)).unwrap(), us(30));
    }

    #[test]
    fn next_close_in_second_cycle() {
        let gcl = sample_gcl();
        assert_eq!(gcl.next_gate_close(7, us(70)).unwrap(), us(90));
    }

    #[test]
    fn next_close_always_open_is_never() {
        let gcl = GateControlList::always_open(us(60));
        assert_eq!(gcl.next_gate_close(7, us(123)).unwrap(), NEVER);
        assert_eq!(gcl.next_gate_close(0, 0).unwrap(), NEVER);
    }

    #[test]
    fn next_close_requires_open_gate() {
        let gcl = sample_gcl();
        assert!(gcl.next_gate_close(7, us(40)).is_err());
        assert!(gcl.next_gate_close(3, us(10)).is_err());
    }

    #[test]
    fn gcl_periodicity() {
        let gcl = sample_gcl();
        for t in (0..us(60)).step_by(500) {
            assert_eq!(gcl.gate_state_at(t), gcl.gate_state_at(t + gcl.cycle_time));
        }
    }

    #[test]
    fn gcl_coverage_check_finds_gap() {
        let gcl = GateControlList {
            cycle_time: us(60),
            base_time: 0,
            entries: vec![
                GclEntry {
                    start: 0,
                    end: us(30),
                    gates: GateMask::ALL_OPEN,
                },
                GclEntry {
                    start: us(40),
                    end: us(60),
                    gates: GateMask::ALL_CLOSED,
                },
            ],
        };
        assert!(gcl.check().is_err());
    }

    #[test]
    fn tx_duration_is_8ns_per_byte_at_gigabit() {
        let cfg = SimConfig::new(Topology::default(), vec![], 0);
        assert_eq!(cfg.tx_duration(1000, 1_000_000_000), 8_000);
        assert_eq!(cfg.tx_duration(500, 1_000_000_000), 4_000);
    }

    #[test]
    fn tx_duration_with_l1_overhead() {
        let mut cfg = SimConfig::new(Topology::default(), vec![], 0);
        cfg.include_l1_overhead = true;
        assert_eq!(cfg.tx_duration(1250, 1_000_000_000), 10_160);
    }

    #[test]
    fn emission_count_counts_periods() {
        let s = StreamSpec {
            stream_id: String::from("a"),
            talker: String::from("t"),
            listener: String::from("l"),
            path: vec![],
            period: us(60),
            send_offset: us(5),
            frame_size: 100,
            priority: 7,
            frames_per_period: 1,
        };
        assert_eq!(s.emission_count(us(180)), 3); // 5, 65, 125
        assert_eq!(s.emission_count(us(5)), 0);
        assert_eq!(s.emission_count(us(6)), 1);
    }
}
