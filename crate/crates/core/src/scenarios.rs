//! Bundled, checked-in scenario configurations: minimal single-link setups
//! demonstrating each fault effect, and a five-bridge network in which one
//! slightly late frame degrades every stream.
//!
//! The schedules here are constructed, not taken from captures: gate
//! windows are sized exactly to the frames they serve, so a frame that
//! misses its window displaces its neighbors. Each builder documents its
//! timeline in comments; the tests assert those timelines.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::engine::RunResult;
use crate::faults::{FaultAction, FaultScenario};
use crate::model::{
    GateControlList, GateMask, GclEntry, LinkDef, NodeDef, NodeKind, PortKey, SimConfig,
    StreamSpec, Topology, NS_PER_MS, NS_PER_US,
};
use crate::psfp::{PriorityMatch, PsfpConfig, StreamFilter, StreamGate, StreamGateEntry, StreamMatch};

const GBIT: u64 = 1_000_000_000;
/// Common stream period of every bundled scenario.
pub const PERIOD_US: u64 = 60;

fn us(v: u64) -> u64 {
    v * NS_PER_US
}

/// Machine-checkable assertion over a finished run.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    /// Every delivered frame of every stream is below this latency.
    AllLatenciesBelow { ns: u64 },
    /// No frame was dropped anywhere.
    ZeroDrops,
    /// The step occupancy of (node->to, queue) is zero at every multiple of
    /// `period` in `[from, to]`.
    DrainsEachPeriod {
        node: String,
        to: String,
        queue: u8,
        period: u64,
        from: u64,
        until: u64,
    },
    /// emitted == delivered + dropped + in_flight for every stream.
    Conservation,
    /// Exactly this many frames were dropped in total.
    TotalDrops { count: u64 },
    /// tx_start instants of a stream on one port equal this list exactly.
    TxStartTimes {
        node: String,
        to: String,
        stream: String,
        times_ns: Vec<u64>,
    },
}

impl Expectation {
    pub fn evaluate(&self, result: &RunResult) -> Result<(), String> {
        let log = &result.trace;
        match self {
            Expectation::AllLatenciesBelow { ns } => {
                for name in &log.stream_names {
                    for r in crate::trace::latency_series(log, name).map_err(|e| e.to_string())? {
                        if let Some(l) = r.latency_ns() {
                            if l >= *ns {
                                return Err(format!(
                                    "stream {name} seq {} latency {l} ns >= {ns} ns",
                                    r.seq
                                ));
                            }
                        }
                    }
                }
                Ok(())
            }
            Expectation::ZeroDrops => {
                let total = result.stats.total();
                if total.dropped != 0 {
                    return Err(format!("{} drops", total.dropped));
                }
                Ok(())
            }
            Expectation::DrainsEachPeriod {
                node,
                to,
                queue,
                period,
                from,
                until,
            } => {
                let n = log.node_id(node).ok_or("unknown node")?;
                let t = log.node_id(to).ok_or("unknown port peer")?;
                let series = crate::trace::step_occupancy(log, n, t, *queue);
                let mut at = *from;
                while at <= *until {
                    let v = crate::trace::step_value_at(&series, at);
                    if v != 0 {
                        return Err(format!("occupancy {v} B at t={at}"));
                    }
                    at += period;
                }
                Ok(())
            }
            Expectation::Conservation => {
                for (name, s) in &result.stats.per_stream {
                    if s.emitted != s.delivered + s.dropped + s.in_flight {
                        return Err(format!(
                            "stream {name}: emitted {} != delivered {} + dropped {} + in_flight {}",
                            s.emitted, s.delivered, s.dropped, s.in_flight
                        ));
                    }
                }
                Ok(())
            }
            Expectation::TotalDrops { count } => {
                let total = result.stats.total();
                if total.dropped != *count {
                    return Err(format!("expected {count} drops, saw {}", total.dropped));
                }
                Ok(())
            }
            Expectation::TxStartTimes {
                node,
                to,
                stream,
                times_ns,
            } => {
                let n = log.node_id(node).ok_or("unknown node")?;
                let t = log.node_id(to).ok_or("unknown port peer")?;
                let sid = log.stream_id(stream).ok_or("unknown stream")?;
                let actual: Vec<u64> = log
                    .frame_events
                    .iter()
                    .filter(|e| {
                        e.node == n
                            && e.port_to == Some(t)
                            && e.stream == sid
                            && e.kind == crate::trace::FrameEventKind::TxStart
                    })
                    .map(|e| e.time)
                    .collect();
                if &actual != times_ns {
                    return Err(format!("tx starts {actual:?} != expected {times_ns:?}"));
                }
                Ok(())
            }
        }
    }
}

/// A named configuration bundled with the assertions its trace must satisfy.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    pub name: &'static str,
    pub notes: &'static str,
    pub config: SimConfig,
    pub expected: Vec<Expectation>,
}

fn window_gcl(cycle_us: u64, queue: u8, windows: &[(u64, u64)]) -> GateControlList {
    // `windows` are open [start, end) intervals in us; an end beyond the
    // cycle wraps around to the front. Intervals must not collide once
    // wrapped.
    let mut spans: Vec<(u64, u64)> = Vec::new();
    for (s, e) in windows {
        assert!(e > s && *s < cycle_us && e - s < cycle_us);
        if *e <= cycle_us {
            spans.push((*s, *e));
        } else {
            spans.push((*s, cycle_us));
            spans.push((0, e - cycle_us));
        }
    }
    spans.sort();
    let mut entries = Vec::new();
    let mut cursor = 0;
    for (s, e) in spans {
        assert!(s >= cursor, "windows overlap at {s} us");
        if s > cursor {
            entries.push(GclEntry {
                start: us(cursor),
                end: us(s),
                gates: GateMask::ALL_CLOSED,
            });
        }
        entries.push(GclEntry {
            start: us(s),
            end: us(e),
            gates: GateMask::single(queue),
        });
        cursor = e;
    }
    if cursor < cycle_us {
        entries.push(GclEntry {
            start: us(cursor),
            end: us(cycle_us),
            gates: GateMask::ALL_CLOSED,
        });
    }
    GateControlList {
        cycle_time: us(cycle_us),
        base_time: 0,
        entries,
    }
}

/// Topology for the single-link examples: talkers feed one bridge whose
/// egress to the listener is the contended port.
fn single_link_topology(talkers: &[&str]) -> Topology {
    let mut nodes = vec![NodeDef {
        name: "B".to_string(),
        kind: NodeKind::Bridge,
    }];
    let mut links = Vec::new();
    for t in talkers {
        nodes.push(NodeDef {
            name: t.to_string(),
            kind: NodeKind::EndStation,
        });
        links.push(LinkDef {
            node_a: t.to_string(),
            node_b: "B".to_string(),
            rate: GBIT,
            propagation_delay: 0,
        });
    }
    nodes.push(NodeDef {
        name: "L".to_string(),
        kind: NodeKind::EndStation,
    });
    links.push(LinkDef {
        node_a: "B".to_string(),
        node_b: "L".to_string(),
        rate: GBIT,
        propagation_delay: 0,
    });
    Topology {
        nodes,
        links,
        forwarding: vec![],
    }
}

fn stream(
    id: &str,
    talker: &str,
    listener: &str,
    path: &[&str],
    offset_us: u64,
    size: u32,
) -> StreamSpec {
    StreamSpec {
        stream_id: id.to_string(),
        talker: talker.to_string(),
        listener: listener.to_string(),
        path: path.iter().map(|s| s.to_string()).collect(),
        period: us(PERIOD_US),
        send_offset: us(offset_us),
        frame_size: size,
        priority: 7,
        frames_per_period: 1,
    }
}

/// Two streams, one shared transmission window per period.
///
/// Timeline per period (us): magenta 1000 B emitted at 0, arrives at the
/// bridge queue at 8; blue 500 B emitted at 6, arrives at 10. The gate
/// opens [12, 24): magenta transmits [12, 20), blue [20, 24), the queue is
/// empty from 24 until the next period.
pub fn no_fault() -> NetworkScenario {
    let topology = single_link_topology(&["TM", "TB"]);
    let streams = vec![
        stream("magenta", "TM", "L", &["B"], 0, 1000),
        stream("blue", "TB", "L", &["B"], 6, 500),
    ];
    let mut config = SimConfig::new(topology, streams, us(600));
    config
        .gcls
        .insert(PortKey::new("B", "L"), window_gcl(PERIOD_US, 7, &[(12, 24)]));
    NetworkScenario {
        name: "no_fault",
        notes: "baseline: two frames per period, both transmitted in one window, queue drains",
        config,
        expected: vec![
            Expectation::ZeroDrops,
            Expectation::Conservation,
            Expectation::AllLatenciesBelow { ns: us(100) },
            Expectation::DrainsEachPeriod {
                node: "B".to_string(),
                to: "L".to_string(),
                queue: 7,
                period: us(PERIOD_US),
                from: us(PERIOD_US),
                until: us(540),
            },
        ],
    }
}

/// Two equal-size streams with one exactly-fitting window each per period.
///
/// Timeline per period (us): magenta 1000 B emitted at 0 (arrives 8),
/// blue 1000 B emitted at 14 (arrives 22); windows [12, 20) and [24, 32).
fn two_slot_config(sim_end: u64) -> SimConfig {
    let topology = single_link_topology(&["TM", "TB"]);
    let streams = vec![
        stream("magenta", "TM", "L", &["B"], 0, 1000),
        stream("blue", "TB", "L", &["B"], 14, 1000),
    ];
    let mut config = SimConfig::new(topology, streams, sim_end);
    config.gcls.insert(
        PortKey::new("B", "L"),
        window_gcl(PERIOD_US, 7, &[(12, 20), (24, 32)]),
    );
    config
}

/// An unplanned frame takes the magenta slot of its period; from then on
/// one frame is buffered at every period boundary, forever.
///
/// The injected 1000 B frame is emitted at 110 us from the magenta talker
/// and reaches the queue at 118, ahead of magenta of period 1 (128).
pub fn additional() -> NetworkScenario {
    let mut config = two_slot_config(us(6360)); // 106 periods
    config.scenario = FaultScenario {
        actions: vec![FaultAction::InjectFrame {
            stream: "magenta".to_string(),
            at: us(110),
            size: 1000,
            priority: 7,
        }],
    };
    NetworkScenario {
        name: "additional",
        notes: "one injected frame permanently occupies one slot per period; \
                queue holds one extra frame at every later period boundary",
        config,
        expected: vec![Expectation::Conservation, Expectation::ZeroDrops],
    }
}

/// One late magenta frame misses its slot, takes the blue slot, and both
/// streams stay displaced by one slot forever.
///
/// magenta seq 1 shifts +10 us: emitted 70, arrives 78 inside its window
/// [72, 80) with only 2 us left, is deferred, transmits in the blue slot
/// [84, 92); blue of that period waits for the next magenta slot.
pub fn late_frame() -> NetworkScenario {
    let mut config = two_slot_config(us(600));
    config.scenario = FaultScenario {
        actions: vec![FaultAction::ShiftFrame {
            stream: "magenta".to_string(),
            seq: 1,
            shift: us(10) as i64,
        }],
    };
    NetworkScenario {
        name: "late_frame",
        notes: "a single late frame costs its slot; all later frames of both \
                streams are one slot late",
        config,
        expected: vec![Expectation::Conservation, Expectation::ZeroDrops],
    }
}

/// Every magenta frame arrives late: magenta permanently uses the blue
/// slots and blue the next-period magenta slots.
pub fn delayed_stream() -> NetworkScenario {
    let mut config = two_slot_config(us(600));
    config.scenario = FaultScenario {
        actions: vec![FaultAction::ShiftStream {
            stream: "magenta".to_string(),
            from_seq: 0,
            shift: us(10) as i64,
        }],
    };
    NetworkScenario {
        name: "delayed_stream",
        notes: "a delayed stream swaps slots with its neighbor on the link",
        config,
        expected: vec![Expectation::Conservation, Expectation::ZeroDrops],
    }
}

/// Blue arrives early in one period and transmits before magenta.
///
/// Same layout as `no_fault`; blue seq 1 shifts -6 us: emitted 60, arrives
/// 64 ahead of magenta (68), so the window [72, 84) serves blue [72, 76)
/// then magenta [76, 84).
pub fn early() -> NetworkScenario {
    let topology = single_link_topology(&["TM", "TB"]);
    let streams = vec![
        stream("magenta", "TM", "L", &["B"], 0, 1000),
        stream("blue", "TB", "L", &["B"], 6, 500),
    ];
    let mut config = SimConfig::new(topology, streams, us(600));
    config
        .gcls
        .insert(PortKey::new("B", "L"), window_gcl(PERIOD_US, 7, &[(12, 24)]));
    config.scenario = FaultScenario {
        actions: vec![FaultAction::ShiftFrame {
            stream: "blue".to_string(),
            seq: 1,
            shift: -(us(6) as i64),
        }],
    };
    NetworkScenario {
        name: "early",
        notes: "an early frame is transmitted first and slightly delays the \
                scheduled one",
        config,
        expected: vec![Expectation::Conservation, Expectation::ZeroDrops],
    }
}

/// Magenta of one period is missing; blue transmits at gate opening,
/// earlier than scheduled.
pub fn missing() -> NetworkScenario {
    let topology = single_link_topology(&["TM", "TB"]);
    let streams = vec![
        stream("magenta", "TM", "L", &["B"], 0, 1000),
        stream("blue", "TB", "L", &["B"], 6, 500),
    ];
    let mut config = SimConfig::new(topology, streams, us(600));
    config
        .gcls
        .insert(PortKey::new("B", "L"), window_gcl(PERIOD_US, 7, &[(12, 24)]));
    config.scenario = FaultScenario {
        actions: vec![FaultAction::DropFrame {
            stream: "magenta".to_string(),
            seq: 1,
        }],
    };
    NetworkScenario {
        name: "missing",
        notes: "a missing frame lets the next one transmit earlier than planned",
        config,
        expected: vec![Expectation::Conservation, Expectation::ZeroDrops],
    }
}

/// Three unequal frame sizes with per-size slots; the small stream is
/// delayed so sizes and slots stay permanently misordered and the queue
/// grows without bound.
///
/// Baseline per period (us): small 250 B emitted 0 (arrives 2, slot
/// [4, 6)), medium 500 B emitted 4 (arrives 8, slot [10, 14)), large
/// 1000 B emitted 10 (arrives 18, slot [20, 28)). The small stream shifts
/// +10 us so its frames arrive at 12, between medium and large.
pub fn continuous_increase() -> NetworkScenario {
    continuous_increase_with_capacity(0)
}

/// Same schedule with a configurable queue capacity (0 = unbounded); a
/// finite capacity turns the growth into overflow drops.
pub fn continuous_increase_with_capacity(queue_capacity: u64) -> NetworkScenario {
    let topology = single_link_topology(&["TS", "TM", "TL"]);
    let streams = vec![
        stream("small", "TS", "L", &["B"], 0, 250),
        stream("medium", "TM", "L", &["B"], 4, 500),
        stream("large", "TL", "L", &["B"], 10, 1000),
    ];
    let mut config = SimConfig::new(topology, streams, us(3600)); // 60 periods
    config.queue_capacity = queue_capacity;
    config.gcls.insert(
        PortKey::new("B", "L"),
        window_gcl(PERIOD_US, 7, &[(4, 6), (10, 14), (20, 28)]),
    );
    config.scenario = FaultScenario {
        actions: vec![FaultAction::ShiftStream {
            stream: "small".to_string(),
            from_seq: 0,
            shift: us(10) as i64,
        }],
    };
    NetworkScenario {
        name: "continuous_increase",
        notes: "a delayed small stream between medium and large frames leaves \
                slots unusable every period; the backlog grows without bound",
        config,
        expected: vec![Expectation::Conservation],
    }
}

/// Table of the seven streams: (talker, path bridges, listener).
pub const TABLE1_STREAMS: [(char, &str, [&str; 3], &str); 7] = [
    ('A', "ES1", ["B1", "B2", "B3"], "ES3"),
    ('B', "ES2", ["B2", "B3", "B4"], "ES4"),
    ('C', "ES3", ["B3", "B4", "B1"], "ES1"),
    ('D', "ES4", ["B4", "B1", "B2"], "ES2"),
    ('E', "ES3", ["B3", "B4", "B5"], "ES5"),
    ('F', "ES4", ["B4", "B5", "B2"], "ES2"),
    ('G', "ES5", ["B5", "B2", "B1"], "ES1"),
];

/// Everything reconstructed about the network schedule: per-stream frame
/// sizes, talker offsets and the per-hop transmission window starts
/// (us within the 60 us period; windows may wrap past the period end).
/// Windows are sized exactly to their frame's transmission time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkPlan {
    /// Frame size in bytes per stream A..G.
    pub sizes: [u32; 7],
    /// Talker send offset (us) per stream A..G.
    pub offsets_us: [u64; 7],
    /// Window start (us, may exceed 60 to express a next-period slot) for
    /// each of the three bridge hops of streams A..G.
    pub hop_starts_us: [[u64; 3]; 7],
}

impl NetworkPlan {
    pub fn stream_index(stream: char) -> usize {
        (stream as u8 - b'A') as usize
    }

    pub fn tx_us(&self, stream: usize) -> u64 {
        self.sizes[stream] as u64 * 8 / 1000
    }

    /// Plan with every hop window opening one microsecond after the frame's
    /// scheduled arrival (store-and-forward tight chain).
    pub fn tight(sizes: [u32; 7], offsets_us: [u64; 7]) -> Self {
        let mut hop_starts_us = [[0u64; 3]; 7];
        for s in 0..7 {
            let tx = sizes[s] as u64 * 8 / 1000;
            let mut t = offsets_us[s] + tx; // arrival at first bridge
            for h in 0..3 {
                hop_starts_us[s][h] = t + 1;
                t = t + 1 + tx; // next arrival: window start + tx
            }
        }
        NetworkPlan {
            sizes,
            offsets_us,
            hop_starts_us,
        }
    }

    /// (node, to) of hop `h` of stream index `s`.
    pub fn hop_port(s: usize, h: usize) -> (&'static str, &'static str) {
        let (_, talker, path, listener) = &TABLE1_STREAMS[s];
        let _ = talker;
        match h {
            0 => (path[0], path[1]),
            1 => (path[1], path[2]),
            _ => (path[2], listener),
        }
    }

    /// Check the plan produces per-port disjoint windows and collision-free
    /// talker ports; returns port -> window list on success.
    pub fn port_windows(&self) -> Result<BTreeMap<PortKey, Vec<(u64, u64)>>, String> {
        let mut per_port: BTreeMap<PortKey, Vec<(u64, u64)>> = BTreeMap::new();
        for s in 0..7 {
            let tx = self.tx_us(s);
            for h in 0..3 {
                let (node, to) = Self::hop_port(s, h);
                let start = self.hop_starts_us[s][h] % PERIOD_US;
                per_port
                    .entry(PortKey::new(node, to))
                    .or_default()
                    .push((start, start + tx));
            }
        }
        // Circular disjointness per port.
        for (key, windows) in &per_port {
            let mut spans: Vec<(u64, u64)> = Vec::new();
            for (s, e) in windows {
                if *e <= PERIOD_US {
                    spans.push((*s, *e));
                } else {
                    spans.push((*s, PERIOD_US));
                    spans.push((0, e - PERIOD_US));
                }
            }
            spans.sort();
            for pair in spans.windows(2) {
                if pair[1].0 < pair[0].1 {
                    return Err(format!("windows collide on port {key}"));
                }
            }
        }
        // Talker ports serialize their streams; emissions must not overlap.
        for (t1, t2) in [(2usize, 4usize), (3, 5)] {
            // (C, E) on ES3, (D, F) on ES4
            let a = (self.offsets_us[t1], self.offsets_us[t1] + self.tx_us(t1));
            let b = (self.offsets_us[t2], self.offsets_us[t2] + self.tx_us(t2));
            let disjoint = a.1 <= b.0 || b.1 <= a.0;
            if !disjoint {
                return Err(String::from("talker emissions overlap"));
            }
        }
        Ok(per_port)
    }
}

/// The bundled reconstruction. Offsets and window starts are chosen so that
/// the fault-free chain is tight (every frame waits exactly 1 us per hop)
/// and the contended ports' windows sit at resonant phase spacings: a frame
/// that misses its window takes the neighbor's, and the displacement keeps
/// circulating around the bridge ring instead of settling.
pub fn default_network_plan() -> NetworkPlan {
    NetworkPlan::tight(
        //  A    B     C    D     E    F     G
        [500, 500, 1250, 750, 1000, 250, 1250],
        [0, 32, 21, 8, 40, 51, 10],
    )
}

/// Five bridges in a broken ring, five end stations, gigabit links, seven
/// streams with a 60 us period.
pub fn build_table1_network() -> SimConfig {
    network_from_plan(&default_network_plan())
}

pub fn network_from_plan(plan: &NetworkPlan) -> SimConfig {
    let mut nodes = Vec::new();
    for i in 1..=5 {
        nodes.push(NodeDef {
            name: format!("B{i}"),
            kind: NodeKind::Bridge,
        });
        nodes.push(NodeDef {
            name: format!("ES{i}"),
            kind: NodeKind::EndStation,
        });
    }
    let mut links = Vec::new();
    let mut add_link = |a: &str, b: &str| {
        links.push(LinkDef {
            node_a: a.to_string(),
            node_b: b.to_string(),
            rate: GBIT,
            propagation_delay: 0,
        })
    };
    for i in 1..=5 {
        add_link(&format!("ES{i}"), &format!("B{i}"));
    }
    for (a, b) in [("B1", "B2"), ("B2", "B3"), ("B3", "B4"), ("B4", "B1"), ("B4", "B5"), ("B5", "B2")] {
        add_link(a, b);
    }
    let topology = Topology {
        nodes,
        links,
        forwarding: vec![],
    };

    let streams = TABLE1_STREAMS
        .iter()
        .enumerate()
        .map(|(i, (id, talker, path, listener))| StreamSpec {
            stream_id: id.to_string(),
            talker: talker.to_string(),
            listener: listener.to_string(),
            path: path.iter().map(|s| s.to_string()).collect(),
            period: us(PERIOD_US),
            send_offset: us(plan.offsets_us[i]),
            frame_size: plan.sizes[i],
            priority: 7,
            frames_per_period: 1,
        })
        .collect();

    let mut config = SimConfig::new(topology, streams, us(12_000));
    let per_port = plan.port_windows().expect("plan windows must not collide");
    for (key, mut windows) in per_port {
        windows.sort();
        config.gcls.insert(key, window_gcl(PERIOD_US, 7, &windows));
    }
    config
}

/// Fault-free network run: constant low latencies.
pub fn network_baseline() -> NetworkScenario {
    let config = build_table1_network();
    NetworkScenario {
        name: "network_baseline",
        notes: "all seven streams deliver with constant latency below 100 us",
        config,
        expected: vec![
            Expectation::ZeroDrops,
            Expectation::Conservation,
            Expectation::AllLatenciesBelow { ns: us(100) },
        ],
    }
}

/// Emission index of the stream-A frame nearest 10 ms.
pub fn fault_seq() -> u32 {
    // Period 60 us, offset 0: emissions at k*60 us; 10 ms / 60 us = 166.67,
    // so seq 167 (10.02 ms) is nearest.
    167
}

/// Absolute emission time of the faulted frame, before the shift.
pub fn fault_time_ns() -> u64 {
    fault_seq() as u64 * us(PERIOD_US)
}

/// Scheduled transmission window of one stream on one port (us within the
/// period), for timeline assertions in tests.
pub fn network_window(stream: char, node: &str, to: &str) -> Option<(u64, u64)> {
    let plan = default_network_plan();
    let s = NetworkPlan::stream_index(stream);
    (0..3).find_map(|h| {
        let (n, t) = NetworkPlan::hop_port(s, h);
        (n == node && t == to).then(|| {
            let start = plan.hop_starts_us[s][h] % PERIOD_US;
            (start, start + plan.tx_us(s))
        })
    })
}

/// The network with one frame of stream A sent 10 us later than scheduled
/// at t = 10.02 ms.
pub fn network_late_frame() -> NetworkScenario {
    let mut config = build_table1_network();
    config.sim_end = 600 * NS_PER_MS;
    config.scenario = FaultScenario {
        actions: vec![FaultAction::ShiftFrame {
            stream: "A".to_string(),
            seq: fault_seq(),
            shift: us(10) as i64,
        }],
    };
    NetworkScenario {
        name: "network_late_frame",
        notes: "a single frame of stream A shifted 10 us late at 10 ms; the \
                displacement spreads over the ring and every stream's latency grows",
        config,
        expected: vec![Expectation::Conservation],
    }
}

/// Scheduled arrival phase (us within the period) of each stream at its
/// first bridge, used to derive the PSFP protection windows.
fn first_bridge_arrival_us(stream: char) -> (&'static str, u64) {
    let plan = default_network_plan();
    let s = NetworkPlan::stream_index(stream);
    let (_, _, path, _) = TABLE1_STREAMS.iter().find(|(c, ..)| *c == stream).unwrap();
    (path[0], (plan.offsets_us[s] + plan.tx_us(s)) % PERIOD_US)
}

/// Same fault with time-based ingress gates at every stream's first bridge:
/// each gate is open only around the stream's scheduled arrival, so the one
/// perturbed frame is dropped on entry and nothing downstream changes.
pub fn network_late_frame_psfp() -> NetworkScenario {
    let mut scenario = network_late_frame();
    scenario.name = "network_late_frame_psfp";
    scenario.notes = "same fault, but per-stream ingress gates sized to the \
                      scheduled arrival drop the late frame at its first bridge";
    let slack = 2; // us on either side of the scheduled arrival
    let mut per_bridge: BTreeMap<String, PsfpConfig> = BTreeMap::new();
    for (id, ..) in TABLE1_STREAMS.iter() {
        let (bridge, arrival) = first_bridge_arrival_us(*id);
        // Open [arrival - slack, arrival + slack), expressed as a cyclic
        // schedule; use base_time to avoid splitting a wrapping window.
        let gate = StreamGate {
            cycle_time: us(PERIOD_US),
            base_time: us((arrival + PERIOD_US - slack) % PERIOD_US),
            entries: vec![
                StreamGateEntry {
                    start: 0,
                    end: us(2 * slack),
                    open: true,
                    ipv: None,
                },
                StreamGateEntry {
                    start: us(2 * slack),
                    end: us(PERIOD_US),
                    open: false,
                    ipv: None,
                },
            ],
        };
        let cfg = per_bridge.entry(bridge.to_string()).or_default();
        let gate_name = format!("arrival_{id}");
        cfg.gates.insert(gate_name.clone(), gate);
        cfg.filters.push(StreamFilter {
            match_stream: StreamMatch::Stream(id.to_string()),
            match_priority: PriorityMatch::Any,
            max_sdu: None,
            gate_ref: gate_name,
            meter_ref: None,
        });
    }
    scenario.config.psfp = per_bridge;
    scenario.expected = vec![
        Expectation::Conservation,
        Expectation::TotalDrops { count: 1 },
        Expectation::AllLatenciesBelow { ns: us(100) },
    ];
    scenario
}

/// All bundled scenarios in a stable order.
pub fn all() -> Vec<NetworkScenario> {
    vec![
        no_fault(),
        additional(),
        late_frame(),
        delayed_stream(),
        early(),
        missing(),
        continuous_increase(),
        network_baseline(),
        network_late_frame(),
        network_late_frame_psfp(),
    ]
}

pub fn by_name(name: &str) -> Option<NetworkScenario> {
    all().into_iter().find(|s| s.name == name)
}
