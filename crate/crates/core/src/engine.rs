//! Deterministic discrete-event kernel: event queue, virtual clock, talker
//! emission, link propagation and bridge hop orchestration.
//!
//! Determinism contract: identical configurations produce bit-identical
//! trace logs. Events are totally ordered by (time, kind rank, insertion
//! seq); at equal timestamps a finished transmission frees its port before
//! anything else, gates switch before frames arrive, and arrivals precede
//! new talker emissions.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::cmp::{Ordering, Reverse};

use crate::faults;
use crate::model::{
    ConfigError, Frame, GateControlList, GateMask, NodeId, NodeKind, SimConfig, StreamId, TimeNs,
};
use crate::psfp::{FilterVerdict, PsfpState};
use crate::tas::{EgressPort, EnqueueOutcome};
use crate::trace::{
    DropReason, FrameEvent, FrameEventKind, GateEvent, MeterEvent, TraceLog,
};

/// Second dispatch stage of a bridge hop when `processing_delay > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalStage {
    /// Frame's last bit reached the node: ingress processing (PSFP).
    Ingress,
    /// Ingress processing done; enqueue at the egress queue.
    Egress { queue: u8 },
}

#[derive(Debug, Clone)]
pub enum EventKind {
    TxComplete { port: usize },
    GateTransition { port: usize },
    /// Reserved for event-driven PSFP gate sampling; the kernel evaluates
    /// stream gates lazily at arrival, which yields identical results, so
    /// no such events are currently scheduled. The rank slot is part of the
    /// ordering contract.
    PsfpGateTransition { bridge: NodeId },
    FrameArrival {
        node: NodeId,
        frame: Frame,
        stage: ArrivalStage,
    },
    TalkerEmit { emission: faults::Emission },
    SimEnd,
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::TxComplete { .. } => 0,
            EventKind::GateTransition { .. } => 1,
            EventKind::PsfpGateTransition { .. } => 2,
            EventKind::FrameArrival { .. } => 3,
            EventKind::TalkerEmit { .. } => 4,
            EventKind::SimEnd => 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: TimeNs,
    pub kind: EventKind,
    /// Global monotone tie-break counter assigned at scheduling.
    pub seq: u64,
}

impl Event {
    fn key(&self) -> (TimeNs, u8, u64) {
        (self.time, self.kind.rank(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Per-stream accounting; conservation holds per stream and globally:
/// emitted = delivered + dropped + in_flight.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub emitted: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PortStats {
    pub node: String,
    pub to: String,
    pub peak_occupancy: [u64; 8],
    pub final_occupancy: [u64; 8],
    pub deferrals: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub per_stream: BTreeMap<String, StreamStats>,
    pub drops_by_reason: BTreeMap<String, u64>,
    pub ports: Vec<PortStats>,
    pub events_dispatched: u64,
}

impl RunStats {
    pub fn total(&self) -> StreamStats {
        let mut t = StreamStats::default();
        for s in self.per_stream.values() {
            t.emitted += s.emitted;
            t.delivered += s.delivered;
            t.dropped += s.dropped;
            t.in_flight += s.in_flight;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: TraceLog,
    pub stats: RunStats,
}

struct StreamRoute {
    /// Full node sequence: talker, bridges..., listener.
    nodes: Vec<NodeId>,
}

struct Kernel {
    clock: TimeNs,
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    sim_end: TimeNs,

    node_kinds: Vec<NodeKind>,
    routes: Vec<StreamRoute>,
    ports: Vec<EgressPort>,
    port_gate_mask: Vec<GateMask>,
    port_index: BTreeMap<(NodeId, NodeId), usize>,
    psfp: BTreeMap<NodeId, PsfpState>,
    processing_delay: TimeNs,
    include_l1_overhead: bool,

    trace: TraceLog,
    emitted: Vec<u64>,
    delivered: Vec<u64>,
    dropped: Vec<u64>,
    drops_by_reason: BTreeMap<String, u64>,
    events_dispatched: u64,
}

impl Kernel {
    fn schedule(&mut self, time: TimeNs, kind: EventKind) {
        assert!(
            time >= self.clock,
            "kernel bug: scheduling event at {time} before clock {}",
            self.clock
        );
        let ev = Event {
            time,
            kind,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.heap.push(Reverse(ev));
    }

    fn record_drop(&mut self, frame: &Frame, node: NodeId, reason: DropReason, queue: Option<u8>) {
        self.trace.frame_events.push(FrameEvent {
            time: self.clock,
            node,
            stream: frame.stream,
            seq: frame.seq,
            kind: FrameEventKind::Drop(reason),
            queue,
            size: frame.size,
            port_to: None,
        });
        self.dropped[frame.stream.0 as usize] += 1;
        *self
            .drops_by_reason
            .entry(reason.as_str().to_string())
            .or_insert(0) += 1;
    }

    fn try_transmit(&mut self, port_idx: usize) {
        let started = self.ports[port_idx].try_transmit(
            self.clock,
            self.include_l1_overhead,
            &mut self.trace,
        );
        if let Some(tx) = started {
            self.schedule(tx.tx_end, EventKind::TxComplete { port: port_idx });
        }
    }

    /// Ingress -> egress handoff at a bridge (or the talker's own port).
    fn enqueue_at_port(&mut self, port_idx: usize, frame: Frame, queue: u8) {
        let outcome = self.ports[port_idx].enqueue(frame.clone(), queue, self.clock, &mut self.trace);
        match outcome {
            EnqueueOutcome::Enqueued => self.try_transmit(port_idx),
            EnqueueOutcome::DroppedOverflow => {
                // The drop event is recorded by the port; account it here.
                self.dropped[frame.stream.0 as usize] += 1;
                *self
                    .drops_by_reason
                    .entry(DropReason::QueueOverflow.as_str().to_string())
                    .or_insert(0) += 1;
            }
        }
    }

    fn egress_port_for(&self, node: NodeId, stream: StreamId) -> Result<usize, ()> {
        let route = &self.routes[stream.0 as usize];
        let pos = route.nodes.iter().position(|n| *n == node).ok_or(())?;
        let next = *route.nodes.get(pos + 1).ok_or(())?;
        self.port_index.get(&(node, next)).copied().ok_or(())
    }

    fn handle_arrival(&mut self, node: NodeId, mut frame: Frame, stage: ArrivalStage) {
        let route_last = *self.routes[frame.stream.0 as usize]
            .nodes
            .last()
            .expect("route has nodes");

        if let ArrivalStage::Egress { queue } = stage {
            match self.egress_port_for(node, frame.stream) {
                Ok(port_idx) => self.enqueue_at_port(port_idx, frame, queue),
                Err(()) => self.record_drop(&frame.clone(), node, DropReason::ForwardingError, None),
            }
            return;
        }

        frame.arrivals.push((node, self.clock));

        if node == route_last {
            self.trace.frame_events.push(FrameEvent {
                time: self.clock,
                node,
                stream: frame.stream,
                seq: frame.seq,
                kind: FrameEventKind::Deliver,
                queue: None,
                size: frame.size,
                port_to: None,
            });
            self.delivered[frame.stream.0 as usize] += 1;
            return;
        }

        self.trace.frame_events.push(FrameEvent {
            time: self.clock,
            node,
            stream: frame.stream,
            seq: frame.seq,
            kind: FrameEventKind::Arrive,
            queue: None,
            size: frame.size,
            port_to: None,
        });

        // PSFP ingress processing, then egress after the processing delay.
        let mut queue = frame.priority;
        if self.node_kinds[node.0 as usize] == NodeKind::Bridge {
            if let Some(state) = self.psfp.get_mut(&node) {
                let stream_name = self.trace.stream_names[frame.stream.0 as usize].clone();
                let (verdict, meter) = state
                    .filter_frame(&stream_name, frame.priority, frame.size, self.clock)
                    .expect("meter time is monotone under the kernel clock");
                if let Some(d) = meter {
                    self.trace.meter_events.push(MeterEvent {
                        time: self.clock,
                        node,
                        meter: d.meter_index,
                        stream: frame.stream,
                        seq: frame.seq,
                        color: d.color,
                    });
                }
                match verdict {
                    FilterVerdict::Pass { effective_priority } => queue = effective_priority,
                    FilterVerdict::Drop(reason) => {
                        self.record_drop(&frame, node, reason, None);
                        return;
                    }
                }
            }
        }

        if self.processing_delay == 0 {
            match self.egress_port_for(node, frame.stream) {
                Ok(port_idx) => self.enqueue_at_port(port_idx, frame, queue),
                Err(()) => self.record_drop(&frame.clone(), node, DropReason::ForwardingError, None),
            }
        } else {
            self.schedule(
                self.clock + self.processing_delay,
                EventKind::FrameArrival {
                    node,
                    frame,
                    stage: ArrivalStage::Egress { queue },
                },
            );
        }
    }

    fn handle_gate_transition(&mut self, port_idx: usize) {
        let (new_mask, next_boundary) = {
            let port = &self.ports[port_idx];
            (
                port.gcl.gate_state_at(self.clock),
                port.gcl.next_boundary(self.clock),
            )
        };
        let old_mask = self.port_gate_mask[port_idx];
        if new_mask != old_mask {
            let (node, to) = (self.ports[port_idx].node, self.ports[port_idx].to);
            for q in 0..8u8 {
                if new_mask.is_open(q) != old_mask.is_open(q) {
                    self.trace.gate_events.push(GateEvent {
                        time: self.clock,
                        node,
                        port_to: to,
                        queue: q,
                        open: new_mask.is_open(q),
                    });
                }
            }
            self.port_gate_mask[port_idx] = new_mask;
        }
        self.try_transmit(port_idx);
        if next_boundary <= self.sim_end {
            self.schedule(next_boundary, EventKind::GateTransition { port: port_idx });
        }
    }
}

/// Execute one simulation run.
///
/// The configuration is validated first; any diagnostic fails the run. Two
/// runs with an identical configuration produce identical results.
pub fn run(config: &SimConfig) -> Result<RunResult, ConfigError> {
    let diagnostics = crate::validator::validate_config(config);
    if !diagnostics.is_empty() {
        let joined = diagnostics
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(ConfigError::Invalid(joined));
    }
    run_validated(config)
}

/// Execute a run without re-validating (the validator itself uses this for
/// feasibility probes on configurations it has already checked).
pub(crate) fn run_validated(config: &SimConfig) -> Result<RunResult, ConfigError> {
    // Intern nodes.
    let mut node_ids: BTreeMap<&str, NodeId> = BTreeMap::new();
    let mut node_names: Vec<String> = Vec::new();
    let mut node_kinds: Vec<NodeKind> = Vec::new();
    for n in &config.topology.nodes {
        node_ids.insert(&n.name, NodeId(node_names.len() as u32));
        node_names.push(n.name.clone());
        node_kinds.push(n.kind);
    }
    let node_id = |name: &str| -> Result<NodeId, ConfigError> {
        node_ids
            .get(name)
            .copied()
            .ok_or_else(|| ConfigError::invalid(format!("unknown node '{name}'")))
    };

    // Emissions, with faults applied.
    let mut emissions: Vec<faults::Emission> = Vec::new();
    for s in &config.streams {
        emissions.extend(faults::nominal_emissions(s, config.sim_end));
    }
    let periods = |name: &str| {
        config
            .streams
            .iter()
            .find(|s| s.stream_id == name)
            .map(|s| s.period)
    };
    let mut emissions = faults::apply(&config.scenario, emissions, &periods)?;
    emissions.retain(|e| e.time < config.sim_end);

    // Stream table: configured streams, then synthetic injected ones in
    // emission order.
    let mut stream_ids: BTreeMap<String, StreamId> = BTreeMap::new();
    let mut stream_names: Vec<String> = Vec::new();
    let mut routes: Vec<StreamRoute> = Vec::new();
    for s in &config.streams {
        let mut nodes = Vec::with_capacity(s.path.len() + 2);
        nodes.push(node_id(&s.talker)?);
        for b in &s.path {
            nodes.push(node_id(b)?);
        }
        nodes.push(node_id(&s.listener)?);
        stream_ids.insert(s.stream_id.clone(), StreamId(stream_names.len() as u32));
        stream_names.push(s.stream_id.clone());
        routes.push(StreamRoute { nodes });
    }
    for e in &emissions {
        if let Some(parent) = &e.injected_into {
            if !stream_ids.contains_key(&e.stream) {
                let parent_route = &routes[stream_ids[parent].0 as usize];
                let nodes = parent_route.nodes.clone();
                stream_ids.insert(e.stream.clone(), StreamId(stream_names.len() as u32));
                stream_names.push(e.stream.clone());
                routes.push(StreamRoute { nodes });
            }
        }
    }

    // Ports: one per directed link used by a route hop or named in `gcls`.
    let mut port_index: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    let mut ports: Vec<EgressPort> = Vec::new();
    let add_port = |from: NodeId,
                        to: NodeId,
                        ports: &mut Vec<EgressPort>,
                        port_index: &mut BTreeMap<(NodeId, NodeId), usize>|
     -> Result<usize, ConfigError> {
        if let Some(i) = port_index.get(&(from, to)) {
            return Ok(*i);
        }
        let from_name = &node_names[from.0 as usize];
        let to_name = &node_names[to.0 as usize];
        let link = config
            .topology
            .link_between(from_name, to_name)
            .ok_or_else(|| {
                ConfigError::invalid(format!("no link between '{from_name}' and '{to_name}'"))
            })?;
        let key = crate::model::PortKey::new(from_name, to_name);
        let gcl = config
            .gcls
            .get(&key)
            .cloned()
            .unwrap_or_else(|| GateControlList::always_open(1_000_000));
        let idx = ports.len();
        ports.push(EgressPort::new(
            from,
            to,
            link.rate,
            link.propagation_delay,
            gcl,
            config.queue_capacity,
        ));
        port_index.insert((from, to), idx);
        Ok(idx)
    };
    for route in &routes {
        for pair in route.nodes.windows(2) {
            add_port(pair[0], pair[1], &mut ports, &mut port_index)?;
        }
    }
    for key in config.gcls.keys() {
        add_port(
            node_id(&key.node)?,
            node_id(&key.to)?,
            &mut ports,
            &mut port_index,
        )?;
    }

    // PSFP per bridge; meter indices are global across bridges.
    let mut psfp: BTreeMap<NodeId, PsfpState> = BTreeMap::new();
    let mut meter_names: Vec<String> = Vec::new();
    for (bridge, cfg) in &config.psfp {
        let id = node_id(bridge)?;
        let base = meter_names.len() as u32;
        for name in cfg.meters.keys() {
            meter_names.push(format!("{bridge}/{name}"));
        }
        psfp.insert(id, PsfpState::new(cfg.clone(), base));
    }

    let n_streams = stream_names.len();
    let mut kernel = Kernel {
        clock: 0,
        heap: BinaryHeap::new(),
        next_seq: 0,
        sim_end: config.sim_end,
        node_kinds,
        routes,
        port_gate_mask: vec![GateMask::ALL_CLOSED; ports.len()],
        ports,
        port_index,
        psfp,
        processing_delay: config.processing_delay,
        include_l1_overhead: config.include_l1_overhead,
        trace: TraceLog {
            stream_names,
            node_names,
            meter_names,
            ..Default::default()
        },
        emitted: vec![0; n_streams],
        delivered: vec![0; n_streams],
        dropped: vec![0; n_streams],
        drops_by_reason: BTreeMap::new(),
        events_dispatched: 0,
    };

    // Initial gate states and first transitions for explicitly scheduled
    // ports; implicit always-open ports never change state.
    for i in 0..kernel.ports.len() {
        let key = crate::model::PortKey::new(
            kernel.trace.node_names[kernel.ports[i].node.0 as usize].clone(),
            kernel.trace.node_names[kernel.ports[i].to.0 as usize].clone(),
        );
        let explicit = config.gcls.contains_key(&key);
        let mask = kernel.ports[i].gcl.gate_state_at(0);
        kernel.port_gate_mask[i] = mask;
        if explicit {
            let (node, to) = (kernel.ports[i].node, kernel.ports[i].to);
            for q in 0..8u8 {
                kernel.trace.gate_events.push(GateEvent {
                    time: 0,
                    node,
                    port_to: to,
                    queue: q,
                    open: mask.is_open(q),
                });
            }
            if kernel.ports[i].gcl.entries.len() > 1 {
                let boundary = kernel.ports[i].gcl.next_boundary(0);
                if boundary <= config.sim_end {
                    kernel.schedule(boundary, EventKind::GateTransition { port: i });
                }
            }
        }
    }

    for e in emissions {
        kernel.schedule(e.time, EventKind::TalkerEmit { emission: e });
    }
    kernel.schedule(config.sim_end, EventKind::SimEnd);

    // Main loop.
    while let Some(Reverse(ev)) = kernel.heap.pop() {
        assert!(ev.time >= kernel.clock, "kernel bug: time went backwards");
        kernel.clock = ev.time;
        kernel.events_dispatched += 1;
        match ev.kind {
            EventKind::TxComplete { port } => {
                let (_q, frame) = kernel.ports[port].complete_tx(kernel.clock, &mut kernel.trace);
                let to = kernel.ports[port].to;
                let arrival = kernel.clock + kernel.ports[port].propagation_delay;
                kernel.schedule(
                    arrival,
                    EventKind::FrameArrival {
                        node: to,
                        frame,
                        stage: ArrivalStage::Ingress,
                    },
                );
                kernel.try_transmit(port);
            }
            EventKind::GateTransition { port } => kernel.handle_gate_transition(port),
            EventKind::PsfpGateTransition { .. } => {}
            EventKind::FrameArrival { node, frame, stage } => {
                kernel.handle_arrival(node, frame, stage)
            }
            EventKind::TalkerEmit { emission } => {
                let stream = stream_ids[&emission.stream];
                let frame = Frame {
                    stream,
                    seq: emission.seq,
                    size: emission.size,
                    priority: emission.priority,
                    created_at: kernel.clock,
                    arrivals: Vec::new(),
                };
                let talker = kernel.routes[stream.0 as usize].nodes[0];
                kernel.trace.frame_events.push(FrameEvent {
                    time: kernel.clock,
                    node: talker,
                    stream,
                    seq: frame.seq,
                    kind: FrameEventKind::Emit,
                    queue: None,
                    size: frame.size,
                    port_to: None,
                });
                kernel.emitted[stream.0 as usize] += 1;
                let queue = frame.priority;
                match kernel.egress_port_for(talker, stream) {
                    Ok(port_idx) => kernel.enqueue_at_port(port_idx, frame, queue),
                    Err(()) => {
                        kernel.record_drop(&frame, talker, DropReason::ForwardingError, None)
                    }
                }
            }
            EventKind::SimEnd => break,
        }
    }

    // In-flight accounting: frames still queued or transmitting on ports,
    // plus frames inside undispatched arrival events.
    let mut in_flight = vec![0u64; n_streams];
    for port in &kernel.ports {
        for frame in port.iter_frames() {
            in_flight[frame.stream.0 as usize] += 1;
        }
    }
    for Reverse(ev) in kernel.heap.iter() {
        if let EventKind::FrameArrival { frame, .. } = &ev.kind {
            in_flight[frame.stream.0 as usize] += 1;
        }
    }

    let mut per_stream = BTreeMap::new();
    for (i, name) in kernel.trace.stream_names.iter().enumerate() {
        per_stream.insert(
            name.clone(),
            StreamStats {
                emitted: kernel.emitted[i],
                delivered: kernel.delivered[i],
                dropped: kernel.dropped[i],
                in_flight: in_flight[i],
            },
        );
    }
    let ports_stats = kernel
        .ports
        .iter()
        .map(|p| PortStats {
            node: kernel.trace.node_names[p.node.0 as usize].clone(),
            to: kernel.trace.node_names[p.to.0 as usize].clone(),
            peak_occupancy: p.peak_occupancy,
            final_occupancy: core::array::from_fn(|q| p.occupancy(q as u8)),
            deferrals: p.deferrals,
        })
        .collect();

    Ok(RunResult {
        trace: kernel.trace,
        stats: RunStats {
            per_stream,
            drops_by_reason: kernel.drops_by_reason,
            ports: ports_stats,
            events_dispatched: kernel.events_dispatched,
        },
    })
}

/// Planned talker emissions of one stream under a scenario, for inspection
/// and tests: nominal schedule perturbed by the scenario's actions.
pub fn emit_talker_frames(
    stream: &crate::model::StreamSpec,
    scenario: &crate::faults::FaultScenario,
    sim_end: TimeNs,
) -> Result<Vec<faults::Emission>, ConfigError> {
    let nominal = faults::nominal_emissions(stream, sim_end);
    let relevant = crate::faults::FaultScenario {
        actions: scenario
            .actions
            .iter()
            .filter(|a| a.stream() == stream.stream_id)
            .cloned()
            .collect(),
    };
    faults::apply(&relevant, nominal, &|name| {
        (name == stream.stream_id).then_some(stream.period)
    })
}
