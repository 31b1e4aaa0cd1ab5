//! Simulation observables: the append-only trace log, derived series
//! (queue occupancy, per-frame latency) and deterministic CSV rendering.
//!
//! The log keeps interned ids internally; rendering resolves them through
//! the name tables carried on [`TraceLog`] so output is stable text.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::model::{NodeId, StreamId, TimeNs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    PsfpGateClosed,
    PsfpMaxSdu,
    PsfpMeterRed,
    PsfpMeterYellow,
    PsfpNoMatch,
    QueueOverflow,
    ForwardingError,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::PsfpGateClosed => "psfp_gate_closed",
            DropReason::PsfpMaxSdu => "psfp_max_sdu",
            DropReason::PsfpMeterRed => "psfp_meter_red",
            DropReason::PsfpMeterYellow => "psfp_meter_yellow",
            DropReason::PsfpNoMatch => "psfp_no_match",
            DropReason::QueueOverflow => "queue_overflow",
            DropReason::ForwardingError => "forwarding_error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "psfp_gate_closed" => DropReason::PsfpGateClosed,
            "psfp_max_sdu" => DropReason::PsfpMaxSdu,
            "psfp_meter_red" => DropReason::PsfpMeterRed,
            "psfp_meter_yellow" => DropReason::PsfpMeterYellow,
            "psfp_no_match" => DropReason::PsfpNoMatch,
            "queue_overflow" => DropReason::QueueOverflow,
            "forwarding_error" => DropReason::ForwardingError,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameEventKind {
    Emit,
    Arrive,
    Enqueue,
    TxStart,
    TxEnd,
    Deliver,
    Drop(DropReason),
}

impl FrameEventKind {
    pub fn name(self) -> &'static str {
        match self {
            FrameEventKind::Emit => "emit",
            FrameEventKind::Arrive => "arrive",
            FrameEventKind::Enqueue => "enqueue",
            FrameEventKind::TxStart => "tx_start",
            FrameEventKind::TxEnd => "tx_end",
            FrameEventKind::Deliver => "deliver",
            FrameEventKind::Drop(_) => "drop",
        }
    }
}

/// One frame lifecycle event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameEvent {
    pub time: TimeNs,
    pub node: NodeId,
    pub stream: StreamId,
    pub seq: u32,
    pub kind: FrameEventKind,
    /// Egress queue index, for enqueue/tx events.
    pub queue: Option<u8>,
    pub size: u32,
    /// Neighbor the egress port faces, for port-scoped events.
    pub port_to: Option<NodeId>,
}

/// Gate state change of one egress queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateEvent {
    pub time: TimeNs,
    pub node: NodeId,
    pub port_to: NodeId,
    pub queue: u8,
    pub open: bool,
}

/// Flow-meter color decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeterEvent {
    pub time: TimeNs,
    pub node: NodeId,
    /// Index into `meter_names`.
    pub meter: u32,
    pub stream: StreamId,
    pub seq: u32,
    pub color: crate::psfp::MeterColor,
}

/// Complete record of one simulation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceLog {
    pub frame_events: Vec<FrameEvent>,
    pub gate_events: Vec<GateEvent>,
    pub meter_events: Vec<MeterEvent>,
    /// Stream index -> name (includes synthetic injected streams).
    pub stream_names: Vec<String>,
    /// Node index -> name.
    pub node_names: Vec<String>,
    /// Meter index -> "bridge/meter_id".
    pub meter_names: Vec<String>,
}

impl TraceLog {
    pub fn stream_name(&self, id: StreamId) -> &str {
        &self.stream_names[id.0 as usize]
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.0 as usize]
    }

    pub fn stream_id(&self, name: &str) -> Option<StreamId> {
        self.stream_names
            .iter()
            .position(|n| n == name)
            .map(|i| StreamId(i as u32))
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.node_names
            .iter()
            .position(|n| n == name)
            .map(|i| NodeId(i as u32))
    }
}

/// Piecewise-linear queue occupancy: instantaneous step up at enqueue,
/// linear ramp down over each transmission. Breakpoint values at event
/// instants; steps are encoded as two points at the same time.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySeries {
    pub node: NodeId,
    pub port_to: NodeId,
    pub queue: u8,
    pub samples: Vec<(TimeNs, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("unknown port or queue: {0}")]
    UnknownPortOrQueue(String),
    #[error("unknown stream '{0}'")]
    UnknownStream(String),
}

fn port_queue_events<'a>(
    log: &'a TraceLog,
    node: NodeId,
    port_to: NodeId,
    queue: u8,
) -> impl Iterator<Item = &'a FrameEvent> {
    log.frame_events.iter().filter(move |e| {
        e.node == node
            && e.port_to == Some(port_to)
            && e.queue == Some(queue)
            && matches!(
                e.kind,
                FrameEventKind::Enqueue
                    | FrameEventKind::TxStart
                    | FrameEventKind::TxEnd
                    | FrameEventKind::Drop(DropReason::QueueOverflow)
            )
    })
}

/// Queue occupancy in the visualization convention: arrivals are
/// instantaneous, departures ramp down linearly over the transmission.
pub fn occupancy_series(
    log: &TraceLog,
    node: NodeId,
    port_to: NodeId,
    queue: u8,
) -> Result<OccupancySeries, QueryError> {
    let events: Vec<&FrameEvent> = port_queue_events(log, node, port_to, queue).collect();
    // A frame crosses a port once, so (stream, seq) identifies its
    // transmission; pre-index tx_end times to resolve ramp slopes.
    let mut tx_ends: alloc::collections::BTreeMap<(u32, u32), TimeNs> =
        alloc::collections::BTreeMap::new();
    for e in &events {
        if e.kind == FrameEventKind::TxEnd {
            tx_ends.insert((e.stream.0, e.seq), e.time);
        }
    }

    let mut samples: Vec<(TimeNs, f64)> = vec![(0, 0.0)];
    let mut level: f64 = 0.0;
    let mut ramp_rate: f64 = 0.0; // bytes per ns while transmitting
    let mut last_t: TimeNs = 0;

    for e in &events {
        if e.time > last_t {
            level = (level - ramp_rate * (e.time - last_t) as f64).max(0.0);
            samples.push((e.time, level));
            last_t = e.time;
        }
        match e.kind {
            FrameEventKind::Enqueue => {
                level += e.size as f64;
                samples.push((e.time, level));
            }
            FrameEventKind::TxStart => {
                if let Some(end) = tx_ends.get(&(e.stream.0, e.seq)) {
                    ramp_rate = e.size as f64 / (end - e.time) as f64;
                }
            }
            FrameEventKind::TxEnd => {
                ramp_rate = 0.0;
                // Snap to the exact integer level to absorb rounding
                // (f64::round is unavailable without std; occupancy is
                // non-negative so this truncation rounds correctly).
                level = (level + 0.5) as u64 as f64;
                if let Some(last) = samples.last_mut() {
                    if last.0 == e.time {
                        last.1 = level;
                    } else {
                        samples.push((e.time, level));
                    }
                }
            }
            _ => {}
        }
    }

    Ok(OccupancySeries {
        node,
        port_to,
        queue,
        samples,
    })
}

/// Exact integer occupancy in the accounting convention used by the engine:
/// +size at enqueue, -size at tx_end (a transmitting frame still occupies
/// its queue until the last bit left). Returns step breakpoints.
pub fn step_occupancy(
    log: &TraceLog,
    node: NodeId,
    port_to: NodeId,
    queue: u8,
) -> Vec<(TimeNs, u64)> {
    let mut out: Vec<(TimeNs, u64)> = vec![(0, 0)];
    let mut level: u64 = 0;
    for e in port_queue_events(log, node, port_to, queue) {
        match e.kind {
            FrameEventKind::Enqueue => level += e.size as u64,
            FrameEventKind::TxEnd => level -= e.size as u64,
            _ => continue,
        }
        if out.last().map(|p| p.0) == Some(e.time) {
            out.last_mut().unwrap().1 = level;
        } else {
            out.push((e.time, level));
        }
    }
    out
}

/// Value of a step series at instant `t` (events at `t` already applied).
pub fn step_value_at(series: &[(TimeNs, u64)], t: TimeNs) -> u64 {
    match series.binary_search_by_key(&t, |p| p.0) {
        Ok(i) => series[i].1,
        Err(0) => 0,
        Err(i) => series[i - 1].1,
    }
}

/// Per-frame end-to-end outcome of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyRecord {
    pub seq: u32,
    pub emit_ns: TimeNs,
    /// None while in flight at sim end.
    pub deliver_ns: Option<TimeNs>,
    pub dropped: bool,
}

impl LatencyRecord {
    pub fn latency_ns(&self) -> Option<u64> {
        self.deliver_ns.map(|d| d - self.emit_ns)
    }
}

/// Latency series of one stream: latency = delivery - actual emission;
/// dropped frames carry a marker, frames still in flight have no delivery.
pub fn latency_series(log: &TraceLog, stream: &str) -> Result<Vec<LatencyRecord>, QueryError> {
    let sid = log
        .stream_id(stream)
        .ok_or_else(|| QueryError::UnknownStream(stream.to_string()))?;
    let mut recs: Vec<LatencyRecord> = Vec::new();
    for e in log.frame_events.iter().filter(|e| e.stream == sid) {
        match e.kind {
            FrameEventKind::Emit => recs.push(LatencyRecord {
                seq: e.seq,
                emit_ns: e.time,
                deliver_ns: None,
                dropped: false,
            }),
            FrameEventKind::Deliver => {
                if let Some(r) = recs.iter_mut().find(|r| r.seq == e.seq) {
                    r.deliver_ns = Some(e.time);
                }
            }
            FrameEventKind::Drop(_) => {
                if let Some(r) = recs.iter_mut().find(|r| r.seq == e.seq) {
                    r.dropped = true;
                }
            }
            _ => {}
        }
    }
    recs.sort_by_key(|r| r.seq);
    Ok(recs)
}

pub const FRAME_CSV_HEADER: &str = "time_ns,node,stream_id,seq,event,queue,size_bytes,detail";
pub const LATENCY_CSV_HEADER: &str = "stream_id,seq,emit_ns,deliver_ns,latency_ns,dropped";
pub const GATE_CSV_HEADER: &str = "time_ns,node,port,queue,state";
pub const METER_CSV_HEADER: &str = "time_ns,node,meter_id,stream_id,seq,color";

/// Frame-event CSV; deterministic bytes for identical logs.
pub fn frames_csv(log: &TraceLog) -> String {
    let mut out = String::from(FRAME_CSV_HEADER);
    out.push('\n');
    for e in &log.frame_events {
        let queue = e.queue.map(|q| q.to_string()).unwrap_or_default();
        let mut detail = String::new();
        if let FrameEventKind::Drop(reason) = e.kind {
            detail.push_str("reason=");
            detail.push_str(reason.as_str());
        }
        if let Some(to) = e.port_to {
            if !detail.is_empty() {
                detail.push(' ');
            }
            detail.push_str("to=");
            detail.push_str(log.node_name(to));
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.time,
            log.node_name(e.node),
            log.stream_name(e.stream),
            e.seq,
            e.kind.name(),
            queue,
            e.size,
            detail
        ));
    }
    out
}

/// Parse the output of [`frames_csv`] back into events (round-trip check
/// and offline tooling). Name tables are rebuilt in first-seen order of the
/// original log, so `parse(frames_csv(log))` equals the original events.
pub fn parse_frames_csv(text: &str, log_names: &TraceLog) -> Result<Vec<FrameEvent>, String> {
    let mut out = Vec::new();
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == FRAME_CSV_HEADER => {}
        other => return Err(format!("bad header: {other:?}")),
    }
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(format!("line {}: expected 8 columns", lineno + 2));
        }
        let time: TimeNs = cols[0].parse().map_err(|_| format!("line {}: bad time", lineno + 2))?;
        let node = log_names
            .node_id(cols[1])
            .ok_or_else(|| format!("line {}: unknown node {}", lineno + 2, cols[1]))?;
        let stream = log_names
            .stream_id(cols[2])
            .ok_or_else(|| format!("line {}: unknown stream {}", lineno + 2, cols[2]))?;
        let seq: u32 = cols[3].parse().map_err(|_| "bad seq".to_string())?;
        let queue = if cols[5].is_empty() {
            None
        } else {
            Some(cols[5].parse::<u8>().map_err(|_| "bad queue".to_string())?)
        };
        let size: u32 = cols[6].parse().map_err(|_| "bad size".to_string())?;
        let mut reason = None;
        let mut port_to = None;
        for part in cols[7].split(' ').filter(|p| !p.is_empty()) {
            if let Some(r) = part.strip_prefix("reason=") {
                reason = DropReason::parse(r);
            } else if let Some(n) = part.strip_prefix("to=") {
                port_to = log_names.node_id(n);
            }
        }
        let kind = match cols[4] {
            "emit" => FrameEventKind::Emit,
            "arrive" => FrameEventKind::Arrive,
            "enqueue" => FrameEventKind::Enqueue,
            "tx_start" => FrameEventKind::TxStart,
            "tx_end" => FrameEventKind::TxEnd,
            "deliver" => FrameEventKind::Deliver,
            "drop" => FrameEventKind::Drop(reason.ok_or("drop without reason")?),
            other => return Err(format!("unknown event {other}")),
        };
        out.push(FrameEvent {
            time,
            node,
            stream,
            seq,
            kind,
            queue,
            size,
            port_to,
        });
    }
    Ok(out)
}

/// Latency CSV over every stream in id order.
pub fn latency_csv(log: &TraceLog) -> String {
    let mut out = String::from(LATENCY_CSV_HEADER);
    out.push('\n');
    for name in &log.stream_names {
        let recs = latency_series(log, name).expect("stream from own name table");
        for r in recs {
            let deliver = r.deliver_ns.map(|v| v.to_string()).unwrap_or_default();
            let latency = r.latency_ns().map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                name, r.seq, r.emit_ns, deliver, latency, r.dropped
            ));
        }
    }
    out
}

/// Gate-event CSV.
pub fn gates_csv(log: &TraceLog) -> String {
    let mut out = String::from(GATE_CSV_HEADER);
    out.push('\n');
    for e in &log.gate_events {
        out.push_str(&format!(
            "{},{},{}->{},{},{}\n",
            e.time,
            log.node_name(e.node),
            log.node_name(e.node),
            log.node_name(e.port_to),
            e.queue,
            if e.open { "open" } else { "closed" }
        ));
    }
    out
}

/// Meter-event CSV.
pub fn meters_csv(log: &TraceLog) -> String {
    let mut out = String::from(METER_CSV_HEADER);
    out.push('\n');
    for e in &log.meter_events {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.time,
            log.node_name(e.node),
            log.meter_names[e.meter as usize],
            log.stream_name(e.stream),
            e.seq,
            e.color.as_str()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_log() -> TraceLog {
        let mut log = TraceLog {
            stream_names: vec!["A".into()],
            node_names: vec!["B".into(), "L".into()],
            ..Default::default()
        };
        let a = StreamId(0);
        let b = NodeId(0);
        let l = NodeId(1);
        let ev = |time, kind, queue, port_to| FrameEvent {
            time,
            node: b,
            stream: a,
            seq: 0,
            kind,
            queue,
            size: 1000,
            port_to,
        };
        log.frame_events = vec![
            ev(0, FrameEventKind::Emit, None, None),
            ev(8_000, FrameEventKind::Enqueue, Some(7), Some(l)),
            ev(12_000, FrameEventKind::TxStart, Some(7), Some(l)),
            ev(20_000, FrameEventKind::TxEnd, Some(7), Some(l)),
            FrameEvent {
                time: 20_000,
                node: l,
                stream: a,
                seq: 0,
                kind: FrameEventKind::Deliver,
                queue: None,
                size: 1000,
                port_to: None,
            },
        ];
        log
    }

    #[test]
    fn empty_log_renders_header_only() {
        let log = TraceLog::default();
        assert_eq!(frames_csv(&log), format!("{FRAME_CSV_HEADER}\n"));
        assert_eq!(latency_csv(&log), format!("{LATENCY_CSV_HEADER}\n"));
    }

    #[test]
    fn one_frame_renders_one_row_per_event() {
        let log = tiny_log();
        let csv = frames_csv(&log);
        assert_eq!(csv.lines().count(), 1 + 5);
        assert!(csv.contains("12000,B,A,0,tx_start,7,1000,to=L"));
    }

    #[test]
    fn frames_csv_round_trips() {
        let log = tiny_log();
        let parsed = parse_frames_csv(&frames_csv(&log), &log).unwrap();
        assert_eq!(parsed, log.frame_events);
    }

    #[test]
    fn step_occupancy_counts_bytes_until_tx_end() {
        let log = tiny_log();
        let s = step_occupancy(&log, NodeId(0), NodeId(1), 7);
        assert_eq!(s, vec![(0, 0), (8_000, 1000), (20_000, 0)]);
        assert_eq!(step_value_at(&s, 12_000), 1000);
        assert_eq!(step_value_at(&s, 20_000), 0);
    }

    #[test]
    fn occupancy_ramp_hits_zero_at_tx_end() {
        let log = tiny_log();
        let s = occupancy_series(&log, NodeId(0), NodeId(1), 7).unwrap();
        let last = *s.samples.last().unwrap();
        assert_eq!(last, (20_000, 0.0));
        // Value right at tx_start is the full frame.
        assert!(s.samples.contains(&(12_000, 1000.0)) || s.samples.contains(&(8_000, 1000.0)));
    }

    #[test]
    fn no_traffic_is_constant_zero() {
        let log = tiny_log();
        let s = occupancy_series(&log, NodeId(0), NodeId(1), 3).unwrap();
        assert_eq!(s.samples, vec![(0, 0.0)]);
    }

    #[test]
    fn latency_series_reports_delivery() {
        let log = tiny_log();
        let recs = latency_series(&log, "A").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].latency_ns(), Some(20_000));
        assert!(!recs[0].dropped);
    }

    #[test]
    fn latency_series_unknown_stream_errors() {
        let log = tiny_log();
        assert!(latency_series(&log, "nope").is_err());
    }
}
