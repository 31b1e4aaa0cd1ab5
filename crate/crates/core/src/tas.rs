//! Egress port machinery: eight priority FIFO queues, transmission gates
//! driven by a gate control list, and transmission selection with the
//! length-aware guard (a frame that cannot complete before its gate closes
//! is deferred, without blocking lower-priority queues whose head fits).

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::model::{DurNs, Frame, GateControlList, NodeId, StreamId, TimeNs, NEVER};
use crate::trace::{DropReason, FrameEvent, FrameEventKind, TraceLog};

pub const NUM_QUEUES: usize = 8;

/// One egress port: the sending side of a directed link.
#[derive(Debug, Clone)]
pub struct EgressPort {
    /// Owning node.
    pub node: NodeId,
    /// Node this port faces.
    pub to: NodeId,
    /// Link rate in bits per second.
    pub rate: u64,
    pub propagation_delay: DurNs,
    pub gcl: GateControlList,
    /// Per-queue byte capacity; 0 = unbounded.
    pub queue_capacity: u64,
    queues: [VecDeque<Frame>; NUM_QUEUES],
    /// Bytes per queue, counting a transmitting frame until its last bit.
    occupancy: [u64; NUM_QUEUES],
    /// Peak of `occupancy` observed per queue.
    pub peak_occupancy: [u64; NUM_QUEUES],
    /// End of the transmission in progress; the port is free when
    /// `t >= busy_until`.
    pub busy_until: TimeNs,
    in_flight: Option<(u8, Frame)>,
    /// Count of head frames deferred because they could not complete before
    /// their gate closed (deduplicated per frame and open window).
    pub deferrals: u64,
    last_deferral: [Option<(StreamId, u32, TimeNs)>; NUM_QUEUES],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Enqueued,
    DroppedOverflow,
}

/// A transmission started by [`EgressPort::try_transmit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StartedTx {
    pub queue: u8,
    pub tx_end: TimeNs,
}

impl EgressPort {
    pub fn new(
        node: NodeId,
        to: NodeId,
        rate: u64,
        propagation_delay: DurNs,
        gcl: GateControlList,
        queue_capacity: u64,
    ) -> Self {
        EgressPort {
            node,
            to,
            rate,
            propagation_delay,
            gcl,
            queue_capacity,
            queues: Default::default(),
            occupancy: [0; NUM_QUEUES],
            peak_occupancy: [0; NUM_QUEUES],
            busy_until: 0,
            in_flight: None,
            deferrals: 0,
            last_deferral: [None; NUM_QUEUES],
        }
    }

    pub fn occupancy(&self, queue: u8) -> u64 {
        self.occupancy[queue as usize]
    }

    pub fn queued_frames(&self, queue: u8) -> usize {
        self.queues[queue as usize].len()
    }

    /// Frames sitting in queues plus the one in flight, for end-of-run
    /// accounting.
    pub fn frames_on_port(&self) -> usize {
        self.queues.iter().map(|q| q.len()).sum::<usize>() + usize::from(self.in_flight.is_some())
    }

    /// All frames currently held by this port (queued or transmitting).
    pub fn iter_frames(&self) -> impl Iterator<Item = &Frame> {
        self.queues
            .iter()
            .flat_map(|q| q.iter())
            .chain(self.in_flight.iter().map(|(_, f)| f))
    }

    /// Append `frame` to the given queue, or drop it on overflow. The queue
    /// is normally the frame's PCP; PSFP may select another one via IPV
    /// without rewriting the PCP field.
    pub fn enqueue(
        &mut self,
        frame: Frame,
        queue: u8,
        t: TimeNs,
        trace: &mut TraceLog,
    ) -> EnqueueOutcome {
        let q = queue as usize;
        if self.queue_capacity > 0 && self.occupancy[q] + frame.size as u64 > self.queue_capacity {
            trace.frame_events.push(FrameEvent {
                time: t,
                node: self.node,
                stream: frame.stream,
                seq: frame.seq,
                kind: FrameEventKind::Drop(DropReason::QueueOverflow),
                queue: Some(queue),
                size: frame.size,
                port_to: Some(self.to),
            });
            return EnqueueOutcome::DroppedOverflow;
        }
        self.occupancy[q] += frame.size as u64;
        self.peak_occupancy[q] = self.peak_occupancy[q].max(self.occupancy[q]);
        trace.frame_events.push(FrameEvent {
            time: t,
            node: self.node,
            stream: frame.stream,
            seq: frame.seq,
            kind: FrameEventKind::Enqueue,
            queue: Some(queue),
            size: frame.size,
            port_to: Some(self.to),
        });
        self.queues[q].push_back(frame);
        EnqueueOutcome::Enqueued
    }

    fn tx_duration(&self, size: u32, include_l1_overhead: bool) -> DurNs {
        let wire = if include_l1_overhead {
            size as u128 + crate::model::L1_OVERHEAD_BYTES as u128
        } else {
            size as u128
        };
        (wire * 8 * 1_000_000_000).div_ceil(self.rate as u128) as u64
    }

    /// Start the next transmission if the port is idle and some queue is
    /// eligible: non-empty, gate open at `t`, and the head frame fits before
    /// the queue's next gate close. Highest priority wins.
    pub fn try_transmit(
        &mut self,
        t: TimeNs,
        include_l1_overhead: bool,
        trace: &mut TraceLog,
    ) -> Option<StartedTx> {
        if t < self.busy_until || self.in_flight.is_some() {
            return None;
        }
        let gates = self.gcl.gate_state_at(t);
        for q in (0..NUM_QUEUES as u8).rev() {
            let queue = &self.queues[q as usize];
            let Some(head) = queue.front() else { continue };
            if !gates.is_open(q) {
                continue;
            }
            let duration = self.tx_duration(head.size, include_l1_overhead);
            let close = self
                .gcl
                .next_gate_close(q, t)
                .expect("gate checked open above");
            if close != NEVER && t + duration > close {
                // Length-aware guard: defer, and let lower priorities try.
                let key = (head.stream, head.seq, close);
                if self.last_deferral[q as usize] != Some(key) {
                    self.last_deferral[q as usize] = Some(key);
                    self.deferrals += 1;
                }
                continue;
            }
            let frame = self.queues[q as usize].pop_front().unwrap();
            trace.frame_events.push(FrameEvent {
                time: t,
                node: self.node,
                stream: frame.stream,
                seq: frame.seq,
                kind: FrameEventKind::TxStart,
                queue: Some(q),
                size: frame.size,
                port_to: Some(self.to),
            });
            let tx_end = t + duration;
            self.busy_until = tx_end;
            self.in_flight = Some((q, frame));
            return Some(StartedTx { queue: q, tx_end });
        }
        None
    }

    /// Finish the transmission in progress at its end time: free the port,
    /// release the queue bytes, and hand the frame to the caller for link
    /// propagation.
    pub fn complete_tx(&mut self, t: TimeNs, trace: &mut TraceLog) -> (u8, Frame) {
        let (q, frame) = self.in_flight.take().expect("TxComplete without transmission");
        debug_assert_eq!(t, self.busy_until);
        self.occupancy[q as usize] -= frame.size as u64;
        trace.frame_events.push(FrameEvent {
            time: t,
            node: self.node,
            stream: frame.stream,
            seq: frame.seq,
            kind: FrameEventKind::TxEnd,
            queue: Some(q),
            size: frame.size,
            port_to: Some(self.to),
        });
        (q, frame)
    }

    /// Occupancy snapshot of all queues (for feasibility checks).
    pub fn occupancy_snapshot(&self) -> Vec<u64> {
        self.occupancy.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GateMask, GclEntry};
    use alloc::vec;

    fn us(v: u64) -> u64 {
        v * 1_000
    }

    fn frame(seq: u32, size: u32, priority: u8) -> Frame {
        Frame {
            stream: StreamId(0),
            seq,
            size,
            priority,
            created_at: 0,
            arrivals: vec![],
        }
    }

    fn window_gcl(open_start: u64, open_end: u64, cycle: u64, queue: u8) -> GateControlList {
        let mask = GateMask::single(queue);
        let mut entries = Vec::new();
        if open_start > 0 {
            entries.push(GclEntry {
                start: 0,
                end: open_start,
                gates: GateMask::ALL_CLOSED,
            });
        }
        entries.push(GclEntry {
            start: open_start,
            end: open_end,
            gates: mask,
        });
        if open_end < cycle {
            entries.push(GclEntry {
                start: open_end,
                end: cycle,
                gates: GateMask::ALL_CLOSED,
            });
        }
        GateControlList {
            cycle_time: cycle,
            base_time: 0,
            entries,
        }
    }

    fn port(gcl: GateControlList, capacity: u64) -> EgressPort {
        EgressPort::new(NodeId(0), NodeId(1), 1_000_000_000, 0, gcl, capacity)
    }

    #[test]
    fn enqueue_accumulates_occupancy() {
        let mut p = port(window_gcl(us(12), us(30), us(60), 7), 0);
        let mut trace = TraceLog::default();
        p.enqueue(frame(0, 1000, 7), 7, us(8), &mut trace);
        assert_eq!(p.occupancy(7), 1000);
        p.enqueue(frame(1, 500, 7), 7, us(10), &mut trace);
        assert_eq!(p.occupancy(7), 1500);
    }

    #[test]
    fn overflow_drops_frame() {
        let mut p = port(window_gcl(us(12), us(30), us(60), 7), 1200);
        let mut trace = TraceLog {
            stream_names: vec!["s".into()],
            node_names: vec!["a".into(), "b".into()],
            ..Default::default()
        };
        assert_eq!(
            p.enqueue(frame(0, 1000, 7), 7, 0, &mut trace),
            EnqueueOutcome::Enqueued
        );
        assert_eq!(
            p.enqueue(frame(1, 500, 7), 7, 0, &mut trace),
            EnqueueOutcome::DroppedOverflow
        );
        assert_eq!(p.occupancy(7), 1000);
        assert!(matches!(
            trace.frame_events.last().unwrap().kind,
            FrameEventKind::Drop(DropReason::QueueOverflow)
        ));
    }

    #[test]
    fn transmits_when_frame_fits_window() {
        let mut p = port(window_gcl(0, us(30), us(60), 7), 0);
        let mut trace = TraceLog::default();
        p.enqueue(frame(0, 1000, 7), 7, 0, &mut trace);
        let tx = p.try_transmit(0, false, &mut trace).unwrap();
        assert_eq!(tx.tx_end, us(8));
        assert_eq!(p.occupancy(7), 1000); // still counted until tx_end
        let (q, f) = p.complete_tx(us(8), &mut trace);
        assert_eq!((q, f.seq), (7, 0));
        assert_eq!(p.occupancy(7), 0);
    }

    #[test]
    fn guard_defers_when_window_too_short() {
        // Gate closes in 5 us but a 1000 B frame needs 8 us.
        let mut p = port(window_gcl(0, us(5), us(60), 7), 0);
        let mut trace = TraceLog::default();
        p.enqueue(frame(0, 1000, 7), 7, 0, &mut trace);
        assert!(p.try_transmit(0, false, &mut trace).is_none());
        assert_eq!(p.deferrals, 1);
        // Repeated tries within the same window count once.
        assert!(p.try_transmit(us(1), false, &mut trace).is_none());
        assert_eq!(p.deferrals, 1);
    }

    #[test]
    fn strict_priority_picks_highest_queue() {
        let gcl = GateControlList::always_open(us(60));
        let mut p = port(gcl, 0);
        let mut trace = TraceLog::default();
        p.enqueue(frame(0, 500, 3), 3, 0, &mut trace);
        p.enqueue(frame(1, 500, 7), 7, 0, &mut trace);
        let tx = p.try_transmit(0, false, &mut trace).unwrap();
        assert_eq!(tx.queue, 7);
    }

    #[test]
    fn deferred_high_queue_does_not_block_lower() {
        // q7 window too short for its head, q3 open all cycle.
        let gcl = GateControlList {
            cycle_time: us(60),
            base_time: 0,
            entries: vec![
                GclEntry {
                    start: 0,
                    end: us(5),
                    gates: GateMask(0b1000_1000), // q7 + q3
                },
                GclEntry {
                    start: us(5),
                    end: us(60),
                    gates: GateMask::single(3),
                },
            ],
        };
        let mut p = port(gcl, 0);
        let mut trace = TraceLog::default();
        p.enqueue(frame(0, 1000, 7), 7, 0, &mut trace); // needs 8 us > 5
        p.enqueue(frame(1, 250, 3), 3, 0, &mut trace); // 2 us, q3 never closes
        let tx = p.try_transmit(0, false, &mut trace).unwrap();
        assert_eq!(tx.queue, 3);
    }

    #[test]
    fn port_busy_blocks_second_start() {
        let gcl = GateControlList::always_open(us(60));
        let mut p = port(gcl, 0);
        let mut trace = TraceLog::default();
        p.enqueue(frame(0, 500, 7), 7, 0, &mut trace);
        p.enqueue(frame(1, 500, 7), 7, 0, &mut trace);
        assert!(p.try_transmit(0, false, &mut trace).is_some());
        assert!(p.try_transmit(us(1), false, &mut trace).is_none());
        p.complete_tx(us(4), &mut trace);
        assert!(p.try_transmit(us(4), false, &mut trace).is_some());
    }

    #[test]
    fn fifo_order_within_queue() {
        let gcl = GateControlList::always_open(us(60));
        let mut p = port(gcl, 0);
        let mut trace = TraceLog::default();
        p.enqueue(frame(0, 500, 7), 7, 0, &mut trace);
        p.enqueue(frame(1, 250, 7), 7, 0, &mut trace);
        p.try_transmit(0, false, &mut trace).unwrap();
        let (_, f) = p.complete_tx(us(4), &mut trace);
        assert_eq!(f.seq, 0);
    }
}
