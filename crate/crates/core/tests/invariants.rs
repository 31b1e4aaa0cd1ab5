//! Cross-cutting invariants checked on the traces of every bundled
//! scenario: guard correctness, one transmission at a time per port,
//! monotone event times, and consistency between the occupancy series and
//! the byte accounting.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use tassim_core::engine::run;
use tassim_core::model::PortKey;
use tassim_core::scenarios::{self, NetworkScenario};
use tassim_core::trace::{occupancy_series, step_occupancy, FrameEventKind};

/// Scenario runs are shared between the tests in this file.
fn runs() -> &'static Vec<(NetworkScenario, tassim_core::RunResult)> {
    static CELL: OnceLock<Vec<(NetworkScenario, tassim_core::RunResult)>> = OnceLock::new();
    CELL.get_or_init(|| {
        scenarios::all()
            .into_iter()
            .map(|s| {
                let result = run(&s.config).unwrap();
                (s, result)
            })
            .collect()
    })
}

/// (start, end, queue) of every transmission per port.
fn transmissions(
    result: &tassim_core::RunResult,
) -> BTreeMap<(u32, u32), Vec<(u64, u64, u8)>> {
    let mut open: BTreeMap<(u32, u32, u32, u32), (u64, u8)> = BTreeMap::new();
    let mut out: BTreeMap<(u32, u32), Vec<(u64, u64, u8)>> = BTreeMap::new();
    for e in &result.trace.frame_events {
        let Some(to) = e.port_to else { continue };
        let key = (e.node.0, to.0, e.stream.0, e.seq);
        match e.kind {
            FrameEventKind::TxStart => {
                open.insert(key, (e.time, e.queue.unwrap()));
            }
            FrameEventKind::TxEnd => {
                if let Some((start, queue)) = open.remove(&key) {
                    out.entry((e.node.0, to.0))
                        .or_default()
                        .push((start, e.time, queue));
                }
            }
            _ => {}
        }
    }
    for list in out.values_mut() {
        list.sort();
    }
    out
}

#[test]
fn transmissions_never_overlap_per_port() {
    for scenario in scenarios::all() {
        let result = run(&scenario.config).unwrap();
        for (port, txs) in transmissions(&result) {
            for pair in txs.windows(2) {
                assert!(
                    pair[0].1 <= pair[1].0,
                    "{}: overlapping transmissions {pair:?} on port {port:?}",
                    scenario.name
                );
            }
        }
    }
}

#[test]
fn every_transmission_fits_an_open_window() {
    for scenario in scenarios::all() {
        let result = run(&scenario.config).unwrap();
        let log = &result.trace;
        for ((node, to), txs) in transmissions(&result) {
            let key = PortKey::new(log.node_names[node as usize].clone(), log.node_names[to as usize].clone());
            let Some(gcl) = scenario.config.gcls.get(&key) else {
                continue; // always-open port
            };
            for (start, end, queue) in txs {
                assert!(
                    gcl.gate_state_at(start).is_open(queue),
                    "{}: tx at {start} on closed gate {key} q{queue}",
                    scenario.name
                );
                let close = gcl.next_gate_close(queue, start).unwrap();
                assert!(
                    end <= close,
                    "{}: tx [{start}, {end}) crosses gate close {close} on {key} q{queue}",
                    scenario.name
                );
            }
        }
    }
}

#[test]
fn trace_times_are_monotone() {
    for scenario in scenarios::all() {
        let result = run(&scenario.config).unwrap();
        let times: Vec<u64> = result.trace.frame_events.iter().map(|e| e.time).collect();
        assert!(
            times.windows(2).all(|w| w[0] <= w[1]),
            "{}: frame events out of order",
            scenario.name
        );
        let gate_times: Vec<u64> = result.trace.gate_events.iter().map(|e| e.time).collect();
        assert!(gate_times.windows(2).all(|w| w[0] <= w[1]));
    }
}

/// The ramp-style occupancy series agrees with the integer byte counter at
/// transmission boundaries and never goes negative; final counters in the
/// stats match the step series at sim end.
#[test]
fn occupancy_series_consistent_with_byte_counter() {
    for scenario in scenarios::all() {
        let result = run(&scenario.config).unwrap();
        let log = &result.trace;
        for p in &result.stats.ports {
            let node = log.node_id(&p.node).unwrap();
            let to = log.node_id(&p.to).unwrap();
            for q in 0..8u8 {
                if p.peak_occupancy[q as usize] == 0 {
                    continue;
                }
                let step = step_occupancy(log, node, to, q);
                let ramp = occupancy_series(log, node, to, q).unwrap();
                assert!(ramp.samples.iter().all(|(_, v)| *v >= 0.0));
                // At every tx_end instant the ramp has fully drained the
                // frame: it equals the integer counter exactly.
                for e in log.frame_events.iter().filter(|e| {
                    e.node == node
                        && e.port_to == Some(to)
                        && e.queue == Some(q)
                        && e.kind == FrameEventKind::TxEnd
                }) {
                    let counted = tassim_core::trace::step_value_at(&step, e.time);
                    let at_ramp = ramp
                        .samples
                        .iter()
                        .rev()
                        .find(|(t, _)| *t == e.time)
                        .map(|(_, v)| *v)
                        .unwrap();
                    assert_eq!(
                        at_ramp, counted as f64,
                        "{}: ramp and counter disagree at {} on {}->{} q{q}",
                        scenario.name, e.time, p.node, p.to
                    );
                }
                // Final occupancy in the engine stats equals the series.
                let at_end = tassim_core::trace::step_value_at(&step, scenario.config.sim_end);
                assert_eq!(
                    at_end, p.final_occupancy[q as usize],
                    "{}: final occupancy mismatch on {}->{} q{q}",
                    scenario.name, p.node, p.to
                );
            }
        }
    }
}

/// Frames' per-hop arrival stamps increase strictly along the path.
#[test]
fn frame_lifecycle_is_ordered() {
    for scenario in scenarios::all() {
        let result = run(&scenario.config).unwrap();
        let log = &result.trace;
        // Per frame: emit <= arrive* <= deliver/drop, strictly increasing
        // arrivals.
        let mut per_frame: BTreeMap<(u32, u32), Vec<(u64, &'static str)>> = BTreeMap::new();
        for e in &log.frame_events {
            let tag = e.kind.name();
            per_frame
                .entry((e.stream.0, e.seq))
                .or_default()
                .push((e.time, tag));
        }
        for ((stream, seq), events) in per_frame {
            assert_eq!(
                events.first().map(|e| e.1),
                Some("emit"),
                "{}: frame {stream}/{seq} must start with emit",
                scenario.name
            );
            let last = events.last().unwrap().1;
            let terminal = last == "deliver" || last == "drop";
            let in_flight = result
                .stats
                .per_stream
                .values()
                .any(|s| s.in_flight > 0);
            assert!(
                terminal || in_flight,
                "{}: frame {stream}/{seq} ends with {last}",
                scenario.name
            );
        }
    }
}
