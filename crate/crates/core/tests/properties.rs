//! Property tests for the schedule arithmetic, the meter, fault
//! application and trace serialization.

use proptest::prelude::*;

use tassim_core::faults::{apply, nominal_emissions, FaultAction, FaultScenario};
use tassim_core::model::{
    hyperperiod, GateControlList, GateMask, GclEntry, StreamSpec, NEVER,
};
use tassim_core::psfp::{FlowMeter, FlowMeterSpec, MeterColor};

fn arb_gcl() -> impl Strategy<Value = GateControlList> {
    // 1..6 entries with random positive lengths and random gate vectors.
    (
        proptest::collection::vec((1u64..5_000, any::<u8>()), 1..6),
        0u64..100_000,
    )
        .prop_map(|(segments, base_time)| {
            let mut entries = Vec::new();
            let mut cursor = 0;
            for (len, mask) in segments {
                entries.push(GclEntry {
                    start: cursor,
                    end: cursor + len,
                    gates: GateMask(mask),
                });
                cursor += len;
            }
            GateControlList {
                cycle_time: cursor,
                base_time,
                entries,
            }
        })
}

proptest! {
    #[test]
    fn gcl_state_is_periodic(gcl in arb_gcl(), t in 0u64..1_000_000) {
        prop_assert_eq!(gcl.gate_state_at(t), gcl.gate_state_at(t + gcl.cycle_time));
        prop_assert_eq!(gcl.gate_state_at(t), gcl.gate_state_at(t + 7 * gcl.cycle_time));
    }

    #[test]
    fn gcl_entries_cover_cycle_exactly(gcl in arb_gcl()) {
        prop_assert!(gcl.check().is_ok());
        // Concatenating [start, end) reconstructs [0, cycle_time).
        let mut cursor = 0;
        for e in &gcl.entries {
            prop_assert_eq!(e.start, cursor);
            cursor = e.end;
        }
        prop_assert_eq!(cursor, gcl.cycle_time);
    }

    #[test]
    fn next_gate_close_is_consistent(gcl in arb_gcl(), t in 0u64..500_000, queue in 0u8..8) {
        if !gcl.gate_state_at(t).is_open(queue) {
            return Ok(());
        }
        let close = gcl.next_gate_close(queue, t).unwrap();
        if close == NEVER {
            // Open through a whole cycle means open everywhere.
            for probe in 0..gcl.entries.len() {
                prop_assert!(gcl.entries[probe].gates.is_open(queue));
            }
        } else {
            prop_assert!(close > t);
            prop_assert!(!gcl.gate_state_at(close).is_open(queue));
            // Open at the instant just before the close.
            prop_assert!(gcl.gate_state_at(close - 1).is_open(queue));
        }
    }

    #[test]
    fn hyperperiod_divisible_by_every_period(periods in proptest::collection::vec(1u64..5_000, 1..6)) {
        let streams: Vec<StreamSpec> = periods
            .iter()
            .enumerate()
            .map(|(i, p)| StreamSpec {
                stream_id: format!("s{i}"),
                talker: "t".into(),
                listener: "l".into(),
                path: vec![],
                period: *p,
                send_offset: 0,
                frame_size: 64,
                priority: 0,
                frames_per_period: 1,
            })
            .collect();
        let h = hyperperiod(&streams).unwrap();
        for p in periods {
            prop_assert_eq!(h % p, 0);
        }
    }

    /// Color-blind trTCM monotonicity: raising cir never turns a green
    /// frame non-green for a fixed arrival sequence.
    #[test]
    fn meter_monotone_in_cir(
        cir in 1_000u64..1_000_000_000,
        bump in 1u64..1_000_000_000,
        cbs in 0u64..20_000,
        eir in 1_000u64..1_000_000_000,
        ebs in 0u64..20_000,
        frames in proptest::collection::vec((1u64..2_000_000, 1u32..2_000), 1..20),
    ) {
        let spec_lo = FlowMeterSpec { cir, cbs, eir, ebs, drop_yellow: false };
        let spec_hi = FlowMeterSpec { cir: cir + bump, ..spec_lo };
        let mut lo = FlowMeter::new(spec_lo);
        let mut hi = FlowMeter::new(spec_hi);
        let mut t = 0u64;
        for (gap, size) in frames {
            t += gap;
            let a = lo.meter_frame(size, t).unwrap();
            let b = hi.meter_frame(size, t).unwrap();
            if a == MeterColor::Green {
                prop_assert_eq!(b, MeterColor::Green);
            }
        }
    }

    /// apply() is an identity for empty scenarios and preserves counts:
    /// |output| = |input| - drops + injections.
    #[test]
    fn fault_counts_balance(
        period in 1_000u64..100_000,
        n_periods in 1u64..30,
        drops in proptest::collection::btree_set(0u32..30, 0..4),
        injections in proptest::collection::vec(0u64..3_000_000, 0..4),
    ) {
        let spec = StreamSpec {
            stream_id: "s".into(),
            talker: "t".into(),
            listener: "l".into(),
            path: vec![],
            period,
            send_offset: 0,
            frame_size: 64,
            priority: 0,
            frames_per_period: 1,
        };
        let sim_end = period * n_periods;
        let emissions = nominal_emissions(&spec, sim_end);
        let n = emissions.len();

        prop_assert_eq!(
            apply(&FaultScenario::default(), emissions.clone(), &|_| Some(period)).unwrap(),
            emissions.clone()
        );

        let drops: Vec<u32> = drops.into_iter().filter(|d| (*d as u64) < n as u64).collect();
        let mut actions: Vec<FaultAction> = drops
            .iter()
            .map(|seq| FaultAction::DropFrame { stream: "s".into(), seq: *seq })
            .collect();
        for at in &injections {
            actions.push(FaultAction::InjectFrame {
                stream: "s".into(),
                at: *at,
                size: 100,
                priority: 3,
            });
        }
        let scenario = FaultScenario { actions };
        let out = apply(&scenario, emissions, &|_| Some(period)).unwrap();
        prop_assert_eq!(out.len(), n - drops.len() + injections.len());
        // Output sorted by time.
        prop_assert!(out.windows(2).all(|w| w[0].time <= w[1].time));
    }

    /// apply() over disjoint single-frame actions is order-independent.
    #[test]
    fn fault_application_order_independent(
        period in 1_000u64..100_000,
        shift_seq in 0u32..10,
        drop_seq in 10u32..20,
    ) {
        let spec = StreamSpec {
            stream_id: "s".into(),
            talker: "t".into(),
            listener: "l".into(),
            path: vec![],
            period,
            send_offset: 0,
            frame_size: 64,
            priority: 0,
            frames_per_period: 1,
        };
        let emissions = nominal_emissions(&spec, period * 25);
        let shift = FaultAction::ShiftFrame {
            stream: "s".into(),
            seq: shift_seq,
            shift: (period / 2) as i64,
        };
        let drop = FaultAction::DropFrame { stream: "s".into(), seq: drop_seq };
        let ab = apply(
            &FaultScenario { actions: vec![shift.clone(), drop.clone()] },
            emissions.clone(),
            &|_| Some(period),
        )
        .unwrap();
        let ba = apply(
            &FaultScenario { actions: vec![drop, shift] },
            emissions,
            &|_| Some(period),
        )
        .unwrap();
        prop_assert_eq!(ab, ba);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// frames.csv round-trips through its parser for arbitrary event rows.
    #[test]
    fn frames_csv_round_trips(
        rows in proptest::collection::vec(
            (0u64..10_000_000, 0u32..3, 0u32..2, 0u32..50, 0u8..7, 0u32..2_000, any::<bool>()),
            0..40,
        )
    ) {
        use tassim_core::model::{NodeId, StreamId};
        use tassim_core::trace::*;

        let mut log = TraceLog {
            stream_names: vec!["alpha".into(), "beta".into()],
            node_names: vec!["n0".into(), "n1".into(), "n2".into()],
            ..Default::default()
        };
        let mut rows = rows;
        rows.sort_by_key(|r| r.0);
        for (time, node, stream, seq, kind_sel, size, with_port) in rows {
            let kind = match kind_sel {
                0 => FrameEventKind::Emit,
                1 => FrameEventKind::Arrive,
                2 => FrameEventKind::Enqueue,
                3 => FrameEventKind::TxStart,
                4 => FrameEventKind::TxEnd,
                5 => FrameEventKind::Deliver,
                _ => FrameEventKind::Drop(DropReason::QueueOverflow),
            };
            let queued = matches!(
                kind,
                FrameEventKind::Enqueue | FrameEventKind::TxStart | FrameEventKind::TxEnd
            );
            log.frame_events.push(FrameEvent {
                time,
                node: NodeId(node),
                stream: StreamId(stream),
                seq,
                kind,
                queue: queued.then_some(7),
                size,
                port_to: (with_port && queued).then_some(NodeId((node + 1) % 3)),
            });
        }
        let text = frames_csv(&log);
        let parsed = parse_frames_csv(&text, &log).unwrap();
        prop_assert_eq!(parsed, log.frame_events);
    }
}
