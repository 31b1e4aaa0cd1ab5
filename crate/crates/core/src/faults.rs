//! Declarative, timed perturbations of talker emissions: dropping frames,
//! injecting additional frames, shifting one frame or a whole stream tail.
//!
//! Faults act on emission times at the talker; every downstream effect
//! (missed slots, stolen slots, growing queues) emerges from the schedule.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{collections::BTreeSet, format};

use crate::model::{ConfigError, DurNs, TimeNs};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultAction {
    /// The frame `seq` of `stream` is never emitted.
    DropFrame { stream: String, seq: u32 },
    /// An unplanned frame is emitted at `at` from the talker of `stream`,
    /// following that stream's path. The injected frame is accounted under a
    /// synthetic stream id so conservation stays exact.
    InjectFrame {
        stream: String,
        at: TimeNs,
        size: u32,
        priority: u8,
    },
    /// One emission moves by `shift` ns (negative = early, positive = late).
    ShiftFrame {
        stream: String,
        seq: u32,
        shift: i64,
    },
    /// Every emission with seq >= `from_seq` moves by `shift` ns.
    ShiftStream {
        stream: String,
        from_seq: u32,
        shift: i64,
    },
}

impl FaultAction {
    pub fn stream(&self) -> &str {
        match self {
            FaultAction::DropFrame { stream, .. }
            | FaultAction::InjectFrame { stream, .. }
            | FaultAction::ShiftFrame { stream, .. }
            | FaultAction::ShiftStream { stream, .. } => stream,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FaultScenario {
    pub actions: Vec<FaultAction>,
}

impl FaultScenario {
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// One planned talker emission, before frame objects exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub time: TimeNs,
    /// Stream name; synthetic emissions get a derived name.
    pub stream: String,
    pub seq: u32,
    pub size: u32,
    pub priority: u8,
    /// For injected frames, the stream whose talker and path they follow.
    pub injected_into: Option<String>,
}

/// Nominal emission table of one stream: `k * period + send_offset` for all
/// k with time < `sim_end`, `frames_per_period` frames per period.
pub fn nominal_emissions(spec: &crate::model::StreamSpec, sim_end: TimeNs) -> Vec<Emission> {
    let mut out = Vec::new();
    let mut k: u64 = 0;
    loop {
        let t = k * spec.period + spec.send_offset;
        if t >= sim_end {
            break;
        }
        for j in 0..spec.frames_per_period {
            out.push(Emission {
                time: t,
                stream: spec.stream_id.clone(),
                seq: (k * spec.frames_per_period as u64 + j as u64) as u32,
                size: spec.frame_size,
                priority: spec.priority,
                injected_into: None,
            });
        }
        k += 1;
    }
    out
}

/// Apply a fault scenario to a sorted emission table.
///
/// Drops remove the matching emission, injections add one, shifts move
/// emission times; the result is re-sorted by (time, stream, seq). Actions
/// referencing unknown streams or seqs are configuration errors.
pub fn apply(
    scenario: &FaultScenario,
    mut emissions: Vec<Emission>,
    periods: &dyn Fn(&str) -> Option<DurNs>,
) -> Result<Vec<Emission>, ConfigError> {
    let mut single_frame_targets: BTreeSet<(String, u32)> = BTreeSet::new();
    let mut inject_counter: u32 = 0;

    for action in &scenario.actions {
        let period = periods(action.stream())
            .ok_or_else(|| ConfigError::UnknownStream(String::from(action.stream())))?;

        match action {
            FaultAction::DropFrame { stream, seq } | FaultAction::ShiftFrame { stream, seq, .. } => {
                if !single_frame_targets.insert((stream.clone(), *seq)) {
                    return Err(ConfigError::invalid(format!(
                        "multiple single-frame actions target stream '{stream}' seq {seq}"
                    )));
                }
            }
            _ => {}
        }

        match action {
            FaultAction::DropFrame { stream, seq } => {
                let idx = emissions
                    .iter()
                    .position(|e| e.injected_into.is_none() && &e.stream == stream && e.seq == *seq)
                    .ok_or_else(|| ConfigError::UnknownSeq {
                        stream: stream.clone(),
                        seq: *seq,
                    })?;
                emissions.remove(idx);
            }
            FaultAction::InjectFrame {
                stream,
                at,
                size,
                priority,
            } => {
                emissions.push(Emission {
                    time: *at,
                    stream: format!("{stream}!inj{inject_counter}"),
                    seq: 0,
                    size: *size,
                    priority: *priority,
                    injected_into: Some(stream.clone()),
                });
                inject_counter += 1;
            }
            FaultAction::ShiftFrame { stream, seq, shift } => {
                if shift.unsigned_abs() >= period {
                    return Err(ConfigError::invalid(format!(
                        "shift of {shift} ns on stream '{stream}' is not smaller than its period; \
                         model larger shifts as drop + inject"
                    )));
                }
                let e = emissions
                    .iter_mut()
                    .find(|e| e.injected_into.is_none() && &e.stream == stream && e.seq == *seq)
                    .ok_or_else(|| ConfigError::UnknownSeq {
                        stream: stream.clone(),
                        seq: *seq,
                    })?;
                e.time = shifted(e.time, *shift, stream)?;
            }
            FaultAction::ShiftStream {
                stream,
                from_seq,
                shift,
            } => {
                let mut hit = false;
                for e in emissions
                    .iter_mut()
                    .filter(|e| e.injected_into.is_none() && &e.stream == stream && e.seq >= *from_seq)
                {
                    e.time = shifted(e.time, *shift, stream)?;
                    hit = true;
                }
                if !hit && *from_seq > 0 {
                    return Err(ConfigError::UnknownSeq {
                        stream: stream.clone(),
                        seq: *from_seq,
                    });
                }
            }
        }
    }

    emissions.sort_by(|a, b| {
        (a.time, &a.stream, a.seq).cmp(&(b.time, &b.stream, b.seq))
    });
    Ok(emissions)
}

fn shifted(t: TimeNs, shift: i64, stream: &str) -> Result<TimeNs, ConfigError> {
    let v = t as i128 + shift as i128;
    if v < 0 {
        return Err(ConfigError::invalid(format!(
            "shift moves an emission of stream '{stream}' before time 0"
        )));
    }
    Ok(v as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{StreamSpec, NS_PER_US};
    use alloc::string::ToString;
    use alloc::vec;

    fn us(v: u64) -> u64 {
        v * NS_PER_US
    }

    fn spec() -> StreamSpec {
        StreamSpec {
            stream_id: "A".to_string(),
            talker: "t".to_string(),
            listener: "l".to_string(),
            path: vec!["b".to_string()],
            period: us(60),
            send_offset: us(5),
            frame_size: 1000,
            priority: 7,
            frames_per_period: 1,
        }
    }

    fn period_of(_: &str) -> Option<u64> {
        Some(us(60))
    }

    #[test]
    fn nominal_emissions_at_offsets() {
        let e = nominal_emissions(&spec(), us(180));
        let times: Vec<u64> = e.iter().map(|e| e.time).collect();
        assert_eq!(times, vec![us(5), us(65), us(125)]);
        assert_eq!(e[2].seq, 2);
    }

    #[test]
    fn empty_scenario_is_identity() {
        let e = nominal_emissions(&spec(), us(180));
        let out = apply(&FaultScenario::default(), e.clone(), &period_of).unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn drop_removes_emission() {
        let e = nominal_emissions(&spec(), us(180));
        let scenario = FaultScenario {
            actions: vec![FaultAction::DropFrame {
                stream: "A".to_string(),
                seq: 1,
            }],
        };
        let out = apply(&scenario, e, &period_of).unwrap();
        let times: Vec<u64> = out.iter().map(|e| e.time).collect();
        assert_eq!(times, vec![us(5), us(125)]);
    }

    #[test]
    fn shift_moves_single_emission() {
        let e = nominal_emissions(&spec(), us(180));
        let scenario = FaultScenario {
            actions: vec![FaultAction::ShiftFrame {
                stream: "A".to_string(),
                seq: 2,
                shift: 10 * NS_PER_US as i64,
            }],
        };
        let out = apply(&scenario, e, &period_of).unwrap();
        assert_eq!(out[2].time, us(135));
    }

    #[test]
    fn shift_stream_moves_tail() {
        let e = nominal_emissions(&spec(), us(240));
        let scenario = FaultScenario {
            actions: vec![FaultAction::ShiftStream {
                stream: "A".to_string(),
                from_seq: 1,
                shift: -(us(3) as i64),
            }],
        };
        let out = apply(&scenario, e, &period_of).unwrap();
        let times: Vec<u64> = out.iter().map(|e| e.time).collect();
        assert_eq!(times, vec![us(5), us(62), us(122), us(182)]);
    }

    #[test]
    fn inject_adds_synthetic_emission() {
        let e = nominal_emissions(&spec(), us(180));
        let scenario = FaultScenario {
            actions: vec![FaultAction::InjectFrame {
                stream: "A".to_string(),
                at: us(50),
                size: 1000,
                priority: 7,
            }],
        };
        let out = apply(&scenario, e, &period_of).unwrap();
        assert_eq!(out.len(), 4);
        let inj = out.iter().find(|e| e.injected_into.is_some()).unwrap();
        assert_eq!(inj.time, us(50));
        assert_eq!(inj.stream, "A!inj0");
        assert_eq!(inj.injected_into.as_deref(), Some("A"));
    }

    #[test]
    fn counts_balance() {
        let e = nominal_emissions(&spec(), us(300));
        let n = e.len();
        let scenario = FaultScenario {
            actions: vec![
                FaultAction::DropFrame {
                    stream: "A".to_string(),
                    seq: 0,
                },
                FaultAction::InjectFrame {
                    stream: "A".to_string(),
                    at: us(7),
                    size: 500,
                    priority: 7,
                },
                FaultAction::InjectFrame {
                    stream: "A".to_string(),
                    at: us(8),
                    size: 500,
                    priority: 7,
                },
            ],
        };
        let out = apply(&scenario, e, &period_of).unwrap();
        assert_eq!(out.len(), n - 1 + 2);
    }

    #[test]
    fn unknown_refs_are_errors() {
        let e = nominal_emissions(&spec(), us(180));
        let bad_stream = FaultScenario {
            actions: vec![FaultAction::DropFrame {
                stream: "Z".to_string(),
                seq: 0,
            }],
        };
        assert!(matches!(
            apply(&bad_stream, e.clone(), &|s| (s == "A").then_some(us(60))),
            Err(ConfigError::UnknownStream(_))
        ));
        let bad_seq = FaultScenario {
            actions: vec![FaultAction::DropFrame {
                stream: "A".to_string(),
                seq: 99,
            }],
        };
        assert!(matches!(
            apply(&bad_seq, e, &period_of),
            Err(ConfigError::UnknownSeq { .. })
        ));
    }

    #[test]
    fn oversized_shift_rejected() {
        let e = nominal_emissions(&spec(), us(180));
        let scenario = FaultScenario {
            actions: vec![FaultAction::ShiftFrame {
                stream: "A".to_string(),
                seq: 0,
                shift: us(60) as i64,
            }],
        };
        assert!(apply(&scenario, e, &period_of).is_err());
    }

    #[test]
    fn duplicate_single_frame_actions_rejected() {
        let e = nominal_emissions(&spec(), us(180));
        let scenario = FaultScenario {
            actions: vec![
                FaultAction::ShiftFrame {
                    stream: "A".to_string(),
                    seq: 1,
                    shift: 100,
                },
                FaultAction::DropFrame {
                    stream: "A".to_string(),
                    seq: 1,
                },
            ],
        };
        assert!(apply(&scenario, e, &period_of).is_err());
    }
}
