//! JSON configuration schema: the on-disk form of a simulation setup with
//! top-level keys `topology`, `streams`, `gcls`, `psfp`, `scenario`, `sim`.
//! Durations accept `ns`/`us`/`ms` suffixes (or bare integers meaning ns)
//! and normalize to nanoseconds.

use std::collections::BTreeMap;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tassim_core::model::{self, PortKey};
use tassim_core::{faults, psfp};

/// Duration in nanoseconds with human-friendly JSON forms: `250`, `"250ns"`,
/// `"60us"`, `"10ms"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Dur(pub u64);

/// Signed duration (fault shifts): `"10us"`, `"-3us"`, `-3000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SignedDur(pub i64);

fn parse_duration_str(s: &str) -> Result<i64, String> {
    let s = s.trim();
    let (num, mult) = if let Some(v) = s.strip_suffix("ns") {
        (v, 1i64)
    } else if let Some(v) = s.strip_suffix("us") {
        (v, 1_000)
    } else if let Some(v) = s.strip_suffix("ms") {
        (v, 1_000_000)
    } else if let Some(v) = s.strip_suffix('s') {
        (v, 1_000_000_000)
    } else {
        (s, 1)
    };
    let n: i64 = num
        .trim()
        .parse()
        .map_err(|_| format!("bad duration '{s}': expected an integer with ns/us/ms suffix"))?;
    n.checked_mul(mult)
        .ok_or_else(|| format!("duration '{s}' overflows"))
}

fn render_duration(ns: i64) -> String {
    let abs = ns.unsigned_abs();
    if ns != 0 && abs % 1_000_000 == 0 {
        format!("{}ms", ns / 1_000_000)
    } else if ns != 0 && abs % 1_000 == 0 {
        format!("{}us", ns / 1_000)
    } else {
        format!("{ns}ns")
    }
}

impl Serialize for Dur {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render_duration(self.0 as i64))
    }
}

impl<'de> Deserialize<'de> for Dur {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Dur(v)),
            Raw::Str(s) => {
                let v = parse_duration_str(&s).map_err(DeError::custom)?;
                u64::try_from(v)
                    .map(Dur)
                    .map_err(|_| DeError::custom(format!("duration '{s}' must not be negative")))
            }
        }
    }
}

impl Serialize for SignedDur {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&render_duration(self.0))
    }
}

impl<'de> Deserialize<'de> for SignedDur {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(SignedDur(v)),
            Raw::Str(s) => parse_duration_str(&s).map(SignedDur).map_err(DeError::custom),
        }
    }
}

/// An 8-bit gate vector: either an integer bitmask or a list of open queue
/// indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gates(pub u8);

impl Serialize for Gates {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let open: Vec<u8> = (0..8).filter(|q| self.0 & (1 << q) != 0).collect();
        open.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Gates {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Mask(u8),
            Open(Vec<u8>),
        }
        match Raw::deserialize(d)? {
            Raw::Mask(m) => Ok(Gates(m)),
            Raw::Open(qs) => {
                let mut mask = 0u8;
                for q in qs {
                    if q > 7 {
                        return Err(DeError::custom(format!("queue {q} outside 0..7")));
                    }
                    mask |= 1 << q;
                }
                Ok(Gates(mask))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub name: String,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub node_a: String,
    pub node_b: String,
    /// Bits per second.
    pub rate: u64,
    #[serde(default)]
    pub propagation_delay: Dur,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardingDoc {
    pub bridge: String,
    pub stream: String,
    pub next: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forwarding: Vec<ForwardingDoc>,
}

fn default_fpp() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamDoc {
    pub stream_id: String,
    pub talker: String,
    pub listener: String,
    pub path: Vec<String>,
    pub period: Dur,
    #[serde(default)]
    pub send_offset: Dur,
    pub frame_size: u32,
    pub priority: u8,
    #[serde(default = "default_fpp")]
    pub frames_per_period: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GclEntryDoc {
    pub start: Dur,
    pub end: Dur,
    pub gates: Gates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GclDoc {
    pub cycle_time: Dur,
    #[serde(default)]
    pub base_time: Dur,
    pub entries: Vec<GclEntryDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamFilterDoc {
    /// Stream id, or null/"*" for any.
    #[serde(default)]
    pub match_stream: Option<String>,
    /// Priority 0..7, or null for any.
    #[serde(default)]
    pub match_priority: Option<u8>,
    #[serde(default)]
    pub max_sdu: Option<u32>,
    pub gate_ref: String,
    #[serde(default)]
    pub meter_ref: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamGateEntryDoc {
    pub start: Dur,
    pub end: Dur,
    /// "open" or "closed".
    pub state: String,
    #[serde(default)]
    pub ipv: Option<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamGateDoc {
    pub cycle_time: Dur,
    #[serde(default)]
    pub base_time: Dur,
    pub entries: Vec<StreamGateEntryDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowMeterDoc {
    /// Committed information rate, bits per second.
    pub cir: u64,
    /// Committed burst size, bytes.
    pub cbs: u64,
    /// Excess information rate, bits per second.
    pub eir: u64,
    /// Excess burst size, bytes.
    pub ebs: u64,
    #[serde(default)]
    pub drop_yellow: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PsfpDoc {
    #[serde(default)]
    pub fail_closed: bool,
    pub filters: Vec<StreamFilterDoc>,
    #[serde(default)]
    pub gates: BTreeMap<String, StreamGateDoc>,
    #[serde(default)]
    pub meters: BTreeMap<String, FlowMeterDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultActionDoc {
    DropFrame {
        stream_id: String,
        seq: u32,
    },
    InjectFrame {
        stream_id: String,
        at: Dur,
        size: u32,
        priority: u8,
    },
    ShiftFrame {
        stream_id: String,
        seq: u32,
        shift: SignedDur,
    },
    ShiftStream {
        stream_id: String,
        from_seq: u32,
        shift: SignedDur,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub actions: Vec<FaultActionDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDoc {
    pub sim_end: Dur,
    /// Bytes per egress queue; 0 = unbounded.
    #[serde(default)]
    pub queue_capacity: u64,
    #[serde(default)]
    pub processing_delay: Dur,
    #[serde(default)]
    pub include_l1_overhead: bool,
    #[serde(default)]
    pub allow_nonstandard_frame_sizes: bool,
}

/// The whole configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub topology: TopologyDoc,
    pub streams: Vec<StreamDoc>,
    #[serde(default)]
    pub gcls: BTreeMap<String, GclDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub psfp: BTreeMap<String, PsfpDoc>,
    #[serde(default)]
    pub scenario: ScenarioDoc,
    pub sim: SimDoc,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Semantics(String),
}

fn port_key(raw: &str) -> Result<PortKey, ConfigFileError> {
    let (node, to) = raw.split_once("->").ok_or_else(|| {
        ConfigFileError::Semantics(format!("gcl key '{raw}' is not of the form NODE->NODE"))
    })?;
    Ok(PortKey::new(node.trim(), to.trim()))
}

impl ConfigDoc {
    pub fn from_str(text: &str) -> Result<Self, ConfigFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    /// Lower the document into the simulator's configuration type.
    pub fn to_sim_config(&self) -> Result<model::SimConfig, ConfigFileError> {
        let nodes = self
            .topology
            .nodes
            .iter()
            .map(|n| {
                let kind = match n.kind.as_str() {
                    "end_station" => model::NodeKind::EndStation,
                    "bridge" => model::NodeKind::Bridge,
                    other => {
                        return Err(ConfigFileError::Semantics(format!(
                            "node '{}': unknown kind '{other}' (expected end_station or bridge)",
                            n.name
                        )))
                    }
                };
                Ok(model::NodeDef {
                    name: n.name.clone(),
                    kind,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let links = self
            .topology
            .links
            .iter()
            .map(|l| model::LinkDef {
                node_a: l.node_a.clone(),
                node_b: l.node_b.clone(),
                rate: l.rate,
                propagation_delay: l.propagation_delay.0,
            })
            .collect();
        let forwarding = self
            .topology
            .forwarding
            .iter()
            .map(|f| model::ForwardingEntry {
                bridge: f.bridge.clone(),
                stream: f.stream.clone(),
                next: f.next.clone(),
            })
            .collect();
        let streams = self
            .streams
            .iter()
            .map(|s| model::StreamSpec {
                stream_id: s.stream_id.clone(),
                talker: s.talker.clone(),
                listener: s.listener.clone(),
                path: s.path.clone(),
                period: s.period.0,
                send_offset: s.send_offset.0,
                frame_size: s.frame_size,
                priority: s.priority,
                frames_per_period: s.frames_per_period,
            })
            .collect();

        let mut config = model::SimConfig::new(
            model::Topology {
                nodes,
                links,
                forwarding,
            },
            streams,
            self.sim.sim_end.0,
        );
        config.queue_capacity = self.sim.queue_capacity;
        config.processing_delay = self.sim.processing_delay.0;
        config.include_l1_overhead = self.sim.include_l1_overhead;
        config.allow_nonstandard_frame_sizes = self.sim.allow_nonstandard_frame_sizes;

        for (raw_key, gcl) in &self.gcls {
            let key = port_key(raw_key)?;
            config.gcls.insert(
                key,
                model::GateControlList {
                    cycle_time: gcl.cycle_time.0,
                    base_time: gcl.base_time.0,
                    entries: gcl
                        .entries
                        .iter()
                        .map(|e| model::GclEntry {
                            start: e.start.0,
                            end: e.end.0,
                            gates: model::GateMask(e.gates.0),
                        })
                        .collect(),
                },
            );
        }

        for (bridge, doc) in &self.psfp {
            let mut cfg = psfp::PsfpConfig {
                fail_closed: doc.fail_closed,
                ..Default::default()
            };
            for f in &doc.filters {
                cfg.filters.push(psfp::StreamFilter {
                    match_stream: match f.match_stream.as_deref() {
                        None | Some("*") => psfp::StreamMatch::Any,
                        Some(s) => psfp::StreamMatch::Stream(s.to_string()),
                    },
                    match_priority: match f.match_priority {
                        None => psfp::PriorityMatch::Any,
                        Some(p) => psfp::PriorityMatch::Priority(p),
                    },
                    max_sdu: f.max_sdu,
                    gate_ref: f.gate_ref.clone(),
                    meter_ref: f.meter_ref.clone(),
                });
            }
            for (name, gate) in &doc.gates {
                let entries = gate
                    .entries
                    .iter()
                    .map(|e| {
                        let open = match e.state.as_str() {
                            "open" => true,
                            "closed" => false,
                            other => {
                                return Err(ConfigFileError::Semantics(format!(
                                    "stream gate '{name}': state '{other}' is not open/closed"
                                )))
                            }
                        };
                        Ok(psfp::StreamGateEntry {
                            start: e.start.0,
                            end: e.end.0,
                            open,
                            ipv: e.ipv,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                cfg.gates.insert(
                    name.clone(),
                    psfp::StreamGate {
                        cycle_time: gate.cycle_time.0,
                        base_time: gate.base_time.0,
                        entries,
                    },
                );
            }
            for (name, m) in &doc.meters {
                cfg.meters.insert(
                    name.clone(),
                    psfp::FlowMeterSpec {
                        cir: m.cir,
                        cbs: m.cbs,
                        eir: m.eir,
                        ebs: m.ebs,
                        drop_yellow: m.drop_yellow,
                    },
                );
            }
            config.psfp.insert(bridge.clone(), cfg);
        }

        config.scenario = faults::FaultScenario {
            actions: self
                .scenario
                .actions
                .iter()
                .map(|a| match a {
                    FaultActionDoc::DropFrame { stream_id, seq } => faults::FaultAction::DropFrame {
                        stream: stream_id.clone(),
                        seq: *seq,
                    },
                    FaultActionDoc::InjectFrame {
                        stream_id,
                        at,
                        size,
                        priority,
                    } => faults::FaultAction::InjectFrame {
                        stream: stream_id.clone(),
                        at: at.0,
                        size: *size,
                        priority: *priority,
                    },
                    FaultActionDoc::ShiftFrame {
                        stream_id,
                        seq,
                        shift,
                    } => faults::FaultAction::ShiftFrame {
                        stream: stream_id.clone(),
                        seq: *seq,
                        shift: shift.0,
                    },
                    FaultActionDoc::ShiftStream {
                        stream_id,
                        from_seq,
                        shift,
                    } => faults::FaultAction::ShiftStream {
                        stream: stream_id.clone(),
                        from_seq: *from_seq,
                        shift: shift.0,
                    },
                })
                .collect(),
        };
        Ok(config)
    }

    /// Build a document from a simulator configuration (used to emit the
    /// bundled scenario files).
    pub fn from_sim_config(config: &model::SimConfig, notes: Option<&str>) -> Self {
        ConfigDoc {
            notes: notes.map(|s| s.to_string()),
            topology: TopologyDoc {
                nodes: config
                    .topology
                    .nodes
                    .iter()
                    .map(|n| NodeDoc {
                        name: n.name.clone(),
                        kind: match n.kind {
                            model::NodeKind::EndStation => "end_station".into(),
                            model::NodeKind::Bridge => "bridge".into(),
                        },
                    })
                    .collect(),
                links: config
                    .topology
                    .links
                    .iter()
                    .map(|l| LinkDoc {
                        node_a: l.node_a.clone(),
                        node_b: l.node_b.clone(),
                        rate: l.rate,
                        propagation_delay: Dur(l.propagation_delay),
                    })
                    .collect(),
                forwarding: config
                    .topology
                    .forwarding
                    .iter()
                    .map(|f| ForwardingDoc {
                        bridge: f.bridge.clone(),
                        stream: f.stream.clone(),
                        next: f.next.clone(),
                    })
                    .collect(),
            },
            streams: config
                .streams
                .iter()
                .map(|s| StreamDoc {
                    stream_id: s.stream_id.clone(),
                    talker: s.talker.clone(),
                    listener: s.listener.clone(),
                    path: s.path.clone(),
                    period: Dur(s.period),
                    send_offset: Dur(s.send_offset),
                    frame_size: s.frame_size,
                    priority: s.priority,
                    frames_per_period: s.frames_per_period,
                })
                .collect(),
            gcls: config
                .gcls
                .iter()
                .map(|(key, gcl)| {
                    (
                        key.to_string(),
                        GclDoc {
                            cycle_time: Dur(gcl.cycle_time),
                            base_time: Dur(gcl.base_time),
                            entries: gcl
                                .entries
                                .iter()
                                .map(|e| GclEntryDoc {
                                    start: Dur(e.start),
                                    end: Dur(e.end),
                                    gates: Gates(e.gates.0),
                                })
                                .collect(),
                        },
                    )
                })
                .collect(),
            psfp: config
                .psfp
                .iter()
                .map(|(bridge, cfg)| {
                    (
                        bridge.clone(),
                        PsfpDoc {
                            fail_closed: cfg.fail_closed,
                            filters: cfg
                                .filters
                                .iter()
                                .map(|f| StreamFilterDoc {
                                    match_stream: match &f.match_stream {
                                        psfp::StreamMatch::Any => None,
                                        psfp::StreamMatch::Stream(s) => Some(s.clone()),
                                    },
                                    match_priority: match f.match_priority {
                                        psfp::PriorityMatch::Any => None,
                                        psfp::PriorityMatch::Priority(p) => Some(p),
                                    },
                                    max_sdu: f.max_sdu,
                                    gate_ref: f.gate_ref.clone(),
                                    meter_ref: f.meter_ref.clone(),
                                })
                                .collect(),
                            gates: cfg
                                .gates
                                .iter()
                                .map(|(name, g)| {
                                    (
                                        name.clone(),
                                        StreamGateDoc {
                                            cycle_time: Dur(g.cycle_time),
                                            base_time: Dur(g.base_time),
                                            entries: g
                                                .entries
                                                .iter()
                                                .map(|e| StreamGateEntryDoc {
                                                    start: Dur(e.start),
                                                    end: Dur(e.end),
                                                    state: if e.open {
                                                        "open".into()
                                                    } else {
                                                        "closed".into()
                                                    },
                                                    ipv: e.ipv,
                                                })
                                                .collect(),
                                        },
                                    )
                                })
                                .collect(),
                            meters: cfg
                                .meters
                                .iter()
                                .map(|(name, m)| {
                                    (
                                        name.clone(),
                                        FlowMeterDoc {
                                            cir: m.cir,
                                            cbs: m.cbs,
                                            eir: m.eir,
                                            ebs: m.ebs,
                                            drop_yellow: m.drop_yellow,
                                        },
                                    )
                                })
                                .collect(),
                        },
                    )
                })
                .collect(),
            scenario: ScenarioDoc {
                actions: config
                    .scenario
                    .actions
                    .iter()
                    .map(|a| match a {
                        faults::FaultAction::DropFrame { stream, seq } => {
                            FaultActionDoc::DropFrame {
                                stream_id: stream.clone(),
                                seq: *seq,
                            }
                        }
                        faults::FaultAction::InjectFrame {
                            stream,
                            at,
                            size,
                            priority,
                        } => FaultActionDoc::InjectFrame {
                            stream_id: stream.clone(),
                            at: Dur(*at),
                            size: *size,
                            priority: *priority,
                        },
                        faults::FaultAction::ShiftFrame { stream, seq, shift } => {
                            FaultActionDoc::ShiftFrame {
                                stream_id: stream.clone(),
                                seq: *seq,
                                shift: SignedDur(*shift),
                            }
                        }
                        faults::FaultAction::ShiftStream {
                            stream,
                            from_seq,
                            shift,
                        } => FaultActionDoc::ShiftStream {
                            stream_id: stream.clone(),
                            from_seq: *from_seq,
                            shift: SignedDur(*shift),
                        },
                    })
                    .collect(),
            },
            sim: SimDoc {
                sim_end: Dur(config.sim_end),
                queue_capacity: config.queue_capacity,
                processing_delay: Dur(config.processing_delay),
                include_l1_overhead: config.include_l1_overhead,
                allow_nonstandard_frame_sizes: config.allow_nonstandard_frame_sizes,
            },
        }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("config serializes");
        out.push('\n');
        out
    }
}
