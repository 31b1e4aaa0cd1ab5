//! Static SVG charts in the visualization style used throughout this
//! project: stacked per-stream queue occupancy over time with a red/green
//! gate band on the x-axis and vertical period markers, plus per-stream
//! latency curves. Output is self-contained and deterministic.

use std::fmt::Write as _;

use tassim_core::model::{NodeId, TimeNs};
use tassim_core::trace::{FrameEventKind, TraceLog};

/// Colors assigned to streams in stream-id order.
const PALETTE: [&str; 8] = [
    "#cc00cc", "#2255dd", "#ff8800", "#119944", "#884499", "#cc3333", "#3399aa", "#999933",
];

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 380.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 70.0;
const BAND_H: f64 = 10.0;

fn plot_w() -> f64 {
    WIDTH - MARGIN_L - MARGIN_R
}

fn plot_h() -> f64 {
    HEIGHT - MARGIN_T - MARGIN_B
}

/// Piecewise-linear occupancy of one stream's bytes within one queue:
/// step up at enqueue, ramp down over its transmissions.
fn stream_occupancy(
    log: &TraceLog,
    node: NodeId,
    to: NodeId,
    queue: u8,
    stream: u32,
    until: TimeNs,
) -> Vec<(TimeNs, f64)> {
    let events: Vec<_> = log
        .frame_events
        .iter()
        .filter(|e| {
            e.node == node
                && e.port_to == Some(to)
                && e.queue == Some(queue)
                && e.stream.0 == stream
                && e.time <= until
        })
        .collect();
    let mut tx_ends = std::collections::BTreeMap::new();
    for e in &events {
        if e.kind == FrameEventKind::TxEnd {
            tx_ends.insert(e.seq, e.time);
        }
    }

    let mut samples: Vec<(TimeNs, f64)> = vec![(0, 0.0)];
    let mut level = 0.0f64;
    let mut ramp_rate = 0.0f64; // bytes per ns while transmitting
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
                if let Some(end) = tx_ends.get(&e.seq) {
                    ramp_rate = e.size as f64 / (end - e.time) as f64;
                }
            }
            FrameEventKind::TxEnd => {
                ramp_rate = 0.0;
                level = (level + 0.5).floor().max(0.0);
                if let Some(last) = samples.last_mut() {
                    if last.0 == e.time {
                        last.1 = level;
                    }
                }
            }
            _ => {}
        }
    }
    samples.push((until, (level - ramp_rate * (until - last_t) as f64).max(0.0)));
    samples
}

fn value_at(series: &[(TimeNs, f64)], t: TimeNs) -> f64 {
    // Series may contain duplicate times (steps); take the latest at t.
    let mut prev: Option<(TimeNs, f64)> = None;
    for &(st, sv) in series {
        if st > t {
            if let Some((pt, pv)) = prev {
                if st == pt {
                    return pv;
                }
                let frac = (t - pt) as f64 / (st - pt) as f64;
                return pv + (sv - pv) * frac;
            }
            return 0.0;
        }
        prev = Some((st, sv));
    }
    prev.map(|(_, v)| v).unwrap_or(0.0)
}

/// Gate open intervals of (node->to, queue) up to `until`, reconstructed
/// from the gate event log.
fn gate_intervals(
    log: &TraceLog,
    node: NodeId,
    to: NodeId,
    queue: u8,
    until: TimeNs,
) -> Vec<(TimeNs, TimeNs, bool)> {
    let mut out = Vec::new();
    let mut state = false;
    let mut since: TimeNs = 0;
    let mut any = false;
    for e in log
        .gate_events
        .iter()
        .filter(|e| e.node == node && e.port_to == to && e.queue == queue && e.time <= until)
    {
        if e.time == 0 {
            state = e.open;
            any = true;
            continue;
        }
        out.push((since, e.time, state));
        state = e.open;
        since = e.time;
        any = true;
    }
    if !any {
        // No schedule on this port: always open.
        state = true;
    }
    out.push((since, until, state));
    out
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        WIDTH / 2.0
    )
}

/// Stacked occupancy chart of one egress queue.
pub fn occupancy_chart(
    log: &TraceLog,
    node: &str,
    to: &str,
    queue: u8,
    period_ns: TimeNs,
    until: TimeNs,
) -> Result<String, String> {
    let n = log.node_id(node).ok_or_else(|| format!("unknown node {node}"))?;
    let t = log.node_id(to).ok_or_else(|| format!("unknown node {to}"))?;

    // Streams with any traffic on this queue, in id order.
    let mut streams: Vec<u32> = Vec::new();
    for e in &log.frame_events {
        if e.node == n && e.port_to == Some(t) && e.queue == Some(queue) {
            if !streams.contains(&e.stream.0) {
                streams.push(e.stream.0);
            }
        }
    }
    streams.sort();

    let series: Vec<Vec<(TimeNs, f64)>> = streams
        .iter()
        .map(|s| stream_occupancy(log, n, t, queue, *s, until))
        .collect();

    // Sample every series at the union of breakpoints.
    let mut times: Vec<TimeNs> = series.iter().flatten().map(|(t, _)| *t).collect();
    times.push(0);
    times.push(until);
    times.sort();
    times.dedup();

    let mut stacked: Vec<Vec<f64>> = Vec::new(); // cumulative upper bounds
    let mut acc = vec![0.0; times.len()];
    for s in &series {
        for (i, t) in times.iter().enumerate() {
            acc[i] += value_at(s, *t);
        }
        stacked.push(acc.clone());
    }
    let max_y = acc.iter().cloned().fold(1.0f64, f64::max);

    let x = |time: TimeNs| MARGIN_L + (time as f64 / until as f64) * plot_w();
    let y = |bytes: f64| MARGIN_T + plot_h() - (bytes / max_y) * plot_h();

    let mut out = svg_header(&format!("queue occupancy {node}->{to} q{queue}"));

    // Period markers.
    if period_ns > 0 {
        let mut m = period_ns;
        while m < until {
            let _ = writeln!(
                out,
                "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"#bbbbbb\" stroke-width=\"0.5\"/>",
                x(m),
                MARGIN_T,
                MARGIN_T + plot_h()
            );
            m += period_ns;
        }
    }

    // Stacked areas, bottom to top.
    for (idx, upper) in stacked.iter().enumerate() {
        let lower: Vec<f64> = if idx == 0 {
            vec![0.0; times.len()]
        } else {
            stacked[idx - 1].clone()
        };
        let mut d = String::new();
        for (i, tm) in times.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, x(*tm), y(upper[i]));
        }
        for (i, tm) in times.iter().enumerate().rev() {
            let _ = write!(d, "L{:.2},{:.2} ", x(*tm), y(lower[i]));
        }
        d.push('Z');
        let color = PALETTE[streams[idx] as usize % PALETTE.len()];
        let _ = writeln!(
            out,
            "<path d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.75\" stroke=\"none\"/>"
        );
    }

    // Gate band along the x axis: green open, red closed.
    let band_y = MARGIN_T + plot_h() + 6.0;
    for (from, to_t, open) in gate_intervals(log, n, t, queue, until) {
        let color = if open { "#2a2" } else { "#c33" };
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{band_y:.2}\" width=\"{:.2}\" height=\"{BAND_H}\" fill=\"{color}\"/>",
            x(from),
            (x(to_t) - x(from)).max(0.0)
        );
    }

    axes_and_legend(
        &mut out,
        until,
        max_y,
        "bytes",
        &streams
            .iter()
            .map(|s| (log.stream_names[*s as usize].as_str(), PALETTE[*s as usize % PALETTE.len()]))
            .collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Latency-over-time chart of the given streams (all streams when empty).
pub fn latency_chart(log: &TraceLog, streams: &[String]) -> Result<String, String> {
    let names: Vec<String> = if streams.is_empty() {
        log.stream_names.clone()
    } else {
        streams.to_vec()
    };
    let mut curves: Vec<(String, Vec<(TimeNs, u64)>)> = Vec::new();
    let mut max_t = 1u64;
    let mut max_l = 1u64;
    for name in &names {
        let recs = tassim_core::trace::latency_series(log, name).map_err(|e| e.to_string())?;
        let pts: Vec<(TimeNs, u64)> = recs
            .iter()
            .filter_map(|r| r.latency_ns().map(|l| (r.emit_ns, l)))
            .collect();
        for (t, l) in &pts {
            max_t = max_t.max(*t);
            max_l = max_l.max(*l);
        }
        curves.push((name.clone(), pts));
    }

    let x = |time: TimeNs| MARGIN_L + (time as f64 / max_t as f64) * plot_w();
    let y = |lat: u64| MARGIN_T + plot_h() - (lat as f64 / max_l as f64) * plot_h();

    let mut out = svg_header("end-to-end latency");
    let mut legend = Vec::new();
    for (idx, (name, pts)) in curves.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        legend.push((name.as_str(), color));
        let mut d = String::new();
        for (i, (tm, l)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, x(*tm), y(*l));
        }
        let _ = writeln!(
            out,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>"
        );
    }
    axes_and_legend(&mut out, max_t, max_l as f64, "latency ns", &legend);
    out.push_str("</svg>\n");
    Ok(out)
}

fn axes_and_legend(
    out: &mut String,
    max_t: TimeNs,
    max_y: f64,
    y_label: &str,
    legend: &[(&str, &str)],
) {
    let x0 = MARGIN_L;
    let y0 = MARGIN_T + plot_h();
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{:.2}\" y2=\"{y0}\" stroke=\"black\"/>",
        MARGIN_L + plot_w()
    );
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{MARGIN_T}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>"
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let tx = MARGIN_L + frac * plot_w();
        let tv = (max_t as f64 * frac / 1000.0) as u64;
        let _ = writeln!(
            out,
            "<text x=\"{tx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{tv} us</text>",
            y0 + BAND_H + 24.0
        );
        let ty = MARGIN_T + plot_h() * (1.0 - frac);
        let yv = (max_y * frac) as u64;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{ty:.2}\" text-anchor=\"end\">{yv}</text>",
            MARGIN_L - 6.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.2}\" transform=\"rotate(-90 14 {0:.2})\" text-anchor=\"middle\">{y_label}</text>",
        MARGIN_T + plot_h() / 2.0
    );
    let mut lx = MARGIN_L;
    for (name, color) in legend {
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\">{name}</text>",
            HEIGHT - 22.0,
            lx + 14.0,
            HEIGHT - 12.0
        );
        lx += 14.0 + 9.0 * name.len() as f64 + 18.0;
    }
}
