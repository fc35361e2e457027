//! JSON-lines trace export and cascade summaries.

use std::io::Write;

use serde_json::{json, Value};

use super::{BifurcationEvent, CascadeRecord, ComponentTrace};

fn event_json(e: &BifurcationEvent) -> Value {
    let mut v = json!({
        "type": "event",
        "kind": e.kind.as_str(),
        "lambda": e.lambda,
        "period": e.period,
        "position": e.position,
        "incoming_index": e.incoming_index,
        "outgoing_index": e.outgoing_index,
        "incoming_period": e.incoming_period,
        "outgoing_period": e.outgoing_period,
        "eigenvalue_defect": e.eigenvalue_defect(),
        "orbit": e.orbit.to_json(),
    });
    if let Some(d) = e.doubling {
        v["phi_a"] = json!(d.phi_a);
        v["phi_b"] = json!(d.phi_b);
        v["phi_c"] = json!(d.phi_c);
    }
    v
}

/// Header, then one line per snapshot and event in trace order.
pub fn trace_lines(trace: &ComponentTrace) -> Vec<Value> {
    let mut out = vec![json!({
        "type": "header",
        "map": trace.map.name,
        "component_id": trace.component_id(),
        "domain": [trace.domain.0, trace.domain.1],
        "start_termination": trace.start_termination.as_str(),
        "termination": trace.termination.as_str(),
        "snapshots": trace.snapshots.len(),
        "events": trace.events.len(),
    })];
    let mut events = trace.events.iter().peekable();
    for (i, o) in trace.snapshots.iter().enumerate() {
        let mut v = o.to_json();
        v["type"] = json!("orbit");
        v["arclength"] = json!(trace.arclength[i]);
        v["dlambda_ds"] = json!(trace.dlambda_ds[i]);
        out.push(v);
        while let Some(e) = events.next_if(|e| e.position == i) {
            out.push(event_json(e));
        }
    }
    out.extend(events.map(event_json));
    out
}

pub fn write_trace<W: Write>(trace: &ComponentTrace, mut w: W) -> std::io::Result<()> {
    for line in trace_lines(trace) {
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn cascades_json(records: &[CascadeRecord]) -> Value {
    Value::Array(records.iter().map(CascadeRecord::to_json).collect())
}
