use std::fmt::Write;

use serde_json::{json, Value};

use super::Tdsha;

pub fn tdsha_to_json(t: &Tdsha) -> Value {
    let modes: Vec<Value> = t
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| json!({ "id": i, "label": m.label }))
        .collect();
    let continuous: Vec<Value> = t
        .continuous
        .iter()
        .map(|c| {
            let stoich: serde_json::Map<String, Value> =
                c.stoich.iter().map(|(v, k)| (v.clone(), json!(k))).collect();
            json!({ "mode": c.mode, "stoich": stoich, "rate": c.rate.to_string() })
        })
        .collect();
    let instantaneous: Vec<Value> = t
        .instantaneous
        .iter()
        .map(|d| {
            json!({
                "src": d.src,
                "tgt": d.tgt,
                "event": d.event,
                "guard": d.guard.to_string(),
                "reset": d.reset.to_string(),
                "weight": d.weight,
            })
        })
        .collect();
    let stochastic: Vec<Value> = t
        .stochastic
        .iter()
        .map(|s| {
            json!({
                "src": s.src,
                "tgt": s.tgt,
                "event": s.event,
                "guard": s.guard.to_string(),
                "reset": s.reset.to_string(),
                "rate": s.rate.to_string(),
            })
        })
        .collect();
    json!({
        "variables": t.variables,
        "modes": modes,
        "continuous": continuous,
        "instantaneous": instantaneous,
        "stochastic": stochastic,
        "init": { "mode": t.init_mode, "reset": t.init_reset.to_string() },
    })
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering; stochastic edges are dashed.
pub fn tdsha_to_dot(t: &Tdsha) -> String {
    let mut flows = vec![Vec::new(); t.modes.len()];
    for c in &t.continuous {
        let st: Vec<String> = c.stoich.iter().map(|(v, k)| format!("{k}*{v}")).collect();
        flows[c.mode].push(escape(&format!("[{}] {}", st.join(", "), c.rate)));
    }
    let mut out = String::from("digraph tdsha {\n  node [shape=box];\n");
    for (i, m) in t.modes.iter().enumerate() {
        let style = if i == t.init_mode { ", penwidth=2" } else { "" };
        let mut label = escape(&m.label);
        for f in &flows[i] {
            label.push_str("\\n");
            label.push_str(f);
        }
        let _ = writeln!(out, "  q{i} [label=\"{label}\"{style}];");
    }
    for d in &t.instantaneous {
        let label = format!("{} [{}] {} w={}", d.event, d.guard, d.reset, d.weight);
        let _ = writeln!(out, "  q{} -> q{} [label=\"{}\"];", d.src, d.tgt, escape(&label));
    }
    for s in &t.stochastic {
        let label = format!("{} [{}] {} r={}", s.event, s.guard, s.reset, s.rate);
        let _ = writeln!(
            out,
            "  q{} -> q{} [label=\"{}\", style=dashed];",
            s.src,
            s.tgt,
            escape(&label)
        );
    }
    out.push_str("}\n");
    out
}
