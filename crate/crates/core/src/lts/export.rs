use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::{InfluenceValue, Lts, Transition};

#[derive(Serialize)]
struct ConfigOut<'a> {
    id: usize,
    term: String,
    state: BTreeMap<&'a str, StateEntry>,
}

#[derive(Serialize)]
struct StateEntry {
    strength: f64,
    itype: String,
}

#[derive(Serialize)]
struct LtsOut<'a> {
    initial: usize,
    configurations: Vec<ConfigOut<'a>>,
    transitions: &'a [Transition],
}

fn entry(v: &InfluenceValue) -> StateEntry {
    StateEntry {
        strength: v.strength,
        itype: v.itype.to_string(),
    }
}

pub fn lts_to_json(lts: &Lts) -> serde_json::Value {
    let configurations = (0..lts.configs.len())
        .map(|c| ConfigOut {
            id: c,
            term: lts.term(c).to_string(),
            state: lts.state(c).iter().map(|(k, v)| (k.as_str(), entry(v))).collect(),
        })
        .collect();
    serde_json::to_value(LtsOut {
        initial: lts.initial,
        configurations,
        transitions: &lts.transitions,
    })
    .expect("plain data serializes")
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn lts_to_dot(lts: &Lts) -> String {
    let mut out = String::from("digraph lts {\n  node [shape=box];\n");
    for c in 0..lts.configs.len() {
        let state: Vec<String> = lts
            .state(c)
            .iter()
            .map(|(k, v)| escape(&format!("{k} -> {v}")))
            .collect();
        let style = if c == lts.initial { ", penwidth=2" } else { "" };
        let _ = writeln!(
            out,
            "  c{c} [label=\"{}\\n{}\"{style}];",
            escape(&lts.term(c).to_string()),
            state.join("\\n")
        );
    }
    for t in &lts.transitions {
        let label = if t.multiplicity == 1 {
            t.event.clone()
        } else {
            format!("{} x{}", t.event, t.multiplicity)
        };
        let _ = writeln!(out, "  c{} -> c{} [label=\"{}\"];", t.src, t.tgt, escape(&label));
    }
    out.push_str("}\n");
    out
}
