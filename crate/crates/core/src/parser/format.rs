use std::fmt::Write;

use crate::ast::{DefKind, EventKind, Model};

/// Canonical text of a model; parsing the result yields an equal model.
pub fn format_model(model: &Model) -> String {
    let mut out = String::new();
    if !model.params.is_empty() {
        out.push_str("params\n");
        for (k, v) in &model.params {
            let _ = writeln!(out, "  {k} = {v};");
        }
        out.push('\n');
    }
    if !model.variables.is_empty() {
        let _ = writeln!(out, "variables {};\n", model.variables.join(", "));
    }
    if !model.events.is_empty() {
        let list: Vec<String> = model
            .events
            .iter()
            .map(|(e, k)| match k {
                EventKind::Stochastic => format!("stoch {e}"),
                EventKind::Instantaneous => e.clone(),
            })
            .collect();
        let _ = writeln!(out, "events {};\n", list.join(", "));
    }
    let mut kinds: Vec<DefKind> = Vec::new();
    for d in &model.definitions {
        if kinds.last() != Some(&d.kind) {
            kinds.push(d.kind);
        }
    }
    for kind in kinds {
        let head = match kind {
            DefKind::Subcomponent => "subcomponent",
            DefKind::Controller => "controller",
            DefKind::System => "system",
        };
        out.push_str(head);
        out.push('\n');
        for d in model.definitions_of(kind) {
            out.push_str("  ");
            out.push_str(&d.name);
            if !d.params.is_empty() {
                let _ = write!(out, "({})", d.params.join(", "));
            }
            let _ = writeln!(out, " =def {};", d.body);
        }
        out.push('\n');
    }
    if !model.iv.is_empty() {
        out.push_str("iv\n");
        for (i, v) in &model.iv {
            let _ = writeln!(out, "  {i} = {v};");
        }
        out.push('\n');
    }
    if !model.ec.is_empty() {
        out.push_str("ec\n");
        for (e, c) in &model.ec {
            let _ = writeln!(out, "  {e} = {c};");
        }
        out.push('\n');
    }
    if !model.itypes.is_empty() {
        out.push_str("types\n");
        for (n, d) in &model.itypes {
            out.push_str("  ");
            out.push_str(n);
            if !d.params.is_empty() {
                let _ = write!(out, "({})", d.params.join(", "));
            }
            let _ = writeln!(out, " = {};", d.body);
        }
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}
