use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{Activation, DefKind, EventKind, Model, Sync, Term, INIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ViolationKind {
    MalformedSystem,
    UnknownDefinition,
    DuplicateDefinition,
    NonFlatRecursion,
    DuplicateEvent,
    InitCount,
    SubcomponentRepeated,
    UnsyncedSharedEvent,
    ControllerActivity,
    ControllerInit,
    ControllerEventNotInSystem,
    SystemEventNotInController,
    UndeclaredEvent,
    MissingEventCondition,
    ActivationKind,
    InitActivation,
    UndeclaredVariable,
    UnknownInfluence,
    UnknownInfluenceType,
    NameOverlap,
    DuplicateResetVariable,
    NonConstantStrength,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Violated well-definedness clauses, sorted; empty means well defined.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

struct Checker<'m> {
    model: &'m Model,
    out: BTreeSet<Violation>,
}

impl Checker<'_> {
    fn push(&mut self, kind: ViolationKind, message: String) {
        self.out.insert(Violation { kind, message });
    }
}

/// Checks every clause of well-definedness and reports each violation.
pub fn validate_well_defined(model: &Model) -> ValidationReport {
    let mut c = Checker {
        model,
        out: BTreeSet::new(),
    };
    check_names(&mut c);
    for d in model.definitions_of(DefKind::Subcomponent) {
        check_subcomponent(&mut c, &d.name);
    }
    for d in model.definitions_of(DefKind::Controller) {
        check_controller_def(&mut c, &d.name);
    }
    check_system(&mut c);
    check_event_conditions(&mut c);
    ValidationReport {
        violations: c.out.into_iter().collect(),
    }
}

fn check_names(c: &mut Checker) {
    let m = c.model;
    let mut seen = BTreeSet::new();
    for d in &m.definitions {
        if !seen.insert(d.name.as_str()) {
            c.push(
                ViolationKind::DuplicateDefinition,
                format!("definition `{}` appears more than once", d.name),
            );
        }
    }
    let events = m.all_events();
    let influences: BTreeSet<String> = m.influences().into_iter().chain(m.iv.keys().cloned()).collect();
    let itypes: BTreeSet<String> = m.itypes.keys().cloned().collect();
    let groups = [("event", &events), ("influence", &influences), ("influence type", &itypes)];
    for (i, (na, a)) in groups.iter().enumerate() {
        for (nb, b) in groups.iter().skip(i + 1) {
            for x in a.intersection(b) {
                c.push(
                    ViolationKind::NameOverlap,
                    format!("`{x}` is used both as {na} and {nb}"),
                );
            }
        }
    }
    let vars: BTreeSet<&str> = m.variables.iter().map(String::as_str).collect();
    for (infl, var) in &m.iv {
        if !vars.contains(var.as_str()) {
            c.push(
                ViolationKind::UndeclaredVariable,
                format!("iv({infl}) = `{var}` is not a declared variable"),
            );
        }
    }
    for (name, def) in &m.itypes {
        for v in def.body.free_vars() {
            if !def.params.contains(&v) && !m.params.contains_key(&v) {
                c.push(
                    ViolationKind::UndeclaredVariable,
                    format!("influence type `{name}` uses `{v}` which is not a parameter"),
                );
            }
        }
    }
}

fn check_subcomponent(c: &mut Checker, name: &str) {
    let m = c.model;
    let def = m.definition(name).expect("definition exists");
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for s in def.body.summands() {
        let Term::Prefix {
            event,
            activity,
            next,
        } = s
        else {
            c.push(
                ViolationKind::NonFlatRecursion,
                format!("subcomponent `{name}` has a summand that is not a prefix: `{s}`"),
            );
            continue;
        };
        match &**next {
            Term::Const { name: n, args } if n == name && *args == def.params => {}
            other => c.push(
                ViolationKind::NonFlatRecursion,
                format!("subcomponent `{name}` prefix `{event}` continues with `{other}` instead of itself"),
            ),
        }
        match activity {
            None => c.push(
                ViolationKind::NonFlatRecursion,
                format!("subcomponent `{name}` prefix `{event}` has no activity"),
            ),
            Some(a) => {
                if !m.iv.contains_key(&a.influence) {
                    c.push(
                        ViolationKind::UnknownInfluence,
                        format!("influence `{}` has no iv entry", a.influence),
                    );
                }
                match m.itypes.get(&a.itype.name) {
                    None => c.push(
                        ViolationKind::UnknownInfluenceType,
                        format!("influence type `{}` is not defined", a.itype.name),
                    ),
                    Some(t) if t.params.len() != a.itype.args.len() => c.push(
                        ViolationKind::UnknownInfluenceType,
                        format!("influence type `{}` applied to wrong number of arguments", a.itype),
                    ),
                    _ => {}
                }
                for v in &a.itype.args {
                    if !m.variables.contains(v) {
                        c.push(
                            ViolationKind::UndeclaredVariable,
                            format!("influence type argument `{v}` is not a declared variable"),
                        );
                    }
                }
                for v in a.strength.free_vars() {
                    if !m.params.contains_key(&v) {
                        c.push(
                            ViolationKind::NonConstantStrength,
                            format!("strength of `{}` in `{name}` uses non-parameter `{v}`", a.influence),
                        );
                    }
                }
            }
        }
        if event != INIT && m.event_kind(event).is_none() {
            c.push(ViolationKind::UndeclaredEvent, format!("event `{event}` is not declared"));
        }
        *seen.entry(event.as_str()).or_insert(0) += 1;
    }
    for (event, n) in seen.iter() {
        if *event == INIT {
            continue;
        }
        if *n > 1 && m.event_kind(event) != Some(EventKind::Stochastic) {
            c.push(
                ViolationKind::DuplicateEvent,
                format!("duplicate event in subcomponent: `{event}` occurs {n} times in `{name}`"),
            );
        }
    }
    let inits = seen.get(INIT).copied().unwrap_or(0);
    if inits != 1 {
        c.push(
            ViolationKind::InitCount,
            format!("subcomponent `{name}` has {inits} init prefixes instead of one"),
        );
    }
}

fn check_controller_def(c: &mut Checker, name: &str) {
    let m = c.model;
    let def = m.definition(name).expect("definition exists");
    let mut found = Vec::new();
    def.body.visit(&mut |t| match t {
        Term::Prefix {
            event, activity, ..
        } => {
            if activity.is_some() {
                found.push((ViolationKind::ControllerActivity, format!("controller `{name}` prefix `{event}` carries an activity")));
            }
            if event == INIT {
                found.push((ViolationKind::ControllerInit, format!("controller `{name}` uses init")));
            } else if m.event_kind(event).is_none() {
                found.push((ViolationKind::UndeclaredEvent, format!("event `{event}` is not declared")));
            }
        }
        Term::Const { name: n, .. } => match m.definition(n) {
            Some(d) if d.kind == DefKind::Controller => {}
            Some(_) => found.push((ViolationKind::MalformedSystem, format!("controller `{name}` refers to non-controller `{n}`"))),
            None => found.push((ViolationKind::UnknownDefinition, format!("`{n}` is not defined"))),
        },
        _ => {}
    });
    for (k, msg) in found {
        c.push(k, msg);
    }
}

/// Events of a term, following constant references.
pub(crate) fn term_events(m: &Model, t: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut visited = BTreeSet::new();
    let mut stack = vec![t.clone()];
    while let Some(t) = stack.pop() {
        t.visit(&mut |s| match s {
            Term::Prefix { event, .. } => {
                out.insert(event.clone());
            }
            Term::Const { name, .. } if visited.insert(name.clone()) => {
                if let Some(d) = m.definition(name) {
                    stack.push(d.body.clone());
                }
            }
            _ => {}
        });
    }
    out
}

fn check_sigma(c: &mut Checker, t: &Term, used: &mut BTreeMap<String, usize>) -> BTreeSet<String> {
    let m = c.model;
    match t {
        Term::Const { name, args } => match m.definition(name) {
            Some(d) if d.kind == DefKind::Subcomponent => {
                if d.params.len() != args.len() {
                    c.push(
                        ViolationKind::MalformedSystem,
                        format!("`{name}` used with {} arguments, defined with {}", args.len(), d.params.len()),
                    );
                }
                *used.entry(name.clone()).or_insert(0) += 1;
                term_events(m, &d.body)
            }
            Some(d) if d.kind == DefKind::System => check_sigma(c, &d.body.clone(), used),
            Some(_) => {
                c.push(
                    ViolationKind::MalformedSystem,
                    format!("uncontrolled system refers to controller `{name}`"),
                );
                BTreeSet::new()
            }
            None => {
                c.push(ViolationKind::UnknownDefinition, format!("`{name}` is not defined"));
                BTreeSet::new()
            }
        },
        Term::Coop(a, sync, b) => {
            let ea = check_sigma(c, a, used);
            let eb = check_sigma(c, b, used);
            if let Sync::Set(l) = sync {
                for e in ea.intersection(&eb) {
                    if !l.contains(e) {
                        c.push(
                            ViolationKind::UnsyncedSharedEvent,
                            format!("shared event `{e}` is not synchronised in `{t}`"),
                        );
                    }
                }
            }
            ea.union(&eb).cloned().collect()
        }
        other => {
            c.push(
                ViolationKind::MalformedSystem,
                format!("uncontrolled system may only cooperate subcomponents, found `{other}`"),
            );
            BTreeSet::new()
        }
    }
}

fn check_system(c: &mut Checker) {
    let m = c.model;
    let (sigma, sync, con) = match m.split_system() {
        Ok(x) => x,
        Err(e) => {
            c.push(ViolationKind::MalformedSystem, e.to_string());
            return;
        }
    };
    let mut used = BTreeMap::new();
    let sys_events = check_sigma(c, sigma, &mut used);
    for (name, n) in used {
        if n > 1 {
            c.push(
                ViolationKind::SubcomponentRepeated,
                format!("subcomponent `{name}` appears {n} times in the uncontrolled system"),
            );
        }
    }
    con.visit(&mut |t| {
        if let Term::Prefix { activity: Some(_), event, .. } = t {
            let msg = format!("controller prefix `{event}` carries an activity");
            c.out.insert(Violation {
                kind: ViolationKind::ControllerActivity,
                message: msg,
            });
        }
    });
    for (n, _) in con.constants() {
        match m.definition(&n) {
            Some(d) if d.kind == DefKind::Controller => {}
            Some(_) => c.push(ViolationKind::MalformedSystem, format!("controller refers to non-controller `{n}`")),
            None => c.push(ViolationKind::UnknownDefinition, format!("`{n}` is not defined")),
        }
    }
    let con_events = term_events(m, con);
    for e in con_events.difference(&sys_events) {
        c.push(
            ViolationKind::ControllerEventNotInSystem,
            format!("controller event not in uncontrolled system: `{e}`"),
        );
    }
    for e in sys_events.difference(&con_events) {
        if e != INIT {
            c.push(
                ViolationKind::SystemEventNotInController,
                format!("uncontrolled system event not in controller: `{e}`"),
            );
        }
    }
    if let Sync::Set(l) = sync {
        let needed: BTreeSet<String> = sys_events.union(&con_events).cloned().collect();
        for e in needed.difference(l) {
            c.push(
                ViolationKind::UnsyncedSharedEvent,
                format!("event `{e}` is not synchronised between system and controller"),
            );
        }
    }
    for e in m.events.keys() {
        if !sys_events.contains(e) {
            c.push(
                ViolationKind::SystemEventNotInController,
                format!("declared event `{e}` does not occur in the uncontrolled system"),
            );
        }
    }
}

fn check_event_conditions(c: &mut Checker) {
    let m = c.model;
    let vars: BTreeSet<&str> = m.variables.iter().map(String::as_str).collect();
    let known = |v: &str| vars.contains(v) || m.params.contains_key(v);
    for e in m.all_events() {
        let Some(ec) = m.ec.get(&e) else {
            c.push(
                ViolationKind::MissingEventCondition,
                format!("event `{e}` has no event condition"),
            );
            continue;
        };
        let kind = m.event_kind(&e).expect("declared");
        let ok = matches!(
            (&ec.activation, kind),
            (Activation::Guard(_), EventKind::Instantaneous)
                | (Activation::Rate(_) | Activation::Duration(_), EventKind::Stochastic)
        );
        if !ok {
            c.push(
                ViolationKind::ActivationKind,
                format!("activation of `{e}` does not match its declared kind"),
            );
        }
        if e == INIT && ec.activation != Activation::Guard(super::Guard::True) {
            c.push(ViolationKind::InitActivation, "init must have activation `true`".into());
        }
        let mut assigned = BTreeSet::new();
        for a in &ec.reset.atoms {
            if !assigned.insert(a.var.as_str()) {
                c.push(
                    ViolationKind::DuplicateResetVariable,
                    format!("reset of `{e}` assigns `{}` twice", a.var),
                );
            }
            if !vars.contains(a.var.as_str()) {
                c.push(
                    ViolationKind::UndeclaredVariable,
                    format!("reset of `{e}` assigns undeclared `{}`", a.var),
                );
            }
        }
        let mut free = BTreeSet::new();
        match &ec.activation {
            Activation::Guard(g) => free.extend(g.free_vars()),
            Activation::Rate(x) | Activation::Duration(x) => free.extend(x.free_vars()),
        }
        for a in &ec.reset.atoms {
            free.extend(a.value.free_vars());
        }
        for v in free {
            if !known(&v) {
                c.push(
                    ViolationKind::UndeclaredVariable,
                    format!("event condition of `{e}` uses undeclared `{v}`"),
                );
            }
        }
    }
    for e in m.ec.keys() {
        if m.event_kind(e).is_none() {
            c.push(
                ViolationKind::UndeclaredEvent,
                format!("event condition given for undeclared `{e}`"),
            );
        }
    }
}
