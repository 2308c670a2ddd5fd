use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::interval::{guard_box, guard_range, support};
use super::EquivError;
use crate::ast::expand::expand_general_durations;
use crate::ast::{Activation, Expr, Model, INIT};
use crate::lts::{build_lts, prepare, successors, Lts, OperationalState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    WellBehaved { reason: String },
    /// Cycles of instantaneous events that could not be ruled out.
    Unknown { cycles: Vec<Vec<String>> },
}

impl Verdict {
    pub fn is_well_behaved(&self) -> bool {
        matches!(self, Verdict::WellBehaved { .. })
    }
}

/// Instantaneous activation graph: `a -> b` when `b` may fire in the same
/// instant right after `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IGraph {
    pub events: Vec<String>,
    pub edges: BTreeSet<(String, String)>,
}

const MAX_CYCLES: usize = 32;
const SEARCH_BUDGET: usize = 100_000;

fn instantaneous(model: &Model) -> Vec<String> {
    model
        .ec
        .iter()
        .filter(|(e, ec)| e.as_str() != INIT && matches!(ec.activation, Activation::Guard(_)))
        .map(|(e, _)| e.clone())
        .collect()
}

/// Whether, right after `a` fires, the guard of `b` can hold. `model` must
/// have its parameters substituted. Non-guard activations are conservatively
/// treated as enabled.
pub fn may_follow(model: &Model, a: &str, b: &str) -> bool {
    let (Some(ea), Some(eb)) = (model.ec.get(a), model.ec.get(b)) else {
        return true;
    };
    let (Activation::Guard(ga), Activation::Guard(gb)) = (&ea.activation, &eb.activation) else {
        return true;
    };
    let pre = guard_box(ga);
    let mut env = pre.clone();
    let mut fresh = 0;
    let mut post: HashMap<&str, Expr> = HashMap::new();
    for atom in &ea.reset.atoms {
        let value = atom.value.map(&mut |x| match x {
            Expr::Random(d) => {
                let name = format!("#sample{fresh}");
                fresh += 1;
                env.insert(name.clone(), support(&d, &pre));
                Expr::Var(name)
            }
            x => x,
        });
        post.insert(atom.var.as_str(), value);
    }
    let after = gb.map_exprs(&mut |e| e.substitute(&|n| post.get(n).cloned()));
    guard_range(&after, &env).0
}

/// Every component of the controller cycles only through loops that
/// contain a stochastic event.
fn controller_cycles_broken(model: &Model) -> Result<bool, EquivError> {
    let m = prepare(model)?;
    let (_, _, con) = m.split_system()?;
    let empty = OperationalState::new();
    for leaf in con.coop_leaves() {
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut terms = vec![leaf.clone()];
        ids.insert(leaf.to_string(), 0);
        let mut edges: Vec<Vec<usize>> = vec![Vec::new()];
        let mut i = 0;
        while i < terms.len() {
            for (e, t, _, _) in successors(&m, &terms[i].clone(), &empty)? {
                let key = t.to_string();
                let j = match ids.get(&key) {
                    Some(&j) => j,
                    None => {
                        terms.push(t);
                        edges.push(Vec::new());
                        ids.insert(key, terms.len() - 1);
                        terms.len() - 1
                    }
                };
                if !m.is_stochastic(&e) {
                    edges[i].push(j);
                }
            }
            i += 1;
        }
        if has_cycle(&edges) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn has_cycle(edges: &[Vec<usize>]) -> bool {
    // 0 unvisited, 1 on stack, 2 done
    let mut color = vec![0u8; edges.len()];
    for s in 0..edges.len() {
        if color[s] != 0 {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        color[s] = 1;
        while let Some((v, k)) = stack.pop() {
            if k < edges[v].len() {
                stack.push((v, k + 1));
                let w = edges[v][k];
                match color[w] {
                    1 => return true,
                    0 => {
                        color[w] = 1;
                        stack.push((w, 0));
                    }
                    _ => {}
                }
            } else {
                color[v] = 2;
            }
        }
    }
    false
}

/// Instantaneous transitions of the derivative set and the pairs that may
/// fire back to back.
struct Chains {
    lts: Lts,
    nodes: Vec<usize>,
    arcs: Vec<Vec<usize>>,
}

fn chains(model: &Model) -> Result<Chains, EquivError> {
    let lts = build_lts(&expand_general_durations(model)?)?;
    let nodes: Vec<usize> = (0..lts.transitions.len())
        .filter(|&i| {
            let e = &lts.transitions[i].event;
            e != INIT && !lts.model.is_stochastic(e)
        })
        .collect();
    let mut follow: HashMap<(&str, &str), bool> = HashMap::new();
    let mut arcs = vec![Vec::new(); nodes.len()];
    for (i, &t1) in nodes.iter().enumerate() {
        let a = &lts.transitions[t1];
        for (j, &t2) in nodes.iter().enumerate() {
            let b = &lts.transitions[t2];
            if b.src != a.tgt {
                continue;
            }
            let ok = *follow
                .entry((a.event.as_str(), b.event.as_str()))
                .or_insert_with(|| may_follow(&lts.model, &a.event, &b.event));
            if ok {
                arcs[i].push(j);
            }
        }
    }
    Ok(Chains { lts, nodes, arcs })
}

pub fn i_graph(model: &Model) -> Result<IGraph, EquivError> {
    let c = chains(model)?;
    let ev = |i: usize| c.lts.transitions[c.nodes[i]].event.clone();
    let events: BTreeSet<String> = (0..c.nodes.len()).map(ev).collect();
    let edges = c
        .arcs
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
        .map(|(i, j)| (ev(i), ev(j)))
        .collect();
    Ok(IGraph {
        events: events.into_iter().collect(),
        edges,
    })
}

/// Elementary cycles of `arcs`, as event sequences in canonical rotation.
fn cycles(arcs: &[Vec<usize>], label: &dyn Fn(usize) -> String) -> Vec<Vec<String>> {
    let mut found: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut budget = SEARCH_BUDGET;
    for s in 0..arcs.len() {
        // paths from s through nodes numbered above s
        let mut path = vec![s];
        let mut on_path = vec![false; arcs.len()];
        on_path[s] = true;
        let mut iters = vec![0usize];
        while let Some(k) = iters.last_mut() {
            if budget == 0 || found.len() >= MAX_CYCLES {
                return found.into_iter().collect();
            }
            budget -= 1;
            let v = *path.last().expect("nonempty");
            if *k >= arcs[v].len() {
                iters.pop();
                on_path[v] = false;
                path.pop();
                continue;
            }
            let w = arcs[v][*k];
            *k += 1;
            if w == s {
                let mut seq: Vec<String> = path.iter().map(|&i| label(i)).collect();
                let r = (0..seq.len()).min_by_key(|&r| seq[r..].iter().chain(&seq[..r]).cloned().collect::<Vec<_>>());
                seq.rotate_left(r.unwrap_or(0));
                found.insert(seq);
            } else if w > s && !on_path[w] {
                on_path[w] = true;
                path.push(w);
                iters.push(0);
            }
        }
    }
    found.into_iter().collect()
}

/// Tries, in order: controller cycles broken by stochastic events; no
/// instantaneous event enabling another; an acyclic activation graph.
pub fn check_well_behaved(model: &Model) -> Result<Verdict, EquivError> {
    if controller_cycles_broken(model)? {
        return Ok(Verdict::WellBehaved {
            reason: "every cycle of every controller component contains a stochastic event".into(),
        });
    }
    let expanded = expand_general_durations(model)?.instantiate()?;
    let events = instantaneous(&expanded);
    let pairwise = events
        .iter()
        .all(|a| events.iter().all(|b| !may_follow(&expanded, a, b)));
    if pairwise {
        return Ok(Verdict::WellBehaved {
            reason: "no instantaneous event can enable an instantaneous event".into(),
        });
    }
    let c = chains(model)?;
    let label = |i: usize| c.lts.transitions[c.nodes[i]].event.clone();
    let found = cycles(&c.arcs, &label);
    if found.is_empty() {
        return Ok(Verdict::WellBehaved {
            reason: "the instantaneous activation graph is acyclic".into(),
        });
    }
    Ok(Verdict::Unknown { cycles: found })
}
