//! Operational semantics: configurations, the SOS rules and the derivative set.

mod export;
mod state;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

pub use export::{lts_to_dot, lts_to_json};
pub use state::{merge_gamma, InfluenceValue, OperationalState};

use crate::ast::validate::term_events;
use crate::ast::{Activation, Definition, Expr, Model, ModelError, Sync, Term, INIT};

pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LtsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("state space exceeds {0} configurations")]
    StateSpaceCap(usize),
    #[error("cooperation on `{event}` updates influence `{influence}` inconsistently")]
    GammaUndefined { event: String, influence: String },
    #[error("the system has no init transition")]
    NoInit,
    #[error("init leads to {0} different configurations")]
    AmbiguousInit(usize),
    #[error("general durations must be expanded before building the transition system (event `{0}`)")]
    UnexpandedDuration(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
}

/// Index into [`Lts::configs`].
pub type ConfigId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Config {
    pub term: usize,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Transition {
    pub src: ConfigId,
    pub event: String,
    pub tgt: ConfigId,
    /// Number of distinct derivations.
    pub multiplicity: usize,
}

/// Labelled multitransition system over configurations.
#[derive(Debug, Clone)]
pub struct Lts {
    /// Model with parameters substituted and `<*>` made explicit.
    pub model: Model,
    pub terms: Vec<Term>,
    pub states: Vec<OperationalState>,
    pub configs: Vec<Config>,
    pub transitions: Vec<Transition>,
    pub initial: ConfigId,
}

impl Lts {
    pub fn term(&self, c: ConfigId) -> &Term {
        &self.terms[self.configs[c].term]
    }

    pub fn state(&self, c: ConfigId) -> &OperationalState {
        &self.states[self.configs[c].state]
    }

    /// Distinct operational states of reachable configurations.
    pub fn distinct_states(&self) -> BTreeSet<&OperationalState> {
        self.configs.iter().map(|c| &self.states[c.state]).collect()
    }

    /// Events labelling some transition.
    pub fn events(&self) -> BTreeSet<&str> {
        self.transitions.iter().map(|t| t.event.as_str()).collect()
    }

    pub fn outgoing(&self, c: ConfigId) -> impl Iterator<Item = &Transition> {
        let lo = self.transitions.partition_point(|t| t.src < c);
        self.transitions[lo..].iter().take_while(move |t| t.src == c)
    }

    /// Configuration whose term prints as `term`, if any.
    pub fn find_term(&self, term: &Term) -> Vec<ConfigId> {
        let key = term.to_string();
        (0..self.configs.len())
            .filter(|&c| self.term(c).to_string() == key)
            .collect()
    }

    /// `dV/dt` for every variable in configuration `c`.
    pub fn ode(&self, c: ConfigId) -> Result<BTreeMap<String, Expr>, LtsError> {
        ode_system_for(self.state(c), &self.model)
    }
}

/// Substitutes parameters and replaces every `<*>` by the explicit set of
/// events both operands can perform.
pub fn prepare(model: &Model) -> Result<Model, LtsError> {
    let mut m = model.instantiate()?;
    let original = m.clone();
    for d in &mut m.definitions {
        d.body = resolve_shared(&original, &d.body);
    }
    let resolved = m.clone();
    for d in &mut m.definitions {
        d.body = inline_structure(&resolved, &d.body, resolved.definitions.len());
    }
    Ok(m)
}

/// Replaces constants that merely name a cooperation by their bodies, so a
/// configuration is identified by its sequential components alone.
fn inline_structure(model: &Model, t: &Term, depth: usize) -> Term {
    match t {
        Term::Coop(a, sync, b) => Term::coop(
            inline_structure(model, a, depth),
            sync.clone(),
            inline_structure(model, b, depth),
        ),
        Term::Choice(a, b) => Term::choice(inline_structure(model, a, depth), inline_structure(model, b, depth)),
        Term::Prefix {
            event,
            activity,
            next,
        } => Term::prefix(event.clone(), activity.clone(), inline_structure(model, next, depth)),
        Term::Const { name, args } if args.is_empty() && depth > 0 => match model.definition(name) {
            Some(d) if d.params.is_empty() && is_structural(model, &d.body, depth) => {
                inline_structure(model, &d.body, depth - 1)
            }
            _ => t.clone(),
        },
        t => t.clone(),
    }
}

fn is_structural(model: &Model, t: &Term, depth: usize) -> bool {
    match t {
        Term::Coop(..) => true,
        Term::Const { name, args } if args.is_empty() && depth > 0 => model
            .definition(name)
            .is_some_and(|d| d.params.is_empty() && is_structural(model, &d.body, depth - 1)),
        _ => false,
    }
}

/// Makes every `<*>` in `t` explicit, reading event sets from `model`.
pub fn resolve_shared(model: &Model, t: &Term) -> Term {
    match t {
        Term::Coop(a, sync, b) => {
            let sync = match sync {
                Sync::Shared => {
                    let ea = term_events(model, a);
                    let eb = term_events(model, b);
                    Sync::Set(ea.intersection(&eb).cloned().collect())
                }
                s => s.clone(),
            };
            Term::coop(resolve_shared(model, a), sync, resolve_shared(model, b))
        }
        Term::Choice(a, b) => Term::choice(resolve_shared(model, a), resolve_shared(model, b)),
        Term::Prefix {
            event,
            activity,
            next,
        } => Term::prefix(event.clone(), activity.clone(), resolve_shared(model, next)),
        t => t.clone(),
    }
}

/// `dV/dt = Σ r·⟦I(𝒲)⟧` over the influences of σ mapped to V.
pub fn ode_system_for(
    state: &OperationalState,
    model: &Model,
) -> Result<BTreeMap<String, Expr>, LtsError> {
    let mut out: BTreeMap<String, Expr> = model
        .variables
        .iter()
        .map(|v| (v.clone(), Expr::num(0.0)))
        .collect();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (infl, val) in state.iter() {
        let var = model
            .iv
            .get(infl)
            .ok_or_else(|| ModelError::MissingInfluenceVariable(infl.clone()))?;
        let f = model.resolve(&model.itype_body(&val.itype)?)?;
        let term = Expr::mul(Expr::num(val.strength), f);
        let slot = out.entry(var.clone()).or_insert_with(|| Expr::num(0.0));
        *slot = if seen.insert(var.as_str()) {
            term
        } else {
            Expr::add(slot.clone(), term)
        };
    }
    Ok(out)
}

struct Semantics<'m> {
    model: &'m Model,
}

type Move = (String, Term, OperationalState);

impl Semantics<'_> {
    fn unfold(&self, name: &str, args: &[String]) -> Result<Term, LtsError> {
        let d: &Definition = self
            .model
            .definition(name)
            .ok_or_else(|| ModelError::UnknownDefinition(name.to_string()))?;
        if d.params.len() != args.len() {
            return Err(LtsError::Arity {
                name: name.to_string(),
                expected: d.params.len(),
                got: args.len(),
            });
        }
        if args.is_empty() || d.params == args {
            return Ok(d.body.clone());
        }
        let map: HashMap<&str, &str> = d
            .params
            .iter()
            .map(String::as_str)
            .zip(args.iter().map(String::as_str))
            .collect();
        Ok(rename_args(&d.body, &map))
    }

    fn strength(&self, influence: &str, e: &Expr) -> Result<f64, LtsError> {
        self.model
            .resolve(e)?
            .as_num()
            .ok_or_else(|| {
                ModelError::NonConstantStrength {
                    influence: influence.to_string(),
                    expr: e.to_string(),
                }
                .into()
            })
    }

    /// All derivations of `⟨t, σ⟩`, one entry per derivation.
    fn moves(&self, t: &Term, s: &OperationalState, out: &mut Vec<Move>) -> Result<(), LtsError> {
        match t {
            Term::Nil => {}
            Term::Prefix {
                event,
                activity,
                next,
            } => {
                let s2 = match activity {
                    Some(a) => {
                        let r = self.strength(&a.influence, &a.strength)?;
                        s.update(&a.influence, r, a.itype.clone())
                    }
                    None => s.clone(),
                };
                out.push((event.clone(), (**next).clone(), s2));
            }
            Term::Choice(a, b) => {
                self.moves(a, s, out)?;
                self.moves(b, s, out)?;
            }
            Term::Const { name, args } => {
                let body = self.unfold(name, args)?;
                self.moves(&body, s, out)?;
            }
            Term::Coop(a, sync, b) => {
                let set = match sync {
                    Sync::Set(set) => set.clone(),
                    Sync::Shared => {
                        let ea = term_events(self.model, a);
                        let eb = term_events(self.model, b);
                        ea.intersection(&eb).cloned().collect()
                    }
                };
                let (mut ma, mut mb) = (Vec::new(), Vec::new());
                self.moves(a, s, &mut ma)?;
                self.moves(b, s, &mut mb)?;
                for (e, a2, t) in &ma {
                    if !set.contains(e) {
                        out.push((e.clone(), Term::coop(a2.clone(), sync.clone(), (**b).clone()), t.clone()));
                    }
                }
                for (e, b2, t) in &mb {
                    if !set.contains(e) {
                        out.push((e.clone(), Term::coop((**a).clone(), sync.clone(), b2.clone()), t.clone()));
                    }
                }
                for (e, a2, t) in ma.iter().filter(|m| set.contains(&m.0)) {
                    for (_, b2, t2) in mb.iter().filter(|m| m.0 == *e) {
                        let merged = merge_gamma(s, t, t2).map_err(|influence| LtsError::GammaUndefined {
                            event: e.clone(),
                            influence,
                        })?;
                        out.push((e.clone(), Term::coop(a2.clone(), sync.clone(), b2.clone()), merged));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Body of definition `name` applied to `args`.
pub fn unfold(model: &Model, name: &str, args: &[String]) -> Result<Term, LtsError> {
    Semantics { model }.unfold(name, args)
}

fn rename_args(t: &Term, map: &HashMap<&str, &str>) -> Term {
    let ren = |v: &String| map.get(v.as_str()).map_or_else(|| v.clone(), |s| s.to_string());
    match t {
        Term::Prefix {
            event,
            activity,
            next,
        } => {
            let activity = activity.as_ref().map(|a| {
                let mut a = a.clone();
                a.itype.args = a.itype.args.iter().map(ren).collect();
                a
            });
            Term::prefix(event.clone(), activity, rename_args(next, map))
        }
        Term::Choice(a, b) => Term::choice(rename_args(a, map), rename_args(b, map)),
        Term::Coop(a, s, b) => Term::coop(rename_args(a, map), s.clone(), rename_args(b, map)),
        Term::Const { name, args } => Term::Const {
            name: name.clone(),
            args: args.iter().map(ren).collect(),
        },
        Term::Nil => Term::Nil,
    }
}

/// Successors of a configuration with multiplicities, in a deterministic order.
pub fn successors(
    model: &Model,
    term: &Term,
    state: &OperationalState,
) -> Result<Vec<(String, Term, OperationalState, usize)>, LtsError> {
    let mut moves = Vec::new();
    Semantics { model }.moves(term, state, &mut moves)?;
    let mut grouped: Vec<(String, Term, OperationalState, usize)> = Vec::new();
    let mut index: HashMap<(String, String, OperationalState), usize> = HashMap::new();
    for (e, t, s) in moves {
        let key = (e.clone(), t.to_string(), s.clone());
        match index.get(&key) {
            Some(&i) => grouped[i].3 += 1,
            None => {
                index.insert(key, grouped.len());
                grouped.push((e, t, s, 1));
            }
        }
    }
    Ok(grouped)
}

#[derive(Default)]
struct Interner {
    terms: Vec<Term>,
    term_ids: HashMap<String, usize>,
    states: Vec<OperationalState>,
    state_ids: HashMap<OperationalState, usize>,
    configs: Vec<Config>,
    config_ids: HashMap<Config, ConfigId>,
}

impl Interner {
    fn config(&mut self, t: Term, s: OperationalState) -> (ConfigId, bool) {
        let key = t.to_string();
        let term = match self.term_ids.get(&key) {
            Some(&i) => i,
            None => {
                self.terms.push(t);
                self.term_ids.insert(key, self.terms.len() - 1);
                self.terms.len() - 1
            }
        };
        let state = match self.state_ids.get(&s) {
            Some(&i) => i,
            None => {
                self.states.push(s.clone());
                self.state_ids.insert(s, self.states.len() - 1);
                self.states.len() - 1
            }
        };
        let c = Config { term, state };
        match self.config_ids.get(&c) {
            Some(&i) => (i, false),
            None => {
                self.configs.push(c);
                self.config_ids.insert(c, self.configs.len() - 1);
                (self.configs.len() - 1, true)
            }
        }
    }
}

/// Closure of the successor relation from `⟨term, state⟩`, breadth first.
/// `model` must already be [`prepare`]d.
pub fn explore(
    model: Model,
    term: Term,
    state: OperationalState,
    cap: usize,
) -> Result<Lts, LtsError> {
    let mut int = Interner::default();
    let (initial, _) = int.config(term, state);
    let mut queue = VecDeque::from([initial]);
    let mut transitions = Vec::new();
    while let Some(c) = queue.pop_front() {
        let Config { term, state } = int.configs[c];
        let (t, s) = (int.terms[term].clone(), int.states[state].clone());
        for (e, t2, s2, mult) in successors(&model, &t, &s)? {
            let (tgt, fresh) = int.config(t2, s2);
            if fresh {
                if int.configs.len() > cap {
                    return Err(LtsError::StateSpaceCap(cap));
                }
                queue.push_back(tgt);
            }
            transitions.push(Transition {
                src: c,
                event: e,
                tgt,
                multiplicity: mult,
            });
        }
    }
    transitions.sort();
    Ok(Lts {
        model,
        terms: int.terms,
        states: int.states,
        configs: int.configs,
        transitions,
        initial,
    })
}

/// Derivative set of the controlled system, starting after `init` has fired.
pub fn build_lts(model: &Model) -> Result<Lts, LtsError> {
    build_lts_capped(model, DEFAULT_STATE_CAP)
}

pub fn build_lts_capped(model: &Model, cap: usize) -> Result<Lts, LtsError> {
    if let Some((e, _)) = model
        .ec
        .iter()
        .find(|(_, ec)| matches!(ec.activation, Activation::Duration(_)))
    {
        return Err(LtsError::UnexpandedDuration(e.clone()));
    }
    let m = prepare(model)?;
    let sys = m.system().ok_or(ModelError::MissingSystem)?;
    let start = Term::constant(sys.name.clone());
    let inits: Vec<_> = successors(&m, &start, &OperationalState::new())?
        .into_iter()
        .filter(|(e, ..)| e == INIT)
        .collect();
    match inits.len() {
        0 => Err(LtsError::NoInit),
        1 => {
            let (_, t, s, _) = inits.into_iter().next().expect("one element");
            explore(m, t, s, cap)
        }
        n => Err(LtsError::AmbiguousInit(n)),
    }
}

#[cfg(test)]
mod tests;
