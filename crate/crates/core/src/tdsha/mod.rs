//! Transition-driven stochastic hybrid automata.

mod compose;
mod export;
mod iso;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

pub use compose::{compositional_mapping, tdsha_product};
pub use export::{tdsha_to_dot, tdsha_to_json};
pub use iso::{graph_isomorphic, Isomorphism};

use crate::ast::{
    canonical_key, Activation, EvalError, EventKind, Expr, Guard, Model, ModelError, Reset, INIT,
};
use crate::ast::expand::expand_general_durations;
use crate::lts::{Lts, LtsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdshaError {
    #[error(transparent)]
    Lts(#[from] LtsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("resets of `{event}` disagree on `{variable}`")]
    ResetIncompatible { event: String, variable: String },
    #[error("initial resets disagree on `{0}`")]
    InitIncompatible(String),
    #[error("transitions labelled `{0}` have different rates")]
    RateInconsistent(String),
    #[error("event `{0}` has no usable event condition")]
    BadEventCondition(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub label: String,
}

/// Flow contribution `stoich · rate(X)` active in `mode`.
#[derive(Debug, Clone)]
pub struct ContinuousTransition {
    pub mode: usize,
    pub stoich: Vec<(String, f64)>,
    pub rate: Arc<Expr>,
}

#[derive(Debug, Clone)]
pub struct InstantTransition {
    pub src: usize,
    pub tgt: usize,
    pub event: String,
    pub guard: Arc<Guard>,
    pub reset: Arc<Reset>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct StochasticTransition {
    pub src: usize,
    pub tgt: usize,
    pub event: String,
    pub guard: Arc<Guard>,
    pub reset: Arc<Reset>,
    pub rate: Arc<Expr>,
}

#[derive(Debug, Clone)]
pub struct Tdsha {
    pub variables: Vec<String>,
    pub events: BTreeMap<String, EventKind>,
    pub modes: Vec<Mode>,
    pub continuous: Vec<ContinuousTransition>,
    pub instantaneous: Vec<InstantTransition>,
    pub stochastic: Vec<StochasticTransition>,
    pub init_mode: usize,
    pub init_reset: Arc<Reset>,
}

impl Tdsha {
    /// `dX/dt` in `mode` at valuation `x` (ordered as `variables`).
    pub fn vector_field(&self, mode: usize, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let env: BTreeMap<String, f64> = self.variables.iter().cloned().zip(x.iter().copied()).collect();
        let index: BTreeMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let mut out = vec![0.0; self.variables.len()];
        for tc in self.continuous.iter().filter(|t| t.mode == mode) {
            let r = tc.rate.eval(&env)?;
            for (v, c) in &tc.stoich {
                if let Some(&i) = index.get(v.as_str()) {
                    out[i] += c * r;
                }
            }
        }
        Ok(out)
    }

    /// Transitions labelled by the same stochastic event share one rate.
    pub fn check_rate_consistency(&self) -> Result<(), TdshaError> {
        let mut seen: BTreeMap<&str, (&Arc<Expr>, Option<String>)> = BTreeMap::new();
        for t in &self.stochastic {
            match seen.get_mut(t.event.as_str()) {
                None => {
                    seen.insert(&t.event, (&t.rate, None));
                }
                Some((r, key)) => {
                    if Arc::ptr_eq(r, &t.rate) {
                        continue;
                    }
                    let k = key.get_or_insert_with(|| canonical_key(r));
                    if *k != canonical_key(&t.rate) {
                        return Err(TdshaError::RateInconsistent(t.event.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }
}

/// Event condition split into the parts a TDSHA needs.
pub(crate) fn event_parts(model: &Model, event: &str) -> Result<(Activation, Arc<Reset>), TdshaError> {
    let ec = model
        .ec
        .get(event)
        .ok_or_else(|| ModelError::MissingEventCondition(event.to_string()))?;
    if matches!(ec.activation, Activation::Duration(_)) {
        return Err(LtsError::UnexpandedDuration(event.to_string()).into());
    }
    Ok((ec.activation.clone(), Arc::new(ec.reset.clone())))
}

pub(crate) fn init_reset(model: &Model) -> Result<Arc<Reset>, TdshaError> {
    Ok(model
        .ec
        .get(INIT)
        .map(|ec| Arc::new(ec.reset.clone()))
        .unwrap_or_else(|| Arc::new(Reset::identity())))
}

/// Caches shared guards, resets and rates so equal conditions share storage.
#[derive(Default)]
pub(crate) struct Conditions {
    guards: BTreeMap<String, (Arc<Guard>, Arc<Reset>)>,
    rates: BTreeMap<String, (Arc<Expr>, Arc<Reset>)>,
}

impl Conditions {
    pub(crate) fn instant(&mut self, model: &Model, event: &str) -> Result<(Arc<Guard>, Arc<Reset>), TdshaError> {
        if let Some(v) = self.guards.get(event) {
            return Ok(v.clone());
        }
        let (act, reset) = event_parts(model, event)?;
        let Activation::Guard(g) = act else {
            return Err(TdshaError::BadEventCondition(event.to_string()));
        };
        let v = (Arc::new(g), reset);
        self.guards.insert(event.to_string(), v.clone());
        Ok(v)
    }

    pub(crate) fn stochastic(&mut self, model: &Model, event: &str) -> Result<(Arc<Expr>, Arc<Reset>), TdshaError> {
        if let Some(v) = self.rates.get(event) {
            return Ok(v.clone());
        }
        let (act, reset) = event_parts(model, event)?;
        let Activation::Rate(r) = act else {
            return Err(TdshaError::BadEventCondition(event.to_string()));
        };
        let v = (Arc::new(r), reset);
        self.rates.insert(event.to_string(), v.clone());
        Ok(v)
    }
}

/// Instantaneous transitions form a set: identical tuples collapse.
pub(crate) fn dedup_instant(ts: &mut Vec<InstantTransition>) {
    let mut groups: HashMap<(usize, usize, String), Vec<usize>> = HashMap::new();
    let mut keep = Vec::with_capacity(ts.len());
    for (i, t) in ts.iter().enumerate() {
        let g = groups.entry((t.src, t.tgt, t.event.clone())).or_default();
        let dup = g.iter().any(|&j| {
            let u: &InstantTransition = &ts[j];
            (Arc::ptr_eq(&u.guard, &t.guard) || u.guard == t.guard)
                && (Arc::ptr_eq(&u.reset, &t.reset) || u.reset == t.reset)
                && u.weight == t.weight
        });
        if !dup {
            g.push(i);
        }
        keep.push(!dup);
    }
    let mut k = keep.into_iter();
    ts.retain(|_| k.next().unwrap_or(false));
}

/// The SOS mapping: one mode per configuration of the transition system.
pub fn from_lts(lts: &Lts) -> Result<Tdsha, TdshaError> {
    let model = &lts.model;
    let mut conds = Conditions::default();
    let modes = (0..lts.configs.len())
        .map(|c| Mode {
            label: format!("<{}, {}>", lts.term(c), lts.state(c)),
        })
        .collect();
    let mut continuous = Vec::new();
    for c in 0..lts.configs.len() {
        for (infl, val) in lts.state(c).iter() {
            let var = model
                .iv
                .get(infl)
                .ok_or_else(|| ModelError::MissingInfluenceVariable(infl.clone()))?;
            let f = model.resolve(&model.itype_body(&val.itype)?)?;
            continuous.push(ContinuousTransition {
                mode: c,
                stoich: vec![(var.clone(), 1.0)],
                rate: Arc::new(Expr::mul(Expr::num(val.strength), f)),
            });
        }
    }
    let mut instantaneous = Vec::new();
    let mut stochastic = Vec::new();
    for t in &lts.transitions {
        match model.event_kind(&t.event) {
            Some(EventKind::Stochastic) => {
                let (rate, reset) = conds.stochastic(model, &t.event)?;
                for _ in 0..t.multiplicity {
                    stochastic.push(StochasticTransition {
                        src: t.src,
                        tgt: t.tgt,
                        event: t.event.clone(),
                        guard: Arc::new(Guard::True),
                        reset: reset.clone(),
                        rate: rate.clone(),
                    });
                }
            }
            _ => {
                let (guard, reset) = conds.instant(model, &t.event)?;
                instantaneous.push(InstantTransition {
                    src: t.src,
                    tgt: t.tgt,
                    event: t.event.clone(),
                    guard,
                    reset,
                    weight: 1.0,
                });
            }
        }
    }
    let t = Tdsha {
        variables: model.variables.clone(),
        events: model.events.clone(),
        modes,
        continuous,
        instantaneous,
        stochastic,
        init_mode: lts.initial,
        init_reset: init_reset(model)?,
    };
    t.check_rate_consistency()?;
    Ok(t)
}

/// Expands general durations, builds the transition system and maps it.
pub fn from_model(model: &Model) -> Result<Tdsha, TdshaError> {
    let m = expand_general_durations(model)?;
    from_lts(&crate::lts::build_lts(&m)?)
}

/// Keeps the modes reachable from the initial mode through discrete edges,
/// ignoring guards.
pub fn prune_unreachable(t: &Tdsha) -> Tdsha {
    let n = t.modes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for d in &t.instantaneous {
        adj[d.src].push(d.tgt);
    }
    for s in &t.stochastic {
        adj[s.src].push(s.tgt);
    }
    let mut new_id = vec![usize::MAX; n];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([t.init_mode]);
    new_id[t.init_mode] = 0;
    order.push(t.init_mode);
    while let Some(q) = queue.pop_front() {
        for &r in &adj[q] {
            if new_id[r] == usize::MAX {
                new_id[r] = order.len();
                order.push(r);
                queue.push_back(r);
            }
        }
    }
    let keep = |q: usize| new_id[q] != usize::MAX;
    Tdsha {
        variables: t.variables.clone(),
        events: t.events.clone(),
        modes: order.iter().map(|&q| t.modes[q].clone()).collect(),
        continuous: t
            .continuous
            .iter()
            .filter(|c| keep(c.mode))
            .map(|c| ContinuousTransition {
                mode: new_id[c.mode],
                ..c.clone()
            })
            .collect(),
        instantaneous: t
            .instantaneous
            .iter()
            .filter(|d| keep(d.src))
            .map(|d| InstantTransition {
                src: new_id[d.src],
                tgt: new_id[d.tgt],
                ..d.clone()
            })
            .collect(),
        stochastic: t
            .stochastic
            .iter()
            .filter(|s| keep(s.src))
            .map(|s| StochasticTransition {
                src: new_id[s.src],
                tgt: new_id[s.tgt],
                ..s.clone()
            })
            .collect(),
        init_mode: 0,
        init_reset: t.init_reset.clone(),
    }
}

#[cfg(test)]
mod tests;
