use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use super::{
    dedup_instant, init_reset, Conditions, ContinuousTransition, InstantTransition, Mode, StochasticTransition,
    Tdsha, TdshaError,
};
use crate::ast::{canonical_key, DefKind, EventKind, Expr, Guard, Model, ModelError, Reset, Sync, Term, INIT};
use crate::lts::{prepare, successors, unfold, InfluenceValue, OperationalState};

type PtrPair = (usize, usize);

fn ptr<T>(a: &Arc<T>) -> usize {
    Arc::as_ptr(a) as usize
}

/// Memoizes conjunctions of shared guards and resets by identity. Operands
/// are retained so their addresses stay unique.
#[derive(Default)]
struct Conj {
    guards: HashMap<PtrPair, (Arc<Guard>, [Arc<Guard>; 2])>,
    resets: HashMap<PtrPair, (Result<Arc<Reset>, String>, [Arc<Reset>; 2])>,
    rates: HashMap<PtrPair, (bool, [Arc<Expr>; 2])>,
}

impl Conj {
    fn guard(&mut self, a: &Arc<Guard>, b: &Arc<Guard>) -> Arc<Guard> {
        if *b.as_ref() == Guard::True {
            return a.clone();
        }
        if *a.as_ref() == Guard::True || Arc::ptr_eq(a, b) {
            return b.clone();
        }
        self.guards
            .entry((ptr(a), ptr(b)))
            .or_insert_with(|| (Arc::new(Guard::and((**a).clone(), (**b).clone())), [a.clone(), b.clone()]))
            .0
            .clone()
    }

    fn reset(&mut self, a: &Arc<Reset>, b: &Arc<Reset>) -> Result<Arc<Reset>, String> {
        if b.is_identity() || Arc::ptr_eq(a, b) {
            return Ok(a.clone());
        }
        if a.is_identity() {
            return Ok(b.clone());
        }
        self.resets
            .entry((ptr(a), ptr(b)))
            .or_insert_with(|| (a.conj(b).map(Arc::new), [a.clone(), b.clone()]))
            .0
            .clone()
    }

    fn same_rate(&mut self, a: &Arc<Expr>, b: &Arc<Expr>) -> bool {
        Arc::ptr_eq(a, b)
            || self
                .rates
                .entry((ptr(a), ptr(b)))
                .or_insert_with(|| (canonical_key(a) == canonical_key(b), [a.clone(), b.clone()]))
                .0
    }
}

/// `A ⊗_L B`.
pub fn tdsha_product(a: &Tdsha, b: &Tdsha, sync: &BTreeSet<String>) -> Result<Tdsha, TdshaError> {
    product_with(a, b, sync, &mut Conj::default())
}

fn product_with(a: &Tdsha, b: &Tdsha, sync: &BTreeSet<String>, cj: &mut Conj) -> Result<Tdsha, TdshaError> {
    let nb = b.modes.len();
    let id = |qa: usize, qb: usize| qa * nb + qb;

    let init_reset = cj
        .reset(&a.init_reset, &b.init_reset)
        .map_err(TdshaError::InitIncompatible)?;

    // reset compatibility over every pair of same-event transitions
    let mut by_event_a: BTreeMap<&str, Vec<&Arc<Reset>>> = BTreeMap::new();
    for r in a.instantaneous.iter().map(|t| (&t.event, &t.reset)).chain(a.stochastic.iter().map(|t| (&t.event, &t.reset))) {
        by_event_a.entry(r.0).or_default().push(r.1);
    }
    for (e, rb) in b.instantaneous.iter().map(|t| (&t.event, &t.reset)).chain(b.stochastic.iter().map(|t| (&t.event, &t.reset))) {
        if let Some(ras) = by_event_a.get(e.as_str()) {
            for ra in ras {
                cj.reset(ra, rb).map_err(|variable| TdshaError::ResetIncompatible {
                    event: e.clone(),
                    variable,
                })?;
            }
        }
    }

    let mut modes = Vec::with_capacity(a.modes.len() * nb);
    for qa in &a.modes {
        for qb in &b.modes {
            modes.push(Mode {
                label: format!("({}, {})", qa.label, qb.label),
            });
        }
    }

    let mut tc_a: Vec<Vec<&ContinuousTransition>> = vec![Vec::new(); a.modes.len()];
    for t in &a.continuous {
        tc_a[t.mode].push(t);
    }
    let mut tc_b: Vec<Vec<&ContinuousTransition>> = vec![Vec::new(); nb];
    for t in &b.continuous {
        tc_b[t.mode].push(t);
    }
    let mut continuous = Vec::new();
    for qa in 0..a.modes.len() {
        for qb in 0..nb {
            for t in tc_a[qa].iter().chain(tc_b[qb].iter()) {
                continuous.push(ContinuousTransition {
                    mode: id(qa, qb),
                    stoich: t.stoich.clone(),
                    rate: t.rate.clone(),
                });
            }
        }
    }

    let mut instantaneous = Vec::new();
    for t in a.instantaneous.iter().filter(|t| !sync.contains(&t.event)) {
        for qb in 0..nb {
            instantaneous.push(InstantTransition {
                src: id(t.src, qb),
                tgt: id(t.tgt, qb),
                ..t.clone()
            });
        }
    }
    for t in b.instantaneous.iter().filter(|t| !sync.contains(&t.event)) {
        for qa in 0..a.modes.len() {
            instantaneous.push(InstantTransition {
                src: id(qa, t.src),
                tgt: id(qa, t.tgt),
                ..t.clone()
            });
        }
    }
    let mut td_b: BTreeMap<&str, Vec<&InstantTransition>> = BTreeMap::new();
    for t in b.instantaneous.iter().filter(|t| sync.contains(&t.event)) {
        td_b.entry(&t.event).or_default().push(t);
    }
    for ta in a.instantaneous.iter().filter(|t| sync.contains(&t.event)) {
        for tb in td_b.get(ta.event.as_str()).into_iter().flatten() {
            instantaneous.push(InstantTransition {
                src: id(ta.src, tb.src),
                tgt: id(ta.tgt, tb.tgt),
                event: ta.event.clone(),
                guard: cj.guard(&ta.guard, &tb.guard),
                reset: cj.reset(&ta.reset, &tb.reset).expect("checked above"),
                weight: ta.weight.min(tb.weight),
            });
        }
    }

    dedup_instant(&mut instantaneous);

    let mut stochastic = Vec::new();
    for t in a.stochastic.iter().filter(|t| !sync.contains(&t.event)) {
        for qb in 0..nb {
            stochastic.push(StochasticTransition {
                src: id(t.src, qb),
                tgt: id(t.tgt, qb),
                ..t.clone()
            });
        }
    }
    for t in b.stochastic.iter().filter(|t| !sync.contains(&t.event)) {
        for qa in 0..a.modes.len() {
            stochastic.push(StochasticTransition {
                src: id(qa, t.src),
                tgt: id(qa, t.tgt),
                ..t.clone()
            });
        }
    }
    let mut ts_b: BTreeMap<&str, Vec<&StochasticTransition>> = BTreeMap::new();
    for t in b.stochastic.iter().filter(|t| sync.contains(&t.event)) {
        ts_b.entry(&t.event).or_default().push(t);
    }
    for ta in a.stochastic.iter().filter(|t| sync.contains(&t.event)) {
        for tb in ts_b.get(ta.event.as_str()).into_iter().flatten() {
            if !cj.same_rate(&ta.rate, &tb.rate) {
                return Err(TdshaError::RateInconsistent(ta.event.clone()));
            }
            stochastic.push(StochasticTransition {
                src: id(ta.src, tb.src),
                tgt: id(ta.tgt, tb.tgt),
                event: ta.event.clone(),
                guard: cj.guard(&ta.guard, &tb.guard),
                reset: cj.reset(&ta.reset, &tb.reset).expect("checked above"),
                rate: ta.rate.clone(),
            });
        }
    }

    let mut variables = a.variables.clone();
    for v in &b.variables {
        if !variables.contains(v) {
            variables.push(v.clone());
        }
    }
    let mut events = a.events.clone();
    events.extend(b.events.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(Tdsha {
        variables,
        events,
        modes,
        continuous,
        instantaneous,
        stochastic,
        init_mode: id(a.init_mode, b.init_mode),
        init_reset,
    })
}

struct Builder<'m> {
    model: &'m Model,
    conds: Conditions,
    cj: Conj,
}

impl Builder<'_> {
    fn empty(&self, modes: Vec<Mode>, init_reset: Arc<Reset>) -> Tdsha {
        Tdsha {
            variables: self.model.variables.clone(),
            events: self.model.events.clone(),
            modes,
            continuous: Vec::new(),
            instantaneous: Vec::new(),
            stochastic: Vec::new(),
            init_mode: 0,
            init_reset,
        }
    }

    /// One mode per influence triple of the subcomponent.
    fn subcomponent(&mut self, name: &str, args: &[String]) -> Result<Tdsha, TdshaError> {
        let m = self.model;
        let body = unfold(m, name, args)?;
        let mut triples: Vec<(String, InfluenceValue)> = Vec::new();
        let mut prefixes = Vec::new();
        let mut init = None;
        for s in body.summands() {
            let Term::Prefix {
                event,
                activity: Some(a),
                ..
            } = s
            else {
                return Err(ModelError::MalformedSystem(format!("`{name}` has a summand without influence")).into());
            };
            let r = m.resolve(&a.strength)?.as_num().ok_or_else(|| ModelError::NonConstantStrength {
                influence: a.influence.clone(),
                expr: a.strength.to_string(),
            })?;
            let v = (a.influence.clone(), InfluenceValue::new(r, a.itype.clone()));
            let idx = match triples.iter().position(|t| *t == v) {
                Some(i) => i,
                None => {
                    triples.push(v);
                    triples.len() - 1
                }
            };
            if event == INIT {
                init = Some(idx);
            } else {
                prefixes.push((event.clone(), idx));
            }
        }
        let init = init.ok_or_else(|| ModelError::MalformedSystem(format!("`{name}` has no init prefix")))?;
        let modes = triples
            .iter()
            .map(|(i, v)| Mode {
                label: format!("({i}, {}, {})", v.strength, v.itype),
            })
            .collect();
        let mut t = self.empty(modes, Arc::new(Reset::identity()));
        t.init_mode = init;
        for (q, (infl, v)) in triples.iter().enumerate() {
            let var = m
                .iv
                .get(infl)
                .ok_or_else(|| ModelError::MissingInfluenceVariable(infl.clone()))?;
            let f = m.resolve(&m.itype_body(&v.itype)?)?;
            t.continuous.push(ContinuousTransition {
                mode: q,
                stoich: vec![(var.clone(), 1.0)],
                rate: Arc::new(Expr::mul(Expr::num(v.strength), f)),
            });
        }
        let trivial_guard = Arc::new(Guard::True);
        let trivial_reset = Arc::new(Reset::identity());
        let mut seen_td = BTreeSet::new();
        for (event, target) in &prefixes {
            let stochastic = m.event_kind(event) == Some(EventKind::Stochastic);
            let rate = if stochastic {
                Some(self.conds.stochastic(m, event)?.0)
            } else {
                None
            };
            for src in 0..t.modes.len() {
                match &rate {
                    Some(rate) => t.stochastic.push(StochasticTransition {
                        src,
                        tgt: *target,
                        event: event.clone(),
                        guard: trivial_guard.clone(),
                        reset: trivial_reset.clone(),
                        rate: rate.clone(),
                    }),
                    None => {
                        if seen_td.insert((src, *target, event.clone())) {
                            t.instantaneous.push(InstantTransition {
                                src,
                                tgt: *target,
                                event: event.clone(),
                                guard: trivial_guard.clone(),
                                reset: trivial_reset.clone(),
                                weight: 1.0,
                            });
                        }
                    }
                }
            }
        }
        Ok(t)
    }

    fn sigma(&mut self, term: &Term) -> Result<Tdsha, TdshaError> {
        match term {
            Term::Coop(a, sync, b) => {
                let (ta, tb) = (self.sigma(a)?, self.sigma(b)?);
                product_with(&ta, &tb, &sync_set(sync), &mut self.cj)
            }
            Term::Const { name, args } => {
                let def = self
                    .model
                    .definition(name)
                    .ok_or_else(|| ModelError::UnknownDefinition(name.clone()))?;
                match def.kind {
                    DefKind::Subcomponent => self.subcomponent(name, args),
                    _ => {
                        let body = unfold(self.model, name, args)?;
                        self.sigma(&body)
                    }
                }
            }
            t => Err(ModelError::MalformedSystem(format!("`{t}` is not a cooperation of subcomponents")).into()),
        }
    }

    /// Derivative set of a sequential controller with event conditions attached.
    fn sequential(&mut self, term: &Term, init: &Arc<Reset>) -> Result<Tdsha, TdshaError> {
        let m = self.model;
        let empty = OperationalState::new();
        let mut terms = vec![term.clone()];
        let mut index: HashMap<String, usize> = HashMap::from([(term.to_string(), 0)]);
        let mut queue = VecDeque::from([0usize]);
        let mut edges = Vec::new();
        while let Some(q) = queue.pop_front() {
            for (event, next, _, mult) in successors(m, &terms[q], &empty)? {
                let key = next.to_string();
                let tgt = match index.get(&key) {
                    Some(&i) => i,
                    None => {
                        terms.push(next);
                        index.insert(key, terms.len() - 1);
                        queue.push_back(terms.len() - 1);
                        terms.len() - 1
                    }
                };
                edges.push((q, event, tgt, mult));
            }
        }
        let modes = terms.iter().map(|t| Mode { label: t.to_string() }).collect();
        let mut t = self.empty(modes, init.clone());
        for (src, event, tgt, mult) in edges {
            if m.event_kind(&event) == Some(EventKind::Stochastic) {
                let (rate, reset) = self.conds.stochastic(m, &event)?;
                for _ in 0..mult {
                    t.stochastic.push(StochasticTransition {
                        src,
                        tgt,
                        event: event.clone(),
                        guard: Arc::new(Guard::True),
                        reset: reset.clone(),
                        rate: rate.clone(),
                    });
                }
            } else {
                let (guard, reset) = self.conds.instant(m, &event)?;
                t.instantaneous.push(InstantTransition {
                    src,
                    tgt,
                    event,
                    guard,
                    reset,
                    weight: 1.0,
                });
            }
        }
        Ok(t)
    }

    fn controller(&mut self, term: &Term, init: &Arc<Reset>) -> Result<Tdsha, TdshaError> {
        match term {
            Term::Coop(a, sync, b) => {
                let (ta, tb) = (self.controller(a, init)?, self.controller(b, init)?);
                product_with(&ta, &tb, &sync_set(sync), &mut self.cj)
            }
            Term::Const { name, args } => {
                let body = unfold(self.model, name, args)?;
                if matches!(body, Term::Coop(..) | Term::Const { .. }) {
                    self.controller(&body, init)
                } else {
                    self.sequential(term, init)
                }
            }
            t => self.sequential(t, init),
        }
    }
}

fn sync_set(sync: &Sync) -> BTreeSet<String> {
    match sync {
        Sync::Set(s) => s.clone(),
        Sync::Shared => unreachable!("cooperation sets are resolved by prepare"),
    }
}

/// Builds the automaton piecewise: subcomponents and sequential controllers
/// separately, then their products along the system structure. Unreachable
/// modes are kept.
pub fn compositional_mapping(model: &Model) -> Result<Tdsha, TdshaError> {
    let m = prepare(model)?;
    let (sigma, sync, con) = m.split_system()?;
    let init = init_reset(&m)?;
    let mut b = Builder {
        model: &m,
        conds: Conditions::default(),
        cj: Conj::default(),
    };
    let ts = b.sigma(sigma)?;
    let tc = b.controller(con, &init)?;
    let t = product_with(&ts, &tc, &sync_set(sync), &mut b.cj)?;
    t.check_rate_consistency()?;
    Ok(t)
}
