use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use super::{round_sig, state_signature, EquivError, StateEquivKind};
use crate::ast::expand::expand_general_durations;
use crate::ast::{canonical_key, normalize, Activation, Expr, Model, ModelError, Term};
use crate::lts::{build_lts, ConfigId, Lts, OperationalState};

/// Aggregate rate `coeff · expr`; `expr` is `None` for constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rate {
    pub coeff: f64,
    pub expr: Option<String>,
}

impl Rate {
    fn unit(e: &Expr) -> Rate {
        let n = normalize(e);
        match n.as_num() {
            Some(v) => Rate { coeff: v, expr: None },
            None => Rate {
                coeff: 1.0,
                expr: Some(n.to_string()),
            },
        }
    }

    fn scaled(&self, k: usize) -> Rate {
        Rate {
            coeff: round_sig(self.coeff * k as f64),
            expr: self.expr.clone(),
        }
    }

    pub fn zero() -> Rate {
        Rate { coeff: 0.0, expr: None }
    }

    /// Exact comparison; differing symbolic rates cannot be decided.
    pub fn compare(&self, other: &Rate, event: &str) -> Result<bool, EquivError> {
        if self.coeff == 0.0 && other.coeff == 0.0 {
            return Ok(true);
        }
        match (&self.expr, &other.expr) {
            (None, None) => Ok(round_sig(self.coeff) == round_sig(other.coeff)),
            (Some(a), Some(b)) if a == b => Ok(round_sig(self.coeff) == round_sig(other.coeff)),
            _ => Err(EquivError::NonComparableRate {
                event: event.to_string(),
                left: self.to_string(),
                right: other.to_string(),
            }),
        }
    }

    fn key(&self) -> RateKey {
        (self.expr.clone(), round_sig(self.coeff).to_bits())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.expr {
            None => write!(f, "{}", self.coeff),
            Some(e) if self.coeff == 1.0 => write!(f, "{e}"),
            Some(e) => write!(f, "{} * ({e})", self.coeff),
        }
    }
}

type RateKey = (Option<String>, u64);
/// Signature of a state under ≐, with strengths as bit patterns.
type SigKey = Vec<((String, String), u64)>;

/// A configuration of one of the two compared models.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Node {
    pub model: usize,
    pub config: ConfigId,
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    /// Blocks ordered by their first node; nodes ordered by model then configuration.
    pub blocks: Vec<Vec<Node>>,
}

impl Partition {
    pub fn block_of(&self, model: usize, config: ConfigId) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| b.iter().any(|n| n.model == model && n.config == config))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Events leading from the initial configurations to the distinguished pair.
    pub path: Vec<String>,
    pub left: Node,
    pub right: Node,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisimReport {
    pub bisimilar: bool,
    pub equivalence: Option<StateEquivKind>,
    pub partition: Partition,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verification {
    Verified,
    Violation { left: String, right: String, reason: String },
}

#[derive(Clone, Copy, PartialEq)]
enum Matching {
    /// Stochastic moves matched one by one with their rates.
    System,
    /// Stochastic moves matched by aggregate rate into each block.
    Lumped,
}

struct Edge {
    event: usize,
    tgt: usize,
    mult: usize,
    stochastic: bool,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Sig {
    instant: Vec<(usize, usize)>,
    stochastic: Vec<(usize, usize, RateKey)>,
}

struct Union {
    lts: [Lts; 2],
    offset: usize,
    events: Vec<String>,
    out: Vec<Vec<Edge>>,
    act: [HashMap<usize, Rate>; 2],
}

fn unit_rate(model: &Model, event: &str) -> Result<Rate, EquivError> {
    match model.ec.get(event).map(|ec| &ec.activation) {
        Some(Activation::Rate(e)) => Ok(Rate::unit(e)),
        _ => Err(ModelError::MissingEventCondition(event.to_string()).into()),
    }
}

impl Union {
    fn new(p: &Model, q: &Model) -> Result<Union, EquivError> {
        let lts = [
            build_lts(&expand_general_durations(p)?)?,
            build_lts(&expand_general_durations(q)?)?,
        ];
        let offset = lts[0].configs.len();
        let mut events = Vec::new();
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut out: Vec<Vec<Edge>> = Vec::with_capacity(offset + lts[1].configs.len());
        let mut act = [HashMap::new(), HashMap::new()];
        for (side, l) in lts.iter().enumerate() {
            for c in 0..l.configs.len() {
                let mut edges = Vec::new();
                for t in l.outgoing(c) {
                    let id = *ids.entry(t.event.clone()).or_insert_with(|| {
                        events.push(t.event.clone());
                        events.len() - 1
                    });
                    let stochastic = l.model.is_stochastic(&t.event);
                    if stochastic && !act[side].contains_key(&id) {
                        act[side].insert(id, unit_rate(&l.model, &t.event)?);
                    }
                    edges.push(Edge {
                        event: id,
                        tgt: side * offset + t.tgt,
                        mult: t.multiplicity,
                        stochastic,
                    });
                }
                out.push(edges);
            }
        }
        Ok(Union {
            lts,
            offset,
            events,
            out,
            act,
        })
    }

    fn len(&self) -> usize {
        self.out.len()
    }

    fn side(&self, g: usize) -> (usize, ConfigId) {
        if g < self.offset {
            (0, g)
        } else {
            (1, g - self.offset)
        }
    }

    fn init(&self, side: usize) -> usize {
        side * self.offset + self.lts[side].initial
    }

    fn state(&self, g: usize) -> (&OperationalState, &Model) {
        let (s, c) = self.side(g);
        (self.lts[s].state(c), &self.lts[s].model)
    }

    fn term(&self, g: usize) -> &Term {
        let (s, c) = self.side(g);
        self.lts[s].term(c)
    }

    fn node(&self, g: usize) -> Node {
        let (model, config) = self.side(g);
        Node {
            model,
            config,
            term: self.term(g).to_string(),
        }
    }

    fn rate(&self, g: usize, event: usize, mult: usize) -> Rate {
        self.act[self.side(g).0][&event].scaled(mult)
    }

    /// Initial classes: configurations with equivalent states.
    fn state_classes(&self, kind: StateEquivKind) -> Result<Vec<usize>, EquivError> {
        let mut out = Vec::with_capacity(self.len());
        match kind {
            StateEquivKind::Equality => {
                let mut ids: HashMap<&OperationalState, usize> = HashMap::new();
                for g in 0..self.len() {
                    let n = ids.len();
                    out.push(*ids.entry(self.state(g).0).or_insert(n));
                }
            }
            StateEquivKind::DotEq => {
                let mut cache: HashMap<(usize, usize), SigKey> = HashMap::new();
                let mut ids: HashMap<SigKey, usize> = HashMap::new();
                for g in 0..self.len() {
                    let (s, c) = self.side(g);
                    let key = match cache.get(&(s, self.lts[s].configs[c].state)) {
                        Some(k) => k.clone(),
                        None => {
                            let (st, m) = self.state(g);
                            let k: Vec<_> = state_signature(st, m)?
                                .into_iter()
                                .map(|(k, v)| (k, v.to_bits()))
                                .collect();
                            cache.insert((s, self.lts[s].configs[c].state), k.clone());
                            k
                        }
                    };
                    let n = ids.len();
                    out.push(*ids.entry(key).or_insert(n));
                }
            }
        }
        Ok(out)
    }

    fn sig(&self, g: usize, block: &[usize], matching: Matching) -> Sig {
        let mut instant = BTreeSet::new();
        let mut lumped: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut single = Vec::new();
        for e in &self.out[g] {
            let b = block[e.tgt];
            if !e.stochastic {
                instant.insert((e.event, b));
            } else if matching == Matching::Lumped {
                *lumped.entry((e.event, b)).or_insert(0) += e.mult;
            } else {
                let r = self.rate(g, e.event, e.mult);
                if r.coeff != 0.0 {
                    single.push((e.event, b, r.key()));
                }
            }
        }
        let stochastic = match matching {
            Matching::System => {
                single.sort();
                single
            }
            Matching::Lumped => lumped
                .into_iter()
                .map(|((ev, b), m)| (ev, b, self.rate(g, ev, m)))
                .filter(|(_, _, r)| r.coeff != 0.0)
                .map(|(ev, b, r)| (ev, b, r.key()))
                .collect(),
        };
        Sig {
            instant: instant.into_iter().collect(),
            stochastic,
        }
    }

    fn refine_once(&self, block: &[usize], matching: Matching) -> Vec<usize> {
        let mut ids: HashMap<(usize, Sig), usize> = HashMap::new();
        (0..self.len())
            .map(|g| {
                let n = ids.len();
                *ids.entry((block[g], self.sig(g, block, matching))).or_insert(n)
            })
            .collect()
    }

    /// Successive partitions, from the state classes to the coarsest stable one.
    fn refine(&self, initial: Vec<usize>, matching: Matching) -> Vec<Vec<usize>> {
        let mut history = vec![canonical(&initial)];
        loop {
            let cur = history.last().expect("nonempty");
            let next = self.refine_once(cur, matching);
            if count(&next) == count(cur) {
                return history;
            }
            history.push(next);
        }
    }

    /// Splits one block at a time, trying blocks in the order chosen by `pick`.
    #[cfg(test)]
    fn refine_scheduled(
        &self,
        initial: Vec<usize>,
        matching: Matching,
        pick: &mut dyn FnMut(usize) -> usize,
    ) -> Vec<usize> {
        let mut block = canonical(&initial);
        'outer: loop {
            let n = count(&block);
            let start = pick(n) % n;
            for k in 0..n {
                let b = (start + k) % n;
                let members: Vec<usize> = (0..self.len()).filter(|&g| block[g] == b).collect();
                let sigs: Vec<Sig> = members.iter().map(|&g| self.sig(g, &block, matching)).collect();
                if sigs.iter().all(|s| *s == sigs[0]) {
                    continue;
                }
                let mut ids: HashMap<&Sig, usize> = HashMap::new();
                let mut next = n;
                for (g, s) in members.iter().zip(&sigs) {
                    let id = match ids.get(s) {
                        Some(&i) => i,
                        None => {
                            let i = if ids.is_empty() { b } else { next };
                            if i == next {
                                next += 1;
                            }
                            ids.insert(s, i);
                            i
                        }
                    };
                    block[*g] = id;
                }
                continue 'outer;
            }
            return canonical(&block);
        }
    }

    fn partition(&self, block: &[usize]) -> Partition {
        let mut blocks: Vec<Vec<Node>> = vec![Vec::new(); count(block)];
        for (g, &b) in block.iter().enumerate() {
            blocks[b].push(self.node(g));
        }
        Partition { blocks }
    }

    fn block_set(&self, block: &[usize], b: usize) -> String {
        let terms: Vec<String> = (0..self.len())
            .filter(|&g| block[g] == b)
            .take(3)
            .map(|g| {
                let (s, c) = self.side(g);
                format!("{s}:{c}")
            })
            .collect();
        format!("{{{}{}}}", terms.join(", "), if terms.len() == 3 { ", ..." } else { "" })
    }

    /// Walks down from a pair separated in the final partition to a one-step difference.
    fn witness(&self, history: &[Vec<usize>], matching: Matching, mut x: usize, mut y: usize) -> Witness {
        let mut path = Vec::new();
        loop {
            let level = history
                .iter()
                .position(|b| b[x] != b[y])
                .expect("pair is separated");
            let done = |path: Vec<String>, reason: String| Witness {
                path,
                left: self.node(x),
                right: self.node(y),
                reason,
            };
            if level == 0 {
                let reason = format!("states differ: {} vs {}", self.state(x).0, self.state(y).0);
                return done(path, reason);
            }
            let block = &history[level - 1];
            let (sx, sy) = (self.sig(x, block, matching), self.sig(y, block, matching));
            let only = |a: &Sig, b: &Sig| a.instant.iter().find(|m| !b.instant.contains(m)).copied();
            let next = match (only(&sx, &sy), only(&sy, &sx)) {
                (Some(m), _) => self.follow_instant(x, y, m, block, true),
                (None, Some(m)) => self.follow_instant(x, y, m, block, false),
                (None, None) => self.follow_stochastic(x, y, &sx, &sy, block),
            };
            match next {
                Ok((ev, nx, ny)) => {
                    path.push(ev);
                    (x, y) = (nx, ny);
                }
                Err(reason) => return done(path, reason),
            }
        }
    }

    /// One side moves on `ev` into block `b`, the other cannot; follows any
    /// move of the other side on `ev`.
    fn follow_instant(
        &self,
        x: usize,
        y: usize,
        (ev, b): (usize, usize),
        block: &[usize],
        on_left: bool,
    ) -> Result<(String, usize, usize), String> {
        let (mover, other) = if on_left { (x, y) } else { (y, x) };
        let name = self.events[ev].clone();
        let target = self.out[mover]
            .iter()
            .find(|e| e.event == ev && !e.stochastic && block[e.tgt] == b)
            .map(|e| e.tgt);
        let alt = self.out[other].iter().find(|e| e.event == ev && !e.stochastic);
        match (target, alt) {
            (Some(t), Some(e)) => Ok(if on_left { (name, t, e.tgt) } else { (name, e.tgt, t) }),
            _ => {
                let side = if on_left { "left" } else { "right" };
                Err(format!("only the {side} configuration can perform `{name}`"))
            }
        }
    }

    /// Rates into some block differ. When the total rates agree the
    /// difference lies in the targets, which are followed.
    fn follow_stochastic(
        &self,
        x: usize,
        y: usize,
        sx: &Sig,
        sy: &Sig,
        block: &[usize],
    ) -> Result<(String, usize, usize), String> {
        let Some(&(ev, b, _)) = sx
            .stochastic
            .iter()
            .chain(&sy.stochastic)
            .find(|m| !(sx.stochastic.contains(m) && sy.stochastic.contains(m)))
        else {
            return Err("stochastic moves differ".into());
        };
        let name = self.events[ev].clone();
        let (rx, ry) = (self.rate_into(x, &name, block, b), self.rate_into(y, &name, block, b));
        let total = |g: usize| {
            let m: usize = self.out[g].iter().filter(|e| e.stochastic && e.event == ev).map(|e| e.mult).sum();
            if m == 0 {
                Rate::zero()
            } else {
                self.rate(g, ev, m)
            }
        };
        let differs = format!(
            "rate of `{name}` into block {} differs: {rx} vs {ry}",
            self.block_set(block, b)
        );
        if total(x).key() != total(y).key() || total(x).coeff == 0.0 {
            return Err(differs);
        }
        let on_left = rx.coeff > ry.coeff;
        let (mover, other) = if on_left { (x, y) } else { (y, x) };
        let t = self.out[mover]
            .iter()
            .find(|e| e.stochastic && e.event == ev && block[e.tgt] == b)
            .map(|e| e.tgt);
        let alt = self.out[other]
            .iter()
            .find(|e| e.stochastic && e.event == ev && block[e.tgt] != b)
            .map(|e| e.tgt);
        match (t, alt) {
            (Some(t), Some(a)) => Ok(if on_left { (name, t, a) } else { (name, a, t) }),
            _ => Err(differs),
        }
    }

    fn rate_into(&self, g: usize, event: &str, block: &[usize], b: usize) -> Rate {
        let mult: usize = self.out[g]
            .iter()
            .filter(|e| e.stochastic && self.events[e.event] == event && block[e.tgt] == b)
            .map(|e| e.mult)
            .sum();
        let ev = self.events.iter().position(|e| e == event).expect("known event");
        if mult == 0 {
            Rate::zero()
        } else {
            self.rate(g, ev, mult)
        }
    }

    /// Event conditions the two models must share; `None` when compatible.
    fn condition_mismatch(&self, matching: Matching) -> Result<Option<String>, EquivError> {
        let (a, b) = (&self.lts[0].model, &self.lts[1].model);
        let va: BTreeSet<&String> = a.variables.iter().collect();
        let vb: BTreeSet<&String> = b.variables.iter().collect();
        if va != vb {
            return Ok(Some("the models have different variables".into()));
        }
        if a.all_events() != b.all_events() {
            return Ok(Some("the models have different events".into()));
        }
        for (e, ca) in &a.ec {
            let Some(cb) = b.ec.get(e) else {
                return Ok(Some(format!("`{e}` has no event condition in model 1")));
            };
            if a.is_stochastic(e) != b.is_stochastic(e) {
                return Ok(Some(format!("`{e}` is stochastic in only one model")));
            }
            if reset_key(&ca.reset) != reset_key(&cb.reset) {
                return Ok(Some(format!("resets of `{e}` differ: {} vs {}", ca.reset, cb.reset)));
            }
            match (&ca.activation, &cb.activation) {
                (Activation::Guard(ga), Activation::Guard(gb)) => {
                    if ga.normalized() != gb.normalized() {
                        return Ok(Some(format!("guards of `{e}` differ: {ga} vs {gb}")));
                    }
                }
                (Activation::Rate(ra), Activation::Rate(rb)) => {
                    let (ra, rb) = (Rate::unit(ra), Rate::unit(rb));
                    let equal = match matching {
                        Matching::System => ra == rb,
                        Matching::Lumped => ra.compare(&rb, e)?,
                    };
                    if !equal && matching == Matching::System {
                        return Ok(Some(format!("rates of `{e}` differ: {ra} vs {rb}")));
                    }
                }
                (x, y) => {
                    if x.to_string() != y.to_string() {
                        return Ok(Some(format!("activations of `{e}` differ: {x} vs {y}")));
                    }
                }
            }
        }
        Ok(None)
    }

    fn check(&self, kind: StateEquivKind, matching: Matching) -> Result<BisimReport, EquivError> {
        let mismatch = self.condition_mismatch(matching)?;
        let history = self.refine(self.state_classes(kind)?, matching);
        let fin = history.last().expect("nonempty");
        let (x, y) = (self.init(0), self.init(1));
        let witness = match mismatch {
            Some(reason) => Some(Witness {
                path: Vec::new(),
                left: self.node(x),
                right: self.node(y),
                reason,
            }),
            None if fin[x] != fin[y] => Some(self.witness(&history, matching, x, y)),
            None => None,
        };
        Ok(BisimReport {
            bisimilar: witness.is_none(),
            equivalence: (matching == Matching::Lumped).then_some(kind),
            partition: self.partition(fin),
            witness,
        })
    }

    /// Leaves of the controller, the right operand of the top cooperation.
    fn controller_leaves(&self, g: usize) -> Vec<String> {
        let t = self.term(g);
        let con = match t {
            Term::Coop(_, _, con) => &**con,
            t => t,
        };
        con.coop_leaves().iter().map(|l| l.to_string()).collect()
    }

    fn verify_blocks(&self, block: &[usize], pairs: &[(usize, usize, String, String)]) -> Verification {
        for (x, y, l, r) in pairs {
            let (sx, sy) = (self.sig(*x, block, Matching::Lumped), self.sig(*y, block, Matching::Lumped));
            if sx != sy {
                let reason = describe(self, &sx, &sy);
                return Verification::Violation {
                    left: l.clone(),
                    right: r.clone(),
                    reason,
                };
            }
        }
        Verification::Verified
    }
}

fn describe(u: &Union, a: &Sig, b: &Sig) -> String {
    if let Some((e, _)) = a.instant.iter().find(|m| !b.instant.contains(m)) {
        return format!("`{}` from the left has no match into the same class", u.events[*e]);
    }
    if let Some((e, _)) = b.instant.iter().find(|m| !a.instant.contains(m)) {
        return format!("`{}` from the right has no match into the same class", u.events[*e]);
    }
    match a
        .stochastic
        .iter()
        .chain(&b.stochastic)
        .find(|m| !(a.stochastic.contains(m) && b.stochastic.contains(m)))
    {
        Some((e, ..)) => format!("aggregate rates of `{}` differ", u.events[*e]),
        None => "moves differ".into(),
    }
}

fn reset_key(r: &crate::ast::Reset) -> BTreeMap<String, String> {
    r.atoms
        .iter()
        .map(|a| (a.var.clone(), canonical_key(&a.value)))
        .collect()
}

fn count(block: &[usize]) -> usize {
    block.iter().max().map_or(0, |m| m + 1)
}

/// Renumbers blocks in order of first occurrence.
fn canonical(block: &[usize]) -> Vec<usize> {
    let mut ids: HashMap<usize, usize> = HashMap::new();
    block
        .iter()
        .map(|b| {
            let n = ids.len();
            *ids.entry(*b).or_insert(n)
        })
        .collect()
}

/// Strong bisimulation with exact state matching and per-transition rates.
pub fn check_system_bisim(p: &Model, q: &Model) -> Result<BisimReport, EquivError> {
    Union::new(p, q)?.check(StateEquivKind::Equality, Matching::System)
}

/// Coarsest stochastic system bisimulation with respect to `kind`.
pub fn check_stochastic_system_bisim(p: &Model, q: &Model, kind: StateEquivKind) -> Result<BisimReport, EquivError> {
    Union::new(p, q)?.check(kind, Matching::Lumped)
}

/// Total rate of stochastic event `event` from `config` into `block`.
pub fn rate_to_class(lts: &Lts, config: ConfigId, event: &str, block: &BTreeSet<ConfigId>) -> Result<Rate, EquivError> {
    let mult: usize = lts
        .outgoing(config)
        .filter(|t| t.event == event && block.contains(&t.tgt))
        .map(|t| t.multiplicity)
        .sum();
    if mult == 0 {
        return Ok(Rate::zero());
    }
    Ok(unit_rate(&lts.model, event)?.scaled(mult))
}

/// Checks that `pairs` of controller derivatives form a stochastic system
/// bisimulation. A pair relates configurations whose controllers start with
/// the given components, whose remaining controller components coincide and
/// whose states are equivalent.
pub fn verify_relation(
    p: &Model,
    q: &Model,
    pairs: &[(Term, Term)],
    kind: StateEquivKind,
) -> Result<Verification, EquivError> {
    let u = Union::new(p, q)?;
    if let Some(reason) = u.condition_mismatch(Matching::Lumped)? {
        return Ok(Verification::Violation {
            left: String::new(),
            right: String::new(),
            reason,
        });
    }
    let classes = u.state_classes(kind)?;
    let leaves: Vec<Vec<String>> = (0..u.len()).map(|g| u.controller_leaves(g)).collect();
    let mut parent: Vec<usize> = (0..u.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    let mut related = Vec::new();
    for (a, b) in pairs {
        let la: Vec<String> = a.coop_leaves().iter().map(|t| t.to_string()).collect();
        let lb: Vec<String> = b.coop_leaves().iter().map(|t| t.to_string()).collect();
        let matches = |side: usize, want: &[String]| -> Vec<usize> {
            (0..u.len())
                .filter(|&g| u.side(g).0 == side && leaves[g].starts_with(want))
                .collect()
        };
        let (ma, mb) = (matches(0, &la), matches(1, &lb));
        if ma.is_empty() {
            return Err(EquivError::UnknownDerivative {
                model: 0,
                term: a.to_string(),
            });
        }
        if mb.is_empty() {
            return Err(EquivError::UnknownDerivative {
                model: 1,
                term: b.to_string(),
            });
        }
        let before = related.len();
        for &x in &ma {
            for &y in &mb {
                if leaves[x][la.len()..] == leaves[y][lb.len()..] && classes[x] == classes[y] {
                    related.push((x, y, a.to_string(), b.to_string()));
                    let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                    parent[rx] = ry;
                }
            }
        }
        if related.len() == before {
            return Ok(Verification::Violation {
                left: a.to_string(),
                right: b.to_string(),
                reason: "no configurations with equivalent states".into(),
            });
        }
    }
    let roots: Vec<usize> = (0..u.len()).map(|g| find(&mut parent, g)).collect();
    Ok(u.verify_blocks(&canonical(&roots), &related))
}

/// Checks that `partition` groups equivalent states and is stable.
pub fn verify_partition(
    p: &Model,
    q: &Model,
    partition: &Partition,
    kind: StateEquivKind,
) -> Result<Verification, EquivError> {
    let u = Union::new(p, q)?;
    let classes = u.state_classes(kind)?;
    let mut block = vec![usize::MAX; u.len()];
    let mut pairs = Vec::new();
    for (b, nodes) in partition.blocks.iter().enumerate() {
        let gs: Vec<usize> = nodes.iter().map(|n| n.model * u.offset + n.config).collect();
        for &g in &gs {
            block[g] = b;
        }
        for &g in &gs[1..] {
            let (x, y) = (gs[0], g);
            if classes[x] != classes[y] {
                return Ok(Verification::Violation {
                    left: nodes[0].term.clone(),
                    right: u.node(y).term,
                    reason: "states are not equivalent".into(),
                });
            }
            pairs.push((x, y, nodes[0].term.clone(), u.node(y).term));
        }
    }
    if block.contains(&usize::MAX) {
        return Ok(Verification::Violation {
            left: String::new(),
            right: String::new(),
            reason: "partition does not cover every configuration".into(),
        });
    }
    Ok(u.verify_blocks(&block, &pairs))
}

#[cfg(test)]
use rand::{Rng, SeedableRng};
#[cfg(test)]
use rand_chacha::ChaCha8Rng;

#[cfg(test)]
pub(crate) fn refinement_schedules_agree(
    p: &Model,
    q: &Model,
    kind: StateEquivKind,
    seed: u64,
) -> Result<bool, EquivError> {
    let u = Union::new(p, q)?;
    let classes = u.state_classes(kind)?;
    let reference = u.refine(classes.clone(), Matching::Lumped).pop().expect("nonempty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |n: usize| rng.random_range(0..n.max(1));
    Ok(u.refine_scheduled(classes, Matching::Lumped, &mut pick) == reference)
}
