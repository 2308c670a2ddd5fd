use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use super::Tdsha;
use crate::ast::{canonical_key, Expr, Guard, Reset};

/// Mode bijection from the first automaton onto the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Isomorphism {
    pub mapping: Vec<usize>,
}

#[derive(Default)]
struct Keys {
    labels: HashMap<String, usize>,
    guards: HashMap<usize, String>,
    resets: HashMap<usize, String>,
    exprs: HashMap<usize, String>,
    // keeps cached addresses alive
    hold: (Vec<Arc<Guard>>, Vec<Arc<Reset>>, Vec<Arc<Expr>>),
}

impl Keys {
    fn guard(&mut self, g: &Arc<Guard>) -> String {
        let p = Arc::as_ptr(g) as usize;
        if let Some(k) = self.guards.get(&p) {
            return k.clone();
        }
        self.hold.0.push(g.clone());
        let k = g.normalized().to_string();
        self.guards.insert(p, k.clone());
        k
    }

    fn reset(&mut self, r: &Arc<Reset>) -> String {
        let p = Arc::as_ptr(r) as usize;
        if let Some(k) = self.resets.get(&p) {
            return k.clone();
        }
        self.hold.1.push(r.clone());
        let k = r.normalized().to_string();
        self.resets.insert(p, k.clone());
        k
    }

    fn expr(&mut self, e: &Arc<Expr>) -> String {
        let p = Arc::as_ptr(e) as usize;
        if let Some(k) = self.exprs.get(&p) {
            return k.clone();
        }
        self.hold.2.push(e.clone());
        let k = canonical_key(e);
        self.exprs.insert(p, k.clone());
        k
    }

    fn label(&mut self, s: String) -> usize {
        let n = self.labels.len();
        *self.labels.entry(s).or_insert(n)
    }
}

/// Edge multisets and mode signatures of one automaton.
struct Graph {
    /// `src -> tgt -> label -> count`
    out: Vec<BTreeMap<usize, BTreeMap<usize, usize>>>,
    inc: Vec<BTreeMap<usize, BTreeMap<usize, usize>>>,
    sig: Vec<usize>,
    init: usize,
}

fn graph(t: &Tdsha, keys: &mut Keys, sigs: &mut HashMap<String, usize>) -> Graph {
    let n = t.modes.len();
    let mut out: Vec<BTreeMap<usize, BTreeMap<usize, usize>>> = vec![BTreeMap::new(); n];
    let mut inc: Vec<BTreeMap<usize, BTreeMap<usize, usize>>> = vec![BTreeMap::new(); n];
    let mut add = |src: usize, tgt: usize, label: usize| {
        *out[src].entry(tgt).or_default().entry(label).or_default() += 1;
        *inc[tgt].entry(src).or_default().entry(label).or_default() += 1;
    };
    for d in &t.instantaneous {
        let s = format!(
            "d|{}|{}|{}|{}",
            d.event,
            keys.guard(&d.guard),
            keys.reset(&d.reset),
            d.weight
        );
        add(d.src, d.tgt, keys.label(s));
    }
    for d in &t.stochastic {
        let s = format!(
            "s|{}|{}|{}|{}",
            d.event,
            keys.guard(&d.guard),
            keys.reset(&d.reset),
            keys.expr(&d.rate)
        );
        add(d.src, d.tgt, keys.label(s));
    }
    let mut flows: Vec<Vec<String>> = vec![Vec::new(); n];
    for c in &t.continuous {
        let mut st: Vec<String> = c.stoich.iter().map(|(v, k)| format!("{v}:{k}")).collect();
        st.sort();
        flows[c.mode].push(format!("{}|{}", st.join(","), keys.expr(&c.rate)));
    }
    let mut sig = Vec::with_capacity(n);
    for q in 0..n {
        flows[q].sort();
        let summarize = |m: &BTreeMap<usize, BTreeMap<usize, usize>>, self_loop: usize| {
            let mut acc: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
            for (other, labels) in m {
                for (l, c) in labels {
                    let e = acc.entry(*l).or_default();
                    if *other == self_loop {
                        e.1 += c;
                    } else {
                        e.0 += c;
                    }
                }
            }
            acc
        };
        let s = format!(
            "{:?}#{:?}#{:?}",
            flows[q],
            summarize(&out[q], q),
            summarize(&inc[q], q)
        );
        let k = sigs.len();
        sig.push(*sigs.entry(s).or_insert(k));
    }
    Graph {
        out,
        inc,
        sig,
        init: t.init_mode,
    }
}

struct Search<'g> {
    a: &'g Graph,
    b: &'g Graph,
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    f: Vec<usize>,
    g: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Search<'_> {
    fn consistent(&self, qa: usize, qb: usize) -> bool {
        let empty = BTreeMap::new();
        let (a, b) = (self.a, self.b);
        let check = |xa: &BTreeMap<usize, BTreeMap<usize, usize>>, xb: &BTreeMap<usize, BTreeMap<usize, usize>>| {
            for (ta, la) in xa {
                let tb = if *ta == qa { qb } else { self.f[*ta] };
                if tb == NONE {
                    continue;
                }
                if xb.get(&tb).unwrap_or(&empty) != la {
                    return false;
                }
            }
            for (tb, lb) in xb {
                let ta = if *tb == qb { qa } else { self.g[*tb] };
                if ta == NONE {
                    continue;
                }
                if xa.get(&ta).unwrap_or(&empty) != lb {
                    return false;
                }
            }
            true
        };
        check(&a.out[qa], &b.out[qb]) && check(&a.inc[qa], &b.inc[qb])
    }

    fn candidates(&self, qa: usize) -> Vec<usize> {
        let sig = self.a.sig[qa];
        let pool: Vec<usize> = if qa == self.a.init {
            vec![self.b.init]
        } else if let Some(p) = self.parent[qa] {
            self.b.out[self.f[p]].keys().copied().collect()
        } else {
            (0..self.b.sig.len()).collect()
        };
        pool.into_iter()
            .filter(|&qb| self.g[qb] == NONE && self.b.sig[qb] == sig)
            .collect()
    }

    fn run(&mut self, k: usize) -> bool {
        if k == self.order.len() {
            return true;
        }
        let qa = self.order[k];
        for qb in self.candidates(qa) {
            if !self.consistent(qa, qb) {
                continue;
            }
            self.f[qa] = qb;
            self.g[qb] = qa;
            if self.run(k + 1) {
                return true;
            }
            self.f[qa] = NONE;
            self.g[qb] = NONE;
        }
        false
    }
}

/// Searches for a bijection of modes preserving flows and labelled edges
/// with multiplicity; guards, resets and rates are compared after
/// normalization.
pub fn graph_isomorphic(a: &Tdsha, b: &Tdsha) -> Option<Isomorphism> {
    if a.modes.len() != b.modes.len()
        || a.continuous.len() != b.continuous.len()
        || a.instantaneous.len() != b.instantaneous.len()
        || a.stochastic.len() != b.stochastic.len()
    {
        return None;
    }
    let mut va = a.variables.clone();
    let mut vb = b.variables.clone();
    va.sort();
    vb.sort();
    if va != vb || a.events != b.events {
        return None;
    }
    let mut keys = Keys::default();
    if keys.reset(&a.init_reset) != keys.reset(&b.init_reset) {
        return None;
    }
    let mut sigs = HashMap::new();
    let ga = graph(a, &mut keys, &mut sigs);
    let gb = graph(b, &mut keys, &mut sigs);
    let mut sa = ga.sig.clone();
    let mut sb = gb.sig.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return None;
    }
    let n = a.modes.len();
    let mut order = Vec::with_capacity(n);
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut roots: Vec<usize> = vec![ga.init];
    roots.extend(0..n);
    for r in roots {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut queue = VecDeque::from([r]);
        order.push(r);
        while let Some(q) = queue.pop_front() {
            for &t in ga.out[q].keys() {
                if !seen[t] {
                    seen[t] = true;
                    parent[t] = Some(q);
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
    }
    let mut s = Search {
        a: &ga,
        b: &gb,
        order,
        parent,
        f: vec![NONE; n],
        g: vec![NONE; n],
    };
    s.run(0).then_some(Isomorphism { mapping: s.f })
}
