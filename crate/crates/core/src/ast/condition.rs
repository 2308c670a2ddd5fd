use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{EvalError, Expr, Valuation};
use super::normalize::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Le,
    Ge,
    Lt,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
        }
    }
}

/// Boolean formula over variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Guard {
    True,
    False,
    Cmp(Expr, CmpOp, Expr),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

impl Guard {
    pub fn cmp(a: Expr, op: CmpOp, b: Expr) -> Guard {
        Guard::Cmp(a, op, b)
    }

    pub fn and(a: Guard, b: Guard) -> Guard {
        match (a, b) {
            (Guard::True, g) | (g, Guard::True) => g,
            (a, b) => Guard::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn eval(&self, env: &dyn Valuation) -> Result<bool, EvalError> {
        Ok(match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Cmp(a, op, b) => op.holds(a.eval(env)?, b.eval(env)?),
            Guard::And(a, b) => a.eval(env)? && b.eval(env)?,
            Guard::Or(a, b) => a.eval(env)? || b.eval(env)?,
            Guard::Not(a) => !a.eval(env)?,
        })
    }

    pub fn visit_exprs(&self, f: &mut dyn FnMut(&Expr)) {
        match self {
            Guard::True | Guard::False => {}
            Guard::Cmp(a, _, b) => {
                f(a);
                f(b);
            }
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.visit_exprs(f);
                b.visit_exprs(f);
            }
            Guard::Not(a) => a.visit_exprs(f),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| out.extend(e.free_vars()));
        out
    }

    pub fn map_exprs(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Guard {
        match self {
            Guard::True => Guard::True,
            Guard::False => Guard::False,
            Guard::Cmp(a, op, b) => Guard::Cmp(f(a), *op, f(b)),
            Guard::And(a, b) => Guard::And(Box::new(a.map_exprs(f)), Box::new(b.map_exprs(f))),
            Guard::Or(a, b) => Guard::Or(Box::new(a.map_exprs(f)), Box::new(b.map_exprs(f))),
            Guard::Not(a) => Guard::Not(Box::new(a.map_exprs(f))),
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Guard> {
        match self {
            Guard::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            Guard::True => Vec::new(),
            g => vec![g],
        }
    }

    /// Canonical form: comparisons become `e op 0` with `op ∈ {=, >=, >}`,
    /// conjunctions and disjunctions are flattened, sorted and deduplicated.
    pub fn normalized(&self) -> Guard {
        match self {
            Guard::True | Guard::False => self.clone(),
            Guard::Cmp(a, op, b) => {
                let d = normalize(&Expr::sub(a.clone(), b.clone()));
                let neg = normalize(&Expr::Neg(Box::new(d.clone())));
                let (d, op) = match op {
                    CmpOp::Lt => (neg, CmpOp::Gt),
                    CmpOp::Le => (neg, CmpOp::Ge),
                    CmpOp::Eq => {
                        if neg.to_string() < d.to_string() {
                            (neg, CmpOp::Eq)
                        } else {
                            (d, CmpOp::Eq)
                        }
                    }
                    op => (d, *op),
                };
                if let Some(v) = d.as_num() {
                    return if op.holds(v, 0.0) { Guard::True } else { Guard::False };
                }
                Guard::Cmp(d, op, Expr::Num(0.0))
            }
            Guard::And(..) => {
                let mut parts = Vec::new();
                self.flatten(true, &mut parts);
                let mut keys = BTreeSet::new();
                let mut kept = Vec::new();
                for p in parts {
                    match p.normalized() {
                        Guard::True => {}
                        Guard::False => return Guard::False,
                        g => {
                            if keys.insert(g.to_string()) {
                                kept.push(g);
                            }
                        }
                    }
                }
                kept.sort_by_key(|g| g.to_string());
                fold(kept, Guard::True, |a, b| Guard::And(Box::new(a), Box::new(b)))
            }
            Guard::Or(..) => {
                let mut parts = Vec::new();
                self.flatten(false, &mut parts);
                let mut keys = BTreeSet::new();
                let mut kept = Vec::new();
                for p in parts {
                    match p.normalized() {
                        Guard::False => {}
                        Guard::True => return Guard::True,
                        g => {
                            if keys.insert(g.to_string()) {
                                kept.push(g);
                            }
                        }
                    }
                }
                kept.sort_by_key(|g| g.to_string());
                fold(kept, Guard::False, |a, b| Guard::Or(Box::new(a), Box::new(b)))
            }
            Guard::Not(a) => match a.normalized() {
                Guard::True => Guard::False,
                Guard::False => Guard::True,
                g => Guard::Not(Box::new(g)),
            },
        }
    }

    fn flatten<'a>(&'a self, conj: bool, out: &mut Vec<&'a Guard>) {
        match (self, conj) {
            (Guard::And(a, b), true) | (Guard::Or(a, b), false) => {
                a.flatten(conj, out);
                b.flatten(conj, out);
            }
            _ => out.push(self),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Guard::Or(..) => 1,
            Guard::And(..) => 2,
            Guard::Not(_) => 3,
            _ => 4,
        }
    }
}

fn fold(parts: Vec<Guard>, empty: Guard, join: impl Fn(Guard, Guard) -> Guard) -> Guard {
    let mut it = parts.into_iter();
    match it.next() {
        None => empty,
        Some(first) => it.fold(first, join),
    }
}

fn fmt_guard_child(g: &Guard, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if g.precedence() < min {
        write!(f, "({g})")
    } else {
        write!(f, "{g}")
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::True => f.write_str("true"),
            Guard::False => f.write_str("false"),
            Guard::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Guard::And(a, b) => {
                fmt_guard_child(a, 2, f)?;
                f.write_str(" and ")?;
                fmt_guard_child(b, 3, f)
            }
            Guard::Or(a, b) => {
                fmt_guard_child(a, 1, f)?;
                f.write_str(" or ")?;
                fmt_guard_child(b, 2, f)
            }
            Guard::Not(a) => {
                f.write_str("not ")?;
                fmt_guard_child(a, 3, f)
            }
        }
    }
}

/// One assignment `V ≈ θ`; deterministic when θ has no random term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetAtom {
    pub var: String,
    pub value: Expr,
}

impl fmt::Display for ResetAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.has_random() {
            write!(f, "{} ~ {}", self.var, self.value)
        } else {
            write!(f, "{}' = {}", self.var, self.value)
        }
    }
}

/// Conjunction of reset atoms; the empty conjunction is `true`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reset {
    pub atoms: Vec<ResetAtom>,
}

impl Reset {
    pub fn identity() -> Reset {
        Reset::default()
    }

    pub fn assign(var: impl Into<String>, value: Expr) -> ResetAtom {
        ResetAtom {
            var: var.into(),
            value,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn get(&self, var: &str) -> Option<&Expr> {
        self.atoms.iter().find(|a| a.var == var).map(|a| &a.value)
    }

    pub fn assigned(&self) -> BTreeSet<String> {
        self.atoms.iter().map(|a| a.var.clone()).collect()
    }

    /// Conjunction; fails with the variable name when both sides assign it differently.
    pub fn conj(&self, other: &Reset) -> Result<Reset, String> {
        let mut out = self.clone();
        for atom in &other.atoms {
            match out.get(&atom.var) {
                None => out.atoms.push(atom.clone()),
                Some(v) => {
                    if normalize(v) != normalize(&atom.value) {
                        return Err(atom.var.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Atoms sorted by variable with normalized right-hand sides.
    pub fn normalized(&self) -> Reset {
        let mut atoms: Vec<ResetAtom> = self
            .atoms
            .iter()
            .map(|a| ResetAtom {
                var: a.var.clone(),
                value: normalize(&a.value),
            })
            .collect();
        atoms.sort_by(|a, b| a.var.cmp(&b.var));
        Reset { atoms }
    }

    pub fn has_random(&self) -> bool {
        self.atoms.iter().any(|a| a.value.has_random())
    }
}

impl fmt::Display for Reset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// First component of an event condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    /// Instantaneous events.
    Guard(Guard),
    /// Stochastic events with exponential delay.
    Rate(Expr),
    /// Stochastic events with a general duration; removed by expansion.
    Duration(Expr),
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Guard(g) => write!(f, "{g}"),
            Activation::Rate(e) | Activation::Duration(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCondition {
    pub activation: Activation,
    pub reset: Reset,
}

impl fmt::Display for EventCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.activation, self.reset)
    }
}
