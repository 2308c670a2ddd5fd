use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::Expr;

/// Influence type applied to parameter variables, e.g. `linear(W1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ITypeRef {
    pub name: String,
    pub args: Vec<String>,
}

impl ITypeRef {
    pub fn new(name: impl Into<String>, args: &[&str]) -> ITypeRef {
        ITypeRef {
            name: name.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for ITypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(", "))?;
        }
        Ok(())
    }
}

/// `(ι, r, I(𝒲))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub influence: String,
    pub strength: Expr,
    pub itype: ITypeRef,
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.influence, self.strength, self.itype)
    }
}

/// Synchronisation set of a cooperation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sync {
    /// `<*>`: all events shared by both sides.
    Shared,
    /// `<a, b>`; the empty set is written `||`.
    Set(BTreeSet<String>),
}

impl Sync {
    pub fn none() -> Sync {
        Sync::Set(BTreeSet::new())
    }
}

impl fmt::Display for Sync {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sync::Shared => f.write_str("<*>"),
            Sync::Set(s) if s.is_empty() => f.write_str("||"),
            Sync::Set(s) => {
                f.write_str("<")?;
                for (i, e) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(e)?;
                }
                f.write_str(">")
            }
        }
    }
}

/// Process term shared by subcomponents, controllers and systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    Nil,
    Prefix {
        event: String,
        activity: Option<Activity>,
        next: Box<Term>,
    },
    Choice(Box<Term>, Box<Term>),
    Coop(Box<Term>, Sync, Box<Term>),
    Const { name: String, args: Vec<String> },
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const {
            name: name.into(),
            args: Vec::new(),
        }
    }

    pub fn prefix(event: impl Into<String>, activity: Option<Activity>, next: Term) -> Term {
        Term::Prefix {
            event: event.into(),
            activity,
            next: Box::new(next),
        }
    }

    pub fn choice(a: Term, b: Term) -> Term {
        Term::Choice(Box::new(a), Box::new(b))
    }

    pub fn coop(a: Term, sync: Sync, b: Term) -> Term {
        Term::Coop(Box::new(a), sync, Box::new(b))
    }

    /// Summands of a (possibly nested) choice.
    pub fn summands(&self) -> Vec<&Term> {
        match self {
            Term::Choice(a, b) => {
                let mut v = a.summands();
                v.extend(b.summands());
                v
            }
            t => vec![t],
        }
    }

    /// Operands of nested cooperations, left to right.
    pub fn coop_leaves(&self) -> Vec<&Term> {
        match self {
            Term::Coop(a, _, b) => {
                let mut v = a.coop_leaves();
                v.extend(b.coop_leaves());
                v
            }
            t => vec![t],
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Term)) {
        f(self);
        match self {
            Term::Nil | Term::Const { .. } => {}
            Term::Prefix { next, .. } => next.visit(f),
            Term::Choice(a, b) | Term::Coop(a, _, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Events occurring syntactically in the term (not following constants).
    pub fn local_events(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |t| {
            if let Term::Prefix { event, .. } = t {
                out.insert(event.clone());
            }
            if let Term::Coop(_, Sync::Set(s), _) = t {
                out.extend(s.iter().cloned());
            }
        });
        out
    }

    pub fn constants(&self) -> Vec<(String, Vec<String>)> {
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if let Term::Const { name, args } = t {
                out.push((name.clone(), args.clone()));
            }
        });
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Term::Coop(..) => 1,
            Term::Choice(..) => 2,
            Term::Prefix { .. } => 3,
            _ => 4,
        }
    }
}

fn fmt_term_child(t: &Term, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if t.precedence() < min {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Nil => f.write_str("0"),
            Term::Const { name, args } => {
                f.write_str(name)?;
                if !args.is_empty() {
                    write!(f, "({})", args.join(", "))?;
                }
                Ok(())
            }
            Term::Prefix {
                event,
                activity,
                next,
            } => {
                f.write_str(event)?;
                if let Some(a) = activity {
                    write!(f, ":{a}")?;
                }
                f.write_str(".")?;
                fmt_term_child(next, 3, f)
            }
            Term::Choice(a, b) => {
                fmt_term_child(a, 2, f)?;
                f.write_str(" + ")?;
                fmt_term_child(b, 3, f)
            }
            Term::Coop(a, s, b) => {
                fmt_term_child(a, 1, f)?;
                write!(f, " {s} ")?;
                fmt_term_child(b, 2, f)
            }
        }
    }
}
