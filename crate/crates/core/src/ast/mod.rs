//! Model data types, expressions and distributions.

pub mod condition;
pub mod expand;
pub mod expr;
pub mod normalize;
pub mod sample;
pub mod term;
pub mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use condition::{Activation, CmpOp, EventCondition, Guard, Reset, ResetAtom};
pub use expr::{BinOp, Distribution, EvalError, Expr, Func, Valuation};
pub use normalize::{canonical_key, normalize};
pub use term::{Activity, ITypeRef, Sync, Term};

pub const INIT: &str = "init";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Instantaneous,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefKind {
    Subcomponent,
    Controller,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Definition {
    pub kind: DefKind,
    pub name: String,
    pub params: Vec<String>,
    pub body: Term,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ITypeDef {
    pub params: Vec<String>,
    pub body: Expr,
}

/// A stochastic HYPE model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Model {
    /// Named constants; may reference other parameters and variables.
    pub params: BTreeMap<String, Expr>,
    pub variables: Vec<String>,
    /// Declared events other than `init`.
    pub events: BTreeMap<String, EventKind>,
    pub definitions: Vec<Definition>,
    /// Influence name to variable.
    pub iv: BTreeMap<String, String>,
    pub ec: BTreeMap<String, EventCondition>,
    pub itypes: BTreeMap<String, ITypeDef>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` is defined in terms of itself")]
    ParameterCycle(String),
    #[error("fresh name `{0}` clashes with an existing name")]
    NameClash(String),
    #[error("model has no system definition")]
    MissingSystem,
    #[error("system must have the form `Sigma <*> init.Con`: {0}")]
    MalformedSystem(String),
    #[error("unknown definition `{0}`")]
    UnknownDefinition(String),
    #[error("strength `{expr}` of influence `{influence}` is not constant")]
    NonConstantStrength { influence: String, expr: String },
    #[error("missing influence type definition `{0}`")]
    MissingInfluenceTypeDef(String),
    #[error("influence `{0}` has no target variable")]
    MissingInfluenceVariable(String),
    #[error("event `{0}` has no event condition")]
    MissingEventCondition(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

impl Model {
    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name == name)
    }

    pub fn definitions_of(&self, kind: DefKind) -> impl Iterator<Item = &Definition> {
        self.definitions.iter().filter(move |d| d.kind == kind)
    }

    /// The controlled system: the last `system` definition.
    pub fn system(&self) -> Option<&Definition> {
        self.definitions_of(DefKind::System).last()
    }

    /// Splits the system into uncontrolled system, synchronisation and controller.
    pub fn split_system(&self) -> Result<(&Term, &Sync, &Term), ModelError> {
        let sys = self.system().ok_or(ModelError::MissingSystem)?;
        let mut body = &sys.body;
        // a system may name another system definition
        let mut seen = BTreeSet::new();
        while let Term::Const { name, .. } = body {
            if !seen.insert(name.clone()) {
                return Err(ModelError::MalformedSystem(format!("`{name}` is cyclic")));
            }
            body = &self
                .definition(name)
                .ok_or_else(|| ModelError::UnknownDefinition(name.clone()))?
                .body;
        }
        match body {
            Term::Coop(sigma, sync, con) => match &**con {
                Term::Prefix {
                    event,
                    activity: None,
                    next,
                } if event == INIT => Ok((sigma, sync, next)),
                _ => Err(ModelError::MalformedSystem(
                    "right operand is not `init.Con`".into(),
                )),
            },
            _ => Err(ModelError::MalformedSystem(
                "top level is not a cooperation".into(),
            )),
        }
    }

    pub fn event_kind(&self, event: &str) -> Option<EventKind> {
        if event == INIT {
            Some(EventKind::Instantaneous)
        } else {
            self.events.get(event).copied()
        }
    }

    pub fn is_stochastic(&self, event: &str) -> bool {
        self.event_kind(event) == Some(EventKind::Stochastic)
    }

    /// All events including `init`.
    pub fn all_events(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = self.events.keys().cloned().collect();
        s.insert(INIT.to_string());
        s
    }

    /// Body of an influence type with formal parameters replaced by the arguments.
    pub fn itype_body(&self, itype: &ITypeRef) -> Result<Expr, ModelError> {
        let def = self
            .itypes
            .get(&itype.name)
            .ok_or_else(|| ModelError::MissingInfluenceTypeDef(itype.name.clone()))?;
        if def.params.len() != itype.args.len() {
            return Err(ModelError::MissingInfluenceTypeDef(itype.to_string()));
        }
        let map: BTreeMap<&str, &str> = def
            .params
            .iter()
            .map(String::as_str)
            .zip(itype.args.iter().map(String::as_str))
            .collect();
        Ok(def
            .body
            .substitute(&|n| map.get(n).map(|a| Expr::Var(a.to_string()))))
    }

    /// Replaces parameters by their definitions, transitively, and folds literals.
    pub fn resolve(&self, e: &Expr) -> Result<Expr, ModelError> {
        let mut stack = Vec::new();
        self.resolve_inner(e, &mut stack)
    }

    fn resolve_inner(&self, e: &Expr, stack: &mut Vec<String>) -> Result<Expr, ModelError> {
        let mut err = None;
        let out = e.map(&mut |x| {
            let name = match &x {
                Expr::Var(n) if err.is_none() && self.params.contains_key(n) => n.clone(),
                _ => return x,
            };
            if stack.contains(&name) {
                err = Some(ModelError::ParameterCycle(name));
                return x;
            }
            stack.push(name.clone());
            let r = self.resolve_inner(&self.params[&name], stack);
            stack.pop();
            r.unwrap_or_else(|e| {
                err = Some(e);
                x
            })
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out.fold_constants()),
        }
    }

    /// Copy of the model with every parameter substituted and removed.
    pub fn instantiate(&self) -> Result<Model, ModelError> {
        let mut m = self.clone();
        m.params.clear();
        let r = |e: &Expr| self.resolve(e);
        let r_guard = |g: &Guard| -> Result<Guard, ModelError> {
            let mut err = None;
            let out = g.map_exprs(&mut |e| match r(e) {
                Ok(v) => v,
                Err(x) => {
                    err = Some(x);
                    e.clone()
                }
            });
            err.map_or(Ok(out), Err)
        };
        for d in &mut m.definitions {
            d.body = resolve_term(&d.body, &r)?;
        }
        for ec in m.ec.values_mut() {
            ec.activation = match &ec.activation {
                Activation::Guard(g) => Activation::Guard(r_guard(g)?),
                Activation::Rate(e) => Activation::Rate(r(e)?),
                Activation::Duration(e) => Activation::Duration(r(e)?),
            };
            for a in &mut ec.reset.atoms {
                a.value = r(&a.value)?;
            }
        }
        for t in m.itypes.values_mut() {
            t.body = r(&t.body)?;
        }
        Ok(m)
    }

    /// Copy with parameter `name` bound to `value`.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Model, ModelError> {
        if !self.params.contains_key(name) {
            return Err(ModelError::UnknownParameter(name.to_string()));
        }
        let mut m = self.clone();
        m.params.insert(name.to_string(), Expr::Num(value));
        Ok(m)
    }

    /// Influence names used in activities.
    pub fn influences(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for d in &self.definitions {
            d.body.visit(&mut |t| {
                if let Term::Prefix {
                    activity: Some(a), ..
                } = t
                {
                    out.insert(a.influence.clone());
                }
            });
        }
        out
    }
}

fn resolve_term(t: &Term, r: &dyn Fn(&Expr) -> Result<Expr, ModelError>) -> Result<Term, ModelError> {
    Ok(match t {
        Term::Nil | Term::Const { .. } => t.clone(),
        Term::Prefix {
            event,
            activity,
            next,
        } => Term::Prefix {
            event: event.clone(),
            activity: match activity {
                None => None,
                Some(a) => Some(Activity {
                    influence: a.influence.clone(),
                    strength: r(&a.strength)?,
                    itype: a.itype.clone(),
                }),
            },
            next: Box::new(resolve_term(next, r)?),
        },
        Term::Choice(a, b) => Term::choice(resolve_term(a, r)?, resolve_term(b, r)?),
        Term::Coop(a, s, b) => Term::coop(resolve_term(a, r)?, s.clone(), resolve_term(b, r)?),
    })
}
