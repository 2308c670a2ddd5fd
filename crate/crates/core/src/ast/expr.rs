use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arithmetic expression over model variables and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Random(Box<Distribution>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Func {
    Min,
    Max,
    Sqrt,
    Ln,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
            Func::Exp => "exp",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "sqrt" => Func::Sqrt,
            "ln" => Func::Ln,
            "exp" => Func::Exp,
            _ => return None,
        })
    }
}

/// Random-variable term. Parameters are expressions evaluated at sampling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Uniform(Expr, Expr),
    /// Mean and variance.
    Normal(Expr, Expr),
    /// Mean and variance of the lognormal variable itself.
    LogNormal(Expr, Expr),
    /// Rate.
    Exponential(Expr),
    /// Shape and scale.
    Gamma(Expr, Expr),
    Dirac(Expr),
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Uniform(..) => "Uniform",
            Distribution::Normal(..) => "Normal",
            Distribution::LogNormal(..) => "LogNormal",
            Distribution::Exponential(..) => "Exponential",
            Distribution::Gamma(..) => "Gamma",
            Distribution::Dirac(..) => "Dirac",
        }
    }

    pub fn from_parts(name: &str, mut args: Vec<Expr>) -> Option<Distribution> {
        let expected = match name {
            "Uniform" | "Normal" | "LogNormal" | "Gamma" => 2,
            "Exponential" | "Dirac" | "delta" => 1,
            _ => return None,
        };
        if args.len() != expected {
            return None;
        }
        let second = if expected == 2 { args.pop() } else { None };
        let first = args.pop()?;
        Some(match name {
            "Uniform" => Distribution::Uniform(first, second?),
            "Normal" => Distribution::Normal(first, second?),
            "LogNormal" => Distribution::LogNormal(first, second?),
            "Gamma" => Distribution::Gamma(first, second?),
            "Exponential" => Distribution::Exponential(first),
            _ => Distribution::Dirac(first),
        })
    }

    pub fn params(&self) -> Vec<&Expr> {
        match self {
            Distribution::Uniform(a, b)
            | Distribution::Normal(a, b)
            | Distribution::LogNormal(a, b)
            | Distribution::Gamma(a, b) => vec![a, b],
            Distribution::Exponential(a) | Distribution::Dirac(a) => vec![a],
        }
    }

    pub fn map_params(&self, mut f: impl FnMut(&Expr) -> Expr) -> Distribution {
        match self {
            Distribution::Uniform(a, b) => Distribution::Uniform(f(a), f(b)),
            Distribution::Normal(a, b) => Distribution::Normal(f(a), f(b)),
            Distribution::LogNormal(a, b) => Distribution::LogNormal(f(a), f(b)),
            Distribution::Gamma(a, b) => Distribution::Gamma(f(a), f(b)),
            Distribution::Exponential(a) => Distribution::Exponential(f(a)),
            Distribution::Dirac(a) => Distribution::Dirac(f(a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("random term `{0}` cannot be evaluated deterministically")]
    RandomTerm(String),
    #[error("bad distribution parameter: {0}")]
    BadParameter(String),
    #[error("negative rate {value} for event `{event}`")]
    NegativeRate { event: String, value: f64 },
}

/// Source of variable values for evaluation.
pub trait Valuation {
    fn value(&self, name: &str) -> Option<f64>;
}

impl Valuation for HashMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Valuation for BTreeMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Valuation for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Valuation for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

/// Valuation with no bindings.
pub struct Empty;

impl Valuation for Empty {
    fn value(&self, _: &str) -> Option<f64> {
        None
    }
}

impl<F: Fn(&str) -> Option<f64>> Valuation for F {
    fn value(&self, name: &str) -> Option<f64> {
        self(name)
    }
}

pub(crate) fn apply_bin(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
        BinOp::Pow => {
            let r = a.powf(b);
            if r.is_nan() {
                return Err(EvalError::Domain(format!("{a}^{b}")));
            }
            r
        }
    })
}

pub(crate) fn apply_func(f: Func, args: &[f64]) -> Result<f64, EvalError> {
    Ok(match f {
        Func::Min => args[0].min(args[1]),
        Func::Max => args[0].max(args[1]),
        Func::Sqrt => {
            if args[0] < 0.0 {
                return Err(EvalError::Domain(format!("sqrt of negative {}", args[0])));
            }
            args[0].sqrt()
        }
        Func::Ln => {
            if args[0] <= 0.0 {
                return Err(EvalError::Domain(format!("ln of non-positive {}", args[0])));
            }
            args[0].ln()
        }
        Func::Exp => args[0].exp(),
    })
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Mul, a, b)
    }

    pub fn random(d: Distribution) -> Expr {
        Expr::Random(Box::new(d))
    }

    /// Evaluates without randomness; random terms are an error.
    pub fn eval(&self, env: &dyn Valuation) -> Result<f64, EvalError> {
        self.eval_with(env, &mut |d, _| Err(EvalError::RandomTerm(d.name().to_string())))
    }

    /// Evaluates, delegating random terms to `sample`.
    pub fn eval_with(
        &self,
        env: &dyn Valuation,
        sample: &mut dyn FnMut(&Distribution, &dyn Valuation) -> Result<f64, EvalError>,
    ) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(n) => env.value(n).ok_or_else(|| EvalError::UnboundVariable(n.clone())),
            Expr::Neg(e) => Ok(-e.eval_with(env, sample)?),
            Expr::Bin(op, a, b) => {
                let x = a.eval_with(env, sample)?;
                let y = b.eval_with(env, sample)?;
                apply_bin(*op, x, y)
            }
            Expr::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval_with(env, sample))
                    .collect::<Result<Vec<_>, _>>()?;
                apply_func(*f, &vals)
            }
            Expr::Random(d) => sample(d, env),
        }
    }

    pub fn has_random(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Random(_)) {
                found = true;
            }
        });
        found
    }

    /// Pre-order traversal, descending into distribution parameters.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(e) => e.visit(f),
            Expr::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            Expr::Random(d) => d.params().into_iter().for_each(|p| p.visit(f)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Var(n) = e {
                out.insert(n.clone());
            }
        });
        out
    }

    /// Bottom-up rewrite.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let inner = match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map(f))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.map(f)), Box::new(b.map(f))),
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(|a| a.map(f)).collect()),
            Expr::Random(d) => Expr::Random(Box::new(d.map_params(|p| p.map(f)))),
        };
        f(inner)
    }

    /// Replaces variables by expressions.
    pub fn substitute(&self, lookup: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        self.map(&mut |e| match &e {
            Expr::Var(n) => lookup(n).unwrap_or(e),
            _ => e,
        })
    }

    /// Folds subexpressions without variables or random terms into literals.
    pub fn fold_constants(&self) -> Expr {
        self.map(&mut |e| {
            let foldable = match &e {
                Expr::Neg(inner) => matches!(**inner, Expr::Num(_)),
                Expr::Bin(_, a, b) => matches!(**a, Expr::Num(_)) && matches!(**b, Expr::Num(_)),
                Expr::Call(_, args) => args.iter().all(|a| matches!(a, Expr::Num(_))),
                _ => false,
            };
            if foldable {
                if let Ok(v) = e.eval(&Empty) {
                    if v.is_finite() {
                        return Expr::Num(v);
                    }
                }
            }
            e
        })
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Num(v)
    }
}

pub(crate) fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.is_finite() {
        write!(f, "{v}")
    } else if v.is_nan() {
        write!(f, "(0/0)")
    } else if v > 0.0 {
        write!(f, "(1/0)")
    } else {
        write!(f, "(-1/0)")
    }
}

fn fmt_child(e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => fmt_num(*v, f),
            Expr::Var(n) => f.write_str(n),
            Expr::Neg(e) => {
                f.write_str("-")?;
                if matches!(**e, Expr::Num(_)) {
                    write!(f, "({e})")
                } else {
                    fmt_child(e, 4, f)
                }
            }
            Expr::Bin(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => ("^", 5, 4),
                };
                fmt_child(a, lp, f)?;
                f.write_str(sym)?;
                fmt_child(b, rp, f)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Random(d) => write!(f, "{d}"),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name())?;
        for (i, p) in self.params().into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}
