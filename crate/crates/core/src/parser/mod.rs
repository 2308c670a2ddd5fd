//! Text format for stochastic HYPE models.
//!
//! ```text
//! params    r_in = 20; max_B = 200;
//! variables B, T;
//! events    full, stoch on_in;
//! subcomponent
//!   Input =def on_in:(in, r_in, const).Input + full:(in, 0, const).Input
//!            + init:(in, 0, const).Input;
//! controller Con =def on_in.full.Con;
//! system Sys =def Input <*> init.Con;
//! iv in = B;
//! ec init = (true, B' = 0 and T' = 0);
//!    on_in = (0.4, true);
//!    full = (B = max_B, true);
//! types const = 1; linear(X) = X;
//! ```
//!
//! Sections may also be wrapped in braces.

mod diag;
mod format;
mod lexer;

use std::collections::{BTreeMap, BTreeSet};

pub use diag::{ParseDiagnostic, ParseErrors, Severity, SourceSpan};
pub use format::format_model;
use lexer::{lex, Tok, Token};

use crate::ast::{
    Activation, Activity, BinOp, CmpOp, DefKind, Definition, Distribution, EventCondition,
    EventKind, Expr, Func, Guard, ITypeDef, ITypeRef, Model, Reset, ResetAtom, Sync, Term, INIT,
};

const SECTIONS: [&str; 9] = [
    "params",
    "variables",
    "events",
    "subcomponent",
    "controller",
    "system",
    "iv",
    "ec",
    "types",
];

const RESERVED: [&str; 7] = ["and", "or", "not", "true", "false", "stoch", INIT];

const DISTRIBUTIONS: [&str; 7] = [
    "Uniform",
    "Normal",
    "LogNormal",
    "Exponential",
    "Gamma",
    "Dirac",
    "delta",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum RefKind {
    Definition,
    Event,
    Variable,
    /// Variable or parameter, or a name in the attached scope.
    Value(usize),
}

#[derive(Debug, Clone)]
struct Ref {
    kind: RefKind,
    name: String,
    span: SourceSpan,
}

enum RawActivation {
    Expr(Expr),
    Guard(Guard),
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<Token>,
    pos: usize,
    refs: Vec<Ref>,
    scopes: Vec<Vec<String>>,
    scope: usize,
}

type PResult<T> = Result<T, ParseDiagnostic>;

impl<'a> Parser<'a> {
    fn new(file: &'a str, src: &str) -> PResult<Parser<'a>> {
        Ok(Parser {
            file,
            toks: lex(file, src)?,
            pos: 0,
            refs: Vec::new(),
            scopes: vec![Vec::new()],
            scope: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span_of(&self, t: &Token) -> SourceSpan {
        SourceSpan {
            file: self.file.to_string(),
            line: t.line,
            column: t.col,
            length: t.len.max(1),
        }
    }

    fn here(&self) -> SourceSpan {
        self.span_of(&self.toks[self.pos])
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, what: &str) -> ParseDiagnostic {
        ParseDiagnostic::error(
            self.here(),
            format!("expected {what}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, t: &Tok, what: &str) -> PResult<Token> {
        if self.peek() == t {
            Ok(self.bump())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) && !SECTIONS.contains(&s.as_str()) => {
                let t = self.bump();
                Ok((s, self.span_of(&t)))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// Identifier without trailing primes.
    fn plain_ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        let (s, span) = self.ident(what)?;
        if s.ends_with('\'') {
            return Err(ParseDiagnostic::error(span, format!("`{s}` may not end with a prime here")));
        }
        Ok((s, span))
    }

    fn record(&mut self, kind: RefKind, name: &str, span: SourceSpan) {
        self.refs.push(Ref {
            kind,
            name: name.to_string(),
            span,
        });
    }

    fn mark(&self) -> (usize, usize) {
        (self.pos, self.refs.len())
    }

    fn reset(&mut self, m: (usize, usize)) {
        self.pos = m.0;
        self.refs.truncate(m.1);
    }

    // ---------- expressions ----------

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn mul(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            if let Tok::Num(v) = *self.peek() {
                if *self.peek_at(1) != Tok::Caret {
                    self.bump();
                    return Ok(Expr::Num(-v));
                }
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.eat(&Tok::Caret) {
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            args.push(self.expr()?);
        }
        self.expect(&Tok::RParen, "`)` or `,`")?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek_at(1) == Tok::LParen {
                    let start = self.here();
                    self.bump();
                    let args = self.args()?;
                    if let Some(f) = Func::from_name(&name) {
                        if args.len() != f.arity() {
                            return Err(ParseDiagnostic::error(
                                start,
                                format!("`{name}` takes {} argument(s), got {}", f.arity(), args.len()),
                            ));
                        }
                        return Ok(Expr::Call(f, args));
                    }
                    if DISTRIBUTIONS.contains(&name.as_str()) {
                        let n = args.len();
                        return Distribution::from_parts(&name, args)
                            .map(Expr::random)
                            .ok_or_else(|| {
                                ParseDiagnostic::error(
                                    start,
                                    format!("distribution `{name}` does not take {n} argument(s)"),
                                )
                            });
                    }
                    return Err(ParseDiagnostic::error(start, format!("unknown function `{name}`")));
                }
                let (name, span) = self.plain_ident("an expression")?;
                self.record(RefKind::Value(self.scope), &name, span);
                Ok(Expr::Var(name))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    // ---------- guards ----------

    fn guard(&mut self) -> PResult<Guard> {
        let mut lhs = self.guard_and()?;
        while self.is_keyword("or") {
            self.bump();
            let rhs = self.guard_and()?;
            lhs = Guard::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn guard_and(&mut self) -> PResult<Guard> {
        let mut lhs = self.guard_not()?;
        while self.is_keyword("and") {
            self.bump();
            let rhs = self.guard_not()?;
            lhs = Guard::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn guard_not(&mut self) -> PResult<Guard> {
        if self.is_keyword("not") {
            self.bump();
            return Ok(Guard::Not(Box::new(self.guard_not()?)));
        }
        if self.is_keyword("true") {
            self.bump();
            return Ok(Guard::True);
        }
        if self.is_keyword("false") {
            self.bump();
            return Ok(Guard::False);
        }
        if *self.peek() == Tok::LParen {
            let m = self.mark();
            self.bump();
            if let Ok(g) = self.guard() {
                if self.eat(&Tok::RParen) && !self.at_expr_continuation() {
                    return Ok(g);
                }
            }
            self.reset(m);
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Le => CmpOp::Le,
            Tok::Ge => CmpOp::Ge,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Guard::Cmp(lhs, op, rhs))
    }

    fn at_expr_continuation(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Plus
                | Tok::Minus
                | Tok::Star
                | Tok::Slash
                | Tok::Caret
                | Tok::Eq
                | Tok::Le
                | Tok::Ge
                | Tok::Lt
                | Tok::Gt
        )
    }

    // ---------- resets ----------

    fn reset_conj(&mut self) -> PResult<Reset> {
        if self.is_keyword("true") {
            self.bump();
            return Ok(Reset::identity());
        }
        let mut atoms = vec![self.reset_atom()?];
        while self.is_keyword("and") {
            self.bump();
            atoms.push(self.reset_atom()?);
        }
        Ok(Reset { atoms })
    }

    fn reset_atom(&mut self) -> PResult<ResetAtom> {
        let (name, span) = self.ident("a reset `V' = e` or `V ~ e`")?;
        let var = if let Some(stripped) = name.strip_suffix('\'') {
            self.expect(&Tok::Eq, "`=` after primed variable")?;
            stripped.to_string()
        } else {
            self.expect(&Tok::Tilde, "`~` (or write `V' = e`)")?;
            name
        };
        if var.ends_with('\'') {
            return Err(ParseDiagnostic::error(span, format!("`{var}` has too many primes")));
        }
        self.record(RefKind::Variable, &var, span);
        let value = self.expr()?;
        Ok(ResetAtom { var, value })
    }

    // ---------- terms ----------

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.choice()?;
        loop {
            let sync = match self.peek() {
                Tok::CoopAll => {
                    self.bump();
                    Sync::Shared
                }
                Tok::Par => {
                    self.bump();
                    Sync::none()
                }
                Tok::Lt => {
                    self.bump();
                    let mut set = BTreeSet::new();
                    if !self.eat(&Tok::Gt) {
                        loop {
                            let (e, span) = if self.is_keyword(INIT) {
                                let t = self.bump();
                                (INIT.to_string(), self.span_of(&t))
                            } else {
                                self.plain_ident("an event name")?
                            };
                            self.record(RefKind::Event, &e, span);
                            set.insert(e);
                            if self.eat(&Tok::Gt) {
                                break;
                            }
                            self.expect(&Tok::Comma, "`,` or `>`")?;
                        }
                    }
                    Sync::Set(set)
                }
                _ => return Ok(lhs),
            };
            let rhs = self.choice()?;
            lhs = Term::coop(lhs, sync, rhs);
        }
    }

    fn choice(&mut self) -> PResult<Term> {
        let mut lhs = self.prefix()?;
        while self.eat(&Tok::Plus) {
            let rhs = self.prefix()?;
            lhs = Term::choice(lhs, rhs);
        }
        Ok(lhs)
    }

    fn name_list(&mut self) -> PResult<Vec<(String, SourceSpan)>> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut out = vec![self.plain_ident("a name")?];
        while self.eat(&Tok::Comma) {
            out.push(self.plain_ident("a name")?);
        }
        self.expect(&Tok::RParen, "`)` or `,`")?;
        Ok(out)
    }

    fn prefix(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Num(v) if v == 0.0 => {
                self.bump();
                Ok(Term::Nil)
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(name) if name == INIT || !RESERVED.contains(&name.as_str()) => {
                let tok = self.bump();
                let span = self.span_of(&tok);
                match self.peek() {
                    Tok::Colon | Tok::Dot => {
                        if name.ends_with('\'') {
                            return Err(ParseDiagnostic::error(span, format!("event `{name}` may not end with a prime")));
                        }
                        self.record(RefKind::Event, &name, span);
                        let activity = if self.eat(&Tok::Colon) {
                            Some(self.activity()?)
                        } else {
                            None
                        };
                        self.expect(&Tok::Dot, "`.` after prefix")?;
                        let next = self.prefix()?;
                        Ok(Term::prefix(name, activity, next))
                    }
                    _ => {
                        if name == INIT || SECTIONS.contains(&name.as_str()) {
                            return Err(ParseDiagnostic::error(span, format!("expected a term, found `{name}`")));
                        }
                        let args = if *self.peek() == Tok::LParen {
                            self.name_list()?.into_iter().map(|(n, _)| n).collect()
                        } else {
                            Vec::new()
                        };
                        self.record(RefKind::Definition, &name, span);
                        Ok(Term::Const { name, args })
                    }
                }
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn activity(&mut self) -> PResult<Activity> {
        self.expect(&Tok::LParen, "`(` starting an activity")?;
        let (influence, _) = self.plain_ident("an influence name")?;
        self.expect(&Tok::Comma, "`,` after influence name")?;
        let strength = self.expr()?;
        self.expect(&Tok::Comma, "`,` after strength")?;
        let (name, _) = self.plain_ident("an influence type")?;
        let args = if *self.peek() == Tok::LParen {
            let list = self.name_list()?;
            for (n, s) in &list {
                self.record(RefKind::Variable, n, s.clone());
            }
            list.into_iter().map(|(n, _)| n).collect()
        } else {
            Vec::new()
        };
        self.expect(&Tok::RParen, "`)` closing the activity")?;
        Ok(Activity {
            influence,
            strength,
            itype: ITypeRef { name, args },
        })
    }

    // ---------- sections ----------

    fn at_section_end(&self, braced: bool) -> bool {
        match self.peek() {
            Tok::Eof => true,
            Tok::RBrace => braced,
            Tok::Ident(s) => !braced && SECTIONS.contains(&s.as_str()),
            _ => false,
        }
    }

    fn model(&mut self) -> Result<Model, ParseErrors> {
        let mut model = Model::default();
        let mut b = Builder::default();
        let mut seen: BTreeMap<String, SourceSpan> = BTreeMap::new();
        if *self.peek() == Tok::Eof {
            return Err(ParseErrors(vec![ParseDiagnostic::error(
                self.here(),
                "expected at least one section",
            )
            .with_hint("sections: params, variables, events, subcomponent, controller, system, iv, ec, types")]));
        }
        while *self.peek() != Tok::Eof {
            let section = match self.peek().clone() {
                Tok::Ident(s) if SECTIONS.contains(&s.as_str()) => s,
                _ => {
                    return Err(ParseErrors(vec![self
                        .unexpected("a section keyword")
                        .with_hint("sections: params, variables, events, subcomponent, controller, system, iv, ec, types")]))
                }
            };
            let span = self.here();
            if seen.contains_key(&section) {
                return Err(ParseErrors(vec![ParseDiagnostic::error(
                    span,
                    format!("duplicate section `{section}`"),
                )]));
            }
            seen.insert(section.clone(), span);
            self.bump();
            let braced = self.eat(&Tok::LBrace);
            while !self.at_section_end(braced) {
                self.entry(&section, &mut model, &mut b).map_err(|d| ParseErrors(vec![d]))?;
            }
            if braced {
                self.expect(&Tok::RBrace, "`}`").map_err(|d| ParseErrors(vec![d]))?;
            }
        }
        self.finish(model, b)
    }

    fn entry(&mut self, section: &str, m: &mut Model, b: &mut Builder) -> PResult<()> {
        match section {
            "params" => {
                let (name, span) = self.plain_ident("a parameter name")?;
                self.expect(&Tok::Eq, "`=`")?;
                let e = self.expr()?;
                if m.params.insert(name.clone(), e).is_some() {
                    return Err(ParseDiagnostic::error(span, format!("duplicate parameter `{name}`")));
                }
            }
            "variables" => loop {
                let (name, span) = self.plain_ident("a variable name")?;
                if m.variables.contains(&name) {
                    return Err(ParseDiagnostic::error(span, format!("duplicate variable `{name}`")));
                }
                m.variables.push(name);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            },
            "events" => loop {
                let kind = if self.is_keyword("stoch") {
                    self.bump();
                    EventKind::Stochastic
                } else {
                    EventKind::Instantaneous
                };
                if self.is_keyword(INIT) {
                    return Err(ParseDiagnostic::error(self.here(), "`init` is reserved and declared implicitly"));
                }
                let (name, span) = self.plain_ident("an event name")?;
                if m.events.insert(name.clone(), kind).is_some() {
                    return Err(ParseDiagnostic::error(span, format!("duplicate event `{name}`")));
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            },
            "subcomponent" | "controller" | "system" => {
                let kind = match section {
                    "subcomponent" => DefKind::Subcomponent,
                    "controller" => DefKind::Controller,
                    _ => DefKind::System,
                };
                let (name, span) = self.ident("a definition name")?;
                let params = if *self.peek() == Tok::LParen {
                    self.name_list()?.into_iter().map(|(n, _)| n).collect()
                } else {
                    Vec::new()
                };
                self.expect(&Tok::DefEq, "`=def`")?;
                let body = self.term()?;
                if m.definition(&name).is_some() {
                    return Err(ParseDiagnostic::error(span, format!("duplicate definition `{name}`")));
                }
                m.definitions.push(Definition {
                    kind,
                    name,
                    params,
                    body,
                });
            }
            "iv" => {
                let (infl, span) = self.plain_ident("an influence name")?;
                self.expect(&Tok::Eq, "`=`")?;
                let (var, vspan) = self.plain_ident("a variable name")?;
                self.record(RefKind::Variable, &var, vspan);
                if m.iv.insert(infl.clone(), var).is_some() {
                    return Err(ParseDiagnostic::error(span, format!("duplicate iv entry `{infl}`")));
                }
            }
            "ec" => {
                let (event, span) = if self.is_keyword(INIT) {
                    let t = self.bump();
                    (INIT.to_string(), self.span_of(&t))
                } else {
                    self.plain_ident("an event name")?
                };
                self.record(RefKind::Event, &event, span.clone());
                self.expect(&Tok::Eq, "`=`")?;
                self.expect(&Tok::LParen, "`(` starting an event condition")?;
                let act = self.activation()?;
                self.expect(&Tok::Comma, "`,`")
                    .map_err(|d| d.with_hint("expected ',' then reset"))?;
                let reset = self.reset_conj()?;
                self.expect(&Tok::RParen, "`)` closing the event condition")?;
                if b.ec.iter().any(|(e, ..)| *e == event) {
                    return Err(ParseDiagnostic::error(span, format!("duplicate event condition `{event}`")));
                }
                b.ec.push((event, span, act, reset));
            }
            "types" => {
                let (name, span) = self.plain_ident("an influence type name")?;
                let params: Vec<String> = if *self.peek() == Tok::LParen {
                    self.name_list()?.into_iter().map(|(n, _)| n).collect()
                } else {
                    Vec::new()
                };
                self.expect(&Tok::Eq, "`=`")?;
                self.scopes.push(params.clone());
                self.scope = self.scopes.len() - 1;
                let body = self.expr();
                self.scope = 0;
                let body = body?;
                if m.itypes.insert(name.clone(), ITypeDef { params, body }).is_some() {
                    return Err(ParseDiagnostic::error(span, format!("duplicate influence type `{name}`")));
                }
            }
            _ => unreachable!("section keywords are checked by the caller"),
        }
        self.expect(&Tok::Semi, "`;`")?;
        Ok(())
    }

    fn activation(&mut self) -> PResult<RawActivation> {
        let m = self.mark();
        if let Ok(e) = self.expr() {
            if *self.peek() == Tok::Comma {
                return Ok(RawActivation::Expr(e));
            }
        }
        self.reset(m);
        Ok(RawActivation::Guard(self.guard()?))
    }

    fn finish(&mut self, mut m: Model, b: Builder) -> Result<Model, ParseErrors> {
        let mut errs = Vec::new();
        for (event, span, act, reset) in b.ec {
            let activation = match (m.event_kind(&event), act) {
                (Some(EventKind::Instantaneous), RawActivation::Guard(g)) => Activation::Guard(g),
                (Some(EventKind::Stochastic), RawActivation::Expr(e)) => {
                    if e.has_random() {
                        Activation::Duration(e)
                    } else {
                        Activation::Rate(e)
                    }
                }
                (Some(EventKind::Instantaneous), RawActivation::Expr(e)) => {
                    errs.push(
                        ParseDiagnostic::error(span, format!("instantaneous event `{event}` needs a guard, found `{e}`"))
                            .with_hint("declare it with `stoch` for a rate or duration"),
                    );
                    continue;
                }
                (Some(EventKind::Stochastic), RawActivation::Guard(g)) => {
                    errs.push(ParseDiagnostic::error(
                        span,
                        format!("stochastic event `{event}` needs a rate or duration, found guard `{g}`"),
                    ));
                    continue;
                }
                (None, _) => continue,
            };
            m.ec.insert(event, EventCondition { activation, reset });
        }
        let defs: BTreeSet<&str> = m.definitions.iter().map(|d| d.name.as_str()).collect();
        let vars: BTreeSet<&str> = m.variables.iter().map(String::as_str).collect();
        for r in &self.refs {
            let ok = match r.kind {
                RefKind::Definition => defs.contains(r.name.as_str()),
                RefKind::Event => m.event_kind(&r.name).is_some(),
                RefKind::Variable => vars.contains(r.name.as_str()),
                RefKind::Value(scope) => {
                    vars.contains(r.name.as_str())
                        || m.params.contains_key(&r.name)
                        || self.scopes[scope].contains(&r.name)
                }
            };
            if !ok {
                let what = match r.kind {
                    RefKind::Definition => "definition",
                    RefKind::Event => "event",
                    RefKind::Variable => "variable",
                    RefKind::Value(_) => "variable or parameter",
                };
                errs.push(ParseDiagnostic::error(
                    r.span.clone(),
                    format!("unknown identifier `{}` (no such {what})", r.name),
                ));
            }
        }
        if !errs.is_empty() {
            return Err(ParseErrors(errs));
        }
        let rank = |k: DefKind| match k {
            DefKind::Subcomponent => 0,
            DefKind::Controller => 1,
            DefKind::System => 2,
        };
        m.definitions.sort_by_key(|d| rank(d.kind));
        Ok(m)
    }
}

#[derive(Default)]
struct Builder {
    ec: Vec<(String, SourceSpan, RawActivation, Reset)>,
}

/// Parses a model; `file` is only used in diagnostics.
pub fn parse_model_named(file: &str, source: &str) -> Result<Model, ParseErrors> {
    let mut p = Parser::new(file, source).map_err(|d| ParseErrors(vec![d]))?;
    p.model()
}

pub fn parse_model(source: &str) -> Result<Model, ParseErrors> {
    parse_model_named("<input>", source)
}

fn parse_fragment<T>(
    source: &str,
    f: impl FnOnce(&mut Parser) -> PResult<T>,
) -> Result<T, ParseDiagnostic> {
    let mut p = Parser::new("<input>", source)?;
    let out = f(&mut p)?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok(out)
}

pub fn parse_expr(source: &str) -> Result<Expr, ParseDiagnostic> {
    parse_fragment(source, |p| p.expr())
}

pub fn parse_guard(source: &str) -> Result<Guard, ParseDiagnostic> {
    parse_fragment(source, |p| p.guard())
}

pub fn parse_term(source: &str) -> Result<Term, ParseDiagnostic> {
    parse_fragment(source, |p| p.term())
}

pub fn parse_reset(source: &str) -> Result<Reset, ParseDiagnostic> {
    parse_fragment(source, |p| p.reset_conj())
}
