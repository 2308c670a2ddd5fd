//! Canonical form for expressions: sums of monomials with folded coefficients.
//!
//! Two expressions that differ only by associativity, commutativity, literal
//! folding or collectable like terms normalize to the same tree. Anything
//! non-polynomial (functions, random terms, non-integer powers, division by a
//! sum) becomes an opaque atom whose arguments are normalized recursively.

use std::collections::BTreeMap;

use super::expr::{BinOp, Empty, Expr, Func};

type Monomial = Vec<(String, i32)>;

#[derive(Default, Clone)]
struct Poly {
    terms: BTreeMap<Monomial, f64>,
}

const EXPAND_LIMIT: usize = 64;
const POW_LIMIT: i32 = 8;

struct Atoms {
    table: BTreeMap<String, Expr>,
}

impl Atoms {
    fn atom(&mut self, e: Expr) -> Poly {
        let key = e.to_string();
        self.table.entry(key.clone()).or_insert(e);
        let mut p = Poly::default();
        p.terms.insert(vec![(key, 1)], 1.0);
        p
    }
}

impl Poly {
    fn constant(v: f64) -> Poly {
        let mut p = Poly::default();
        if v != 0.0 {
            p.terms.insert(Vec::new(), v);
        }
        p
    }

    fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        let v = self.terms.get(&m).copied().unwrap_or(0.0) + c;
        if v == 0.0 {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, v);
        }
    }

    fn add(mut self, other: &Poly, sign: f64) -> Poly {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c * sign);
        }
        self
    }

    fn scale(mut self, k: f64) -> Poly {
        if k == 0.0 {
            return Poly::default();
        }
        for c in self.terms.values_mut() {
            *c *= k;
        }
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(mul_monomial(ma, mb), ca * cb);
            }
        }
        out
    }

    fn single_monomial(&self) -> Option<(&Monomial, f64)> {
        if self.terms.len() == 1 {
            self.terms.iter().next().map(|(m, c)| (m, *c))
        } else {
            None
        }
    }
}

fn mul_monomial(a: &Monomial, b: &Monomial) -> Monomial {
    let mut map: BTreeMap<String, i32> = BTreeMap::new();
    for (k, e) in a.iter().chain(b.iter()) {
        *map.entry(k.clone()).or_insert(0) += e;
    }
    map.into_iter().filter(|(_, e)| *e != 0).collect()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Atoms {
    fn poly(&mut self, e: &Expr) -> Poly {
        match e {
            Expr::Num(v) => Poly::constant(*v),
            Expr::Var(_) => self.atom(e.clone()),
            Expr::Neg(a) => self.poly(a).scale(-1.0),
            Expr::Bin(op, a, b) => {
                let pa = self.poly(a);
                let pb = self.poly(b);
                self.binary(*op, pa, pb)
            }
            Expr::Call(f, args) => {
                let mut nargs: Vec<Expr> = args.iter().map(|a| self.expr_of(a)).collect();
                if let Some(vals) = nargs.iter().map(Expr::as_num).collect::<Option<Vec<_>>>() {
                    if let Some(v) = Expr::Call(*f, vals.iter().map(|v| Expr::Num(*v)).collect())
                        .eval(&Empty)
                        .ok()
                        .and_then(finite)
                    {
                        return Poly::constant(v);
                    }
                }
                if matches!(f, Func::Min | Func::Max) {
                    nargs.sort_by_key(|a| a.to_string());
                }
                self.atom(Expr::Call(*f, nargs))
            }
            Expr::Random(d) => {
                let nd = d.map_params(|p| self.expr_of(p));
                self.atom(Expr::Random(Box::new(nd)))
            }
        }
    }

    fn expr_of(&mut self, e: &Expr) -> Expr {
        let p = self.poly(e);
        self.to_expr(&p)
    }

    fn binary(&mut self, op: BinOp, pa: Poly, pb: Poly) -> Poly {
        match op {
            BinOp::Add => pa.add(&pb, 1.0),
            BinOp::Sub => pa.add(&pb, -1.0),
            BinOp::Mul => {
                if pa.terms.len() * pb.terms.len() <= EXPAND_LIMIT {
                    pa.mul(&pb)
                } else {
                    let a = self.to_expr(&pa);
                    let b = self.to_expr(&pb);
                    let (a, b) = if a.to_string() <= b.to_string() { (a, b) } else { (b, a) };
                    self.atom(Expr::mul(a, b))
                }
            }
            BinOp::Div => {
                if let Some(c) = pb.as_constant() {
                    if c != 0.0 {
                        return pa.scale(1.0 / c);
                    }
                }
                if let Some((m, c)) = pb.single_monomial() {
                    let inv: Monomial = m.iter().map(|(k, e)| (k.clone(), -e)).collect();
                    let mut q = Poly::default();
                    q.terms.insert(inv, 1.0 / c);
                    return pa.mul(&q);
                }
                let den = self.to_expr(&pb);
                let inv = self.atom_pow(den, -1);
                pa.mul(&inv)
            }
            BinOp::Pow => {
                if let (Some(x), Some(y)) = (pa.as_constant(), pb.as_constant()) {
                    if let Some(v) = finite(x.powf(y)) {
                        return Poly::constant(v);
                    }
                }
                if let Some(n) = pb.as_constant() {
                    if n.fract() == 0.0 && n.abs() <= POW_LIMIT as f64 {
                        let n = n as i32;
                        if let Some((m, c)) = pa.single_monomial() {
                            let m: Monomial = m
                                .iter()
                                .map(|(k, e)| (k.clone(), e * n))
                                .filter(|(_, e)| *e != 0)
                                .collect();
                            if let Some(cn) = finite(c.powi(n)) {
                                let mut q = Poly::default();
                                q.add_term(m, cn);
                                return q;
                            }
                        }
                        if n >= 0 {
                            let mut acc = Poly::constant(1.0);
                            let mut ok = true;
                            for _ in 0..n {
                                if acc.terms.len() * pa.terms.len() > EXPAND_LIMIT {
                                    ok = false;
                                    break;
                                }
                                acc = acc.mul(&pa);
                            }
                            if ok {
                                return acc;
                            }
                        }
                        let base = self.to_expr(&pa);
                        return self.atom_pow(base, n);
                    }
                }
                let base = self.to_expr(&pa);
                let exp = self.to_expr(&pb);
                self.atom(Expr::bin(BinOp::Pow, base, exp))
            }
        }
    }

    fn atom_pow(&mut self, base: Expr, n: i32) -> Poly {
        let mut p = self.atom(base);
        let (m, _) = p.terms.pop_first().expect("atom has one term");
        let m: Monomial = m.into_iter().map(|(k, e)| (k, e * n)).collect();
        p.terms.insert(m, 1.0);
        p
    }

    fn monomial_expr(&self, m: &Monomial) -> Option<Expr> {
        let mut acc: Option<Expr> = None;
        for (k, e) in m {
            let base = self.table[k].clone();
            let f = if *e == 1 {
                base
            } else {
                Expr::bin(BinOp::Pow, base, Expr::Num(*e as f64))
            };
            acc = Some(match acc {
                None => f,
                Some(a) => Expr::mul(a, f),
            });
        }
        acc
    }

    fn to_expr(&self, p: &Poly) -> Expr {
        let mut ordered: Vec<(&Monomial, f64)> = p.terms.iter().map(|(m, c)| (m, *c)).collect();
        // constants last, otherwise monomial order
        ordered.sort_by(|a, b| a.0.is_empty().cmp(&b.0.is_empty()).then(a.0.cmp(b.0)));
        let mut acc: Option<Expr> = None;
        for (m, c) in ordered {
            let negative = c < 0.0;
            let mag = c.abs();
            let body = match self.monomial_expr(m) {
                None => Expr::Num(mag),
                Some(f) if mag == 1.0 => f,
                Some(f) => Expr::mul(Expr::Num(mag), f),
            };
            acc = Some(match acc {
                None if negative => match body {
                    Expr::Num(v) => Expr::Num(-v),
                    b => Expr::Neg(Box::new(b)),
                },
                None => body,
                Some(a) if negative => Expr::sub(a, body),
                Some(a) => Expr::add(a, body),
            });
        }
        acc.unwrap_or(Expr::Num(0.0))
    }
}

/// Returns the canonical form of `e`.
pub fn normalize(e: &Expr) -> Expr {
    let mut atoms = Atoms {
        table: BTreeMap::new(),
    };
    atoms.expr_of(e)
}

/// Canonical string key; equal keys mean syntactically equal after normalization.
pub fn canonical_key(e: &Expr) -> String {
    normalize(e).to_string()
}
