use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::ast::{BinOp, CmpOp, Distribution, Expr, Func, Guard};

/// Closed interval, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            Interval::FULL
        } else {
            Interval { lo, hi }
        }
    }

    pub fn point(v: f64) -> Interval {
        Interval::new(v, v)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn meet(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    fn corners(a: Interval, b: Interval, f: impl Fn(f64, f64) -> f64) -> Interval {
        let c = [f(a.lo, b.lo), f(a.lo, b.hi), f(a.hi, b.lo), f(a.hi, b.hi)];
        if c.iter().any(|v| v.is_nan()) {
            return Interval::FULL;
        }
        Interval::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    fn mul(self, o: Interval) -> Interval {
        // 0 · ∞ counts as 0 at a corner
        Interval::corners(self, o, |x, y| if x == 0.0 || y == 0.0 { 0.0 } else { x * y })
    }

    fn div(self, o: Interval) -> Interval {
        if o.contains(0.0) {
            return Interval::FULL;
        }
        Interval::corners(self, o, |x, y| x / y)
    }

    fn pow(self, o: Interval) -> Interval {
        match (o.lo == o.hi).then_some(o.lo) {
            Some(n) if n.fract() == 0.0 && (0.0..=16.0).contains(&n) => {
                let mut acc = Interval::point(1.0);
                for _ in 0..n as usize {
                    acc = acc.mul(self);
                }
                if n as usize % 2 == 0 {
                    acc.lo = acc.lo.max(0.0);
                }
                acc
            }
            _ if self.lo > 0.0 => Interval::corners(self, o, f64::powf),
            _ => Interval::FULL,
        }
    }

    fn monotone(self, f: fn(f64) -> f64, domain_lo: f64) -> Interval {
        if self.hi < domain_lo {
            return Interval::FULL;
        }
        Interval::new(f(self.lo.max(domain_lo)), f(self.hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

pub type Bounds = BTreeMap<String, Interval>;

/// Width of the box used for unbounded supports, in standard deviations.
pub const SIGMAS: f64 = 6.0;

/// Range of `e` when each variable ranges over its box entry.
pub fn eval(e: &Expr, env: &Bounds) -> Interval {
    match e {
        Expr::Num(v) => Interval::point(*v),
        Expr::Var(n) => env.get(n).copied().unwrap_or(Interval::FULL),
        Expr::Neg(a) => eval(a, env).neg(),
        Expr::Bin(op, a, b) => {
            let (a, b) = (eval(a, env), eval(b, env));
            match op {
                BinOp::Add => a.add(b),
                BinOp::Sub => a.add(b.neg()),
                BinOp::Mul => a.mul(b),
                BinOp::Div => a.div(b),
                BinOp::Pow => a.pow(b),
            }
        }
        Expr::Call(f, args) => {
            let v: Vec<Interval> = args.iter().map(|a| eval(a, env)).collect();
            match f {
                Func::Min => Interval::new(v[0].lo.min(v[1].lo), v[0].hi.min(v[1].hi)),
                Func::Max => Interval::new(v[0].lo.max(v[1].lo), v[0].hi.max(v[1].hi)),
                Func::Sqrt => v[0].monotone(f64::sqrt, 0.0),
                Func::Ln => v[0].monotone(f64::ln, 0.0),
                Func::Exp => v[0].monotone(f64::exp, f64::NEG_INFINITY),
            }
        }
        Expr::Random(d) => support(d, env),
    }
}

/// Values a distribution can produce; normal laws are cut at `SIGMAS` deviations.
pub fn support(d: &Distribution, env: &Bounds) -> Interval {
    let p: Vec<Interval> = d.params().into_iter().map(|e| eval(e, env)).collect();
    let point = |i: &Interval| (i.lo == i.hi).then_some(i.lo);
    match d {
        Distribution::Uniform(..) => Interval::new(p[0].lo, p[1].hi),
        Distribution::Dirac(_) => p[0],
        Distribution::Exponential(_) | Distribution::Gamma(..) => Interval::new(0.0, f64::INFINITY),
        Distribution::Normal(..) => {
            let sd = SIGMAS * p[1].hi.max(0.0).sqrt();
            Interval::new(p[0].lo - sd, p[0].hi + sd)
        }
        Distribution::LogNormal(..) => match (point(&p[0]), point(&p[1])) {
            (Some(m), Some(v)) if m > 0.0 && v >= 0.0 => {
                let s2 = (1.0 + v / (m * m)).ln();
                let mu = m.ln() - s2 / 2.0;
                let s = s2.sqrt();
                Interval::new((mu - SIGMAS * s).exp(), (mu + SIGMAS * s).exp())
            }
            _ => Interval::new(0.0, f64::INFINITY),
        },
    }
}

/// Whether `g` can be true and whether it can be false over the box.
pub fn guard_range(g: &Guard, env: &Bounds) -> (bool, bool) {
    match g {
        Guard::True => (true, false),
        Guard::False => (false, true),
        Guard::Not(a) => {
            let (t, f) = guard_range(a, env);
            (f, t)
        }
        Guard::And(a, b) => {
            let (ta, fa) = guard_range(a, env);
            let (tb, fb) = guard_range(b, env);
            (ta && tb, fa || fb)
        }
        Guard::Or(a, b) => {
            let (ta, fa) = guard_range(a, env);
            let (tb, fb) = guard_range(b, env);
            (ta || tb, fa && fb)
        }
        Guard::Cmp(a, op, b) => {
            let d = eval(&crate::ast::normalize(&Expr::sub(a.clone(), b.clone())), env);
            match op {
                CmpOp::Eq => (d.contains(0.0), !(d.lo == 0.0 && d.hi == 0.0)),
                CmpOp::Ge => (d.hi >= 0.0, d.lo < 0.0),
                CmpOp::Gt => (d.hi > 0.0, d.lo <= 0.0),
                CmpOp::Le => (d.lo <= 0.0, d.hi > 0.0),
                CmpOp::Lt => (d.lo < 0.0, d.hi >= 0.0),
            }
        }
    }
}

/// Bounds on single variables implied by the top-level conjuncts of `g`.
pub fn guard_box(g: &Guard) -> Bounds {
    let mut out = Bounds::new();
    for c in g.conjuncts() {
        let Guard::Cmp(a, op, b) = c else { continue };
        let d = crate::ast::normalize(&Expr::sub(a.clone(), b.clone()));
        let vars = d.free_vars();
        if vars.len() != 1 || d.has_random() {
            continue;
        }
        let v = vars.into_iter().next().expect("one variable");
        let at = |x: f64| d.eval(&BTreeMap::from([(v.clone(), x)])).ok();
        let (Some(c0), Some(c1), Some(c2)) = (at(0.0), at(1.0), at(2.0)) else {
            continue;
        };
        let k = c1 - c0;
        if k == 0.0 || (c2 - c0 - 2.0 * k).abs() > 1e-12 * (1.0 + c0.abs() + k.abs()) {
            continue;
        }
        // k·v + c0 op 0
        let root = -c0 / k;
        let (below, above) = (Interval::new(f64::NEG_INFINITY, root), Interval::new(root, f64::INFINITY));
        let bound = match (op, k > 0.0) {
            (CmpOp::Eq, _) => Interval::point(root),
            (CmpOp::Ge | CmpOp::Gt, true) | (CmpOp::Le | CmpOp::Lt, false) => above,
            (CmpOp::Ge | CmpOp::Gt, false) | (CmpOp::Le | CmpOp::Lt, true) => below,
        };
        let slot = out.entry(v).or_insert(Interval::FULL);
        *slot = slot.meet(&bound);
    }
    out
}
