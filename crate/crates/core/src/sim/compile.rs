use std::collections::HashMap;

use crate::ast::expr::{apply_bin, apply_func};
use crate::ast::{BinOp, CmpOp, EvalError, Expr, Func, Guard};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

/// Postfix program for a deterministic expression over indexed variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
}

impl Program {
    pub fn compile(e: &Expr, index: &HashMap<String, usize>) -> Result<Program, EvalError> {
        let e = e.fold_constants();
        let mut ops = Vec::new();
        emit(&e, index, &mut ops)?;
        let mut depth = 0usize;
        let mut max = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => depth += 1,
                Op::Neg => {}
                Op::Bin(_) => depth -= 1,
                Op::Call(f) => depth = depth + 1 - f.arity(),
            }
            max = max.max(depth);
        }
        Ok(Program { ops, depth: max })
    }

    pub fn constant(&self) -> Option<f64> {
        match self.ops.as_slice() {
            [Op::Const(v)] => Some(*v),
            _ => None,
        }
    }

    /// Built from sums, differences and scaling by literals only.
    pub fn is_affine(&self) -> bool {
        // track for each stack slot whether it is a literal
        let mut lit: Vec<bool> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match op {
                Op::Const(_) => lit.push(true),
                Op::Var(_) => lit.push(false),
                Op::Neg => {}
                Op::Bin(b) => {
                    let y = lit.pop().unwrap_or(false);
                    let x = lit.pop().unwrap_or(false);
                    let ok = match b {
                        BinOp::Add | BinOp::Sub => true,
                        BinOp::Mul => x || y,
                        BinOp::Div | BinOp::Pow => y,
                    };
                    if !ok || (*b == BinOp::Pow && !x) {
                        return false;
                    }
                    lit.push(x && y);
                }
                Op::Call(_) => return false,
            }
        }
        true
    }

    pub fn eval(&self, x: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::Var(i) => stack.push(x[i]),
                Op::Neg => {
                    let v = stack.last_mut().expect("well-formed program");
                    *v = -*v;
                }
                Op::Bin(b) => {
                    let r = stack.pop().expect("well-formed program");
                    let l = stack.last_mut().expect("well-formed program");
                    *l = match b {
                        BinOp::Add => *l + r,
                        BinOp::Sub => *l - r,
                        BinOp::Mul => *l * r,
                        _ => apply_bin(b, *l, r)?,
                    };
                }
                Op::Call(f) => {
                    let n = f.arity();
                    let at = stack.len() - n;
                    let v = apply_func(f, &stack[at..])?;
                    stack.truncate(at);
                    stack.push(v);
                }
            }
        }
        Ok(stack[0])
    }
}

fn emit(e: &Expr, index: &HashMap<String, usize>, ops: &mut Vec<Op>) -> Result<(), EvalError> {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Var(n) => ops.push(Op::Var(
            *index.get(n).ok_or_else(|| EvalError::UnboundVariable(n.clone()))?,
        )),
        Expr::Neg(a) => {
            emit(a, index, ops)?;
            ops.push(Op::Neg);
        }
        Expr::Bin(op, a, b) => {
            emit(a, index, ops)?;
            emit(b, index, ops)?;
            ops.push(Op::Bin(*op));
        }
        Expr::Call(f, args) => {
            for a in args {
                emit(a, index, ops)?;
            }
            ops.push(Op::Call(*f));
        }
        Expr::Random(d) => return Err(EvalError::RandomTerm(d.name().to_string())),
    }
    Ok(())
}

/// Comparison `g(x) op 0` with `g = lhs - rhs`.
#[derive(Debug, Clone)]
pub struct Atom {
    pub g: Program,
    pub op: AtomOp,
    /// Absolute tolerance for the comparison.
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomOp {
    Eq,
    Ne,
    Ge,
    Le,
}

#[derive(Debug, Clone)]
enum Node {
    Const(bool),
    Atom(usize),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
}

/// Guard in negation normal form over comparison atoms.
///
/// Comparisons hold within a relative tolerance, so a guard reached by the
/// flow is seen as satisfied from the side it is approached. Equalities
/// are also satisfied once the sign of `g` flips with respect to a
/// reference point.
#[derive(Debug, Clone)]
pub struct GuardProgram {
    pub atoms: Vec<Atom>,
    root: Node,
}

fn literal_scale(e: &Expr) -> f64 {
    let mut s: f64 = 1.0;
    e.visit(&mut |x| {
        if let Expr::Num(v) = x {
            s = s.max(v.abs());
        }
    });
    s
}

impl GuardProgram {
    pub fn compile(g: &Guard, index: &HashMap<String, usize>, rel_tol: f64) -> Result<GuardProgram, EvalError> {
        let mut atoms = Vec::new();
        let root = nnf(g, false, index, rel_tol, &mut atoms)?;
        Ok(GuardProgram { atoms, root })
    }

    pub fn is_true(&self) -> bool {
        matches!(self.root, Node::Const(true))
    }

    pub fn is_affine(&self) -> bool {
        self.atoms.iter().all(|a| a.g.is_affine())
    }

    pub fn atom_values(&self, x: &[f64], stack: &mut Vec<f64>, out: &mut Vec<f64>) -> Result<(), EvalError> {
        out.clear();
        for a in &self.atoms {
            out.push(a.g.eval(x, stack)?);
        }
        Ok(())
    }

    /// Truth at `x`; `reference` holds the atom values at the start of the
    /// current step for sign-change detection.
    pub fn holds(&self, x: &[f64], reference: Option<&[f64]>, stack: &mut Vec<f64>) -> Result<bool, EvalError> {
        self.holds_with(x, reference, stack, &mut Vec::new())
    }

    pub fn holds_with(
        &self,
        x: &[f64],
        reference: Option<&[f64]>,
        stack: &mut Vec<f64>,
        vals: &mut Vec<f64>,
    ) -> Result<bool, EvalError> {
        if let Node::Const(b) = self.root {
            return Ok(b);
        }
        self.atom_values(x, stack, vals)?;
        Ok(self.eval_node(&self.root, vals, reference))
    }

    fn eval_node(&self, n: &Node, vals: &[f64], reference: Option<&[f64]>) -> bool {
        match n {
            Node::Const(b) => *b,
            Node::Atom(i) => {
                let a = &self.atoms[*i];
                let v = vals[*i];
                match a.op {
                    AtomOp::Ge => v >= -a.tol,
                    AtomOp::Le => v <= a.tol,
                    AtomOp::Ne => v.abs() > a.tol,
                    AtomOp::Eq => {
                        v.abs() <= a.tol
                            || reference.is_some_and(|r| {
                                let r = r[*i];
                                r.abs() > a.tol && (r < 0.0) != (v < 0.0)
                            })
                    }
                }
            }
            Node::And(l, r) => self.eval_node(l, vals, reference) && self.eval_node(r, vals, reference),
            Node::Or(l, r) => self.eval_node(l, vals, reference) || self.eval_node(r, vals, reference),
        }
    }
}

fn nnf(
    g: &Guard,
    neg: bool,
    index: &HashMap<String, usize>,
    rel_tol: f64,
    atoms: &mut Vec<Atom>,
) -> Result<Node, EvalError> {
    Ok(match g {
        Guard::True => Node::Const(!neg),
        Guard::False => Node::Const(neg),
        Guard::Not(a) => nnf(a, !neg, index, rel_tol, atoms)?,
        Guard::And(a, b) | Guard::Or(a, b) => {
            let l = nnf(a, neg, index, rel_tol, atoms)?;
            let r = nnf(b, neg, index, rel_tol, atoms)?;
            let conj = matches!(g, Guard::And(..)) != neg;
            match (conj, l, r) {
                (true, Node::Const(true), n) | (true, n, Node::Const(true)) => n,
                (true, Node::Const(false), _) | (true, _, Node::Const(false)) => Node::Const(false),
                (false, Node::Const(false), n) | (false, n, Node::Const(false)) => n,
                (false, Node::Const(true), _) | (false, _, Node::Const(true)) => Node::Const(true),
                (true, l, r) => Node::And(Box::new(l), Box::new(r)),
                (false, l, r) => Node::Or(Box::new(l), Box::new(r)),
            }
        }
        Guard::Cmp(a, op, b) => {
            let op = match (op, neg) {
                (CmpOp::Eq, false) => AtomOp::Eq,
                (CmpOp::Eq, true) => AtomOp::Ne,
                (CmpOp::Ge | CmpOp::Gt, false) | (CmpOp::Le | CmpOp::Lt, true) => AtomOp::Ge,
                (CmpOp::Le | CmpOp::Lt, false) | (CmpOp::Ge | CmpOp::Gt, true) => AtomOp::Le,
            };
            let tol = rel_tol * literal_scale(a).max(literal_scale(b));
            let g = Program::compile(&Expr::sub(a.clone(), b.clone()), index)?;
            atoms.push(Atom { g, op, tol });
            Node::Atom(atoms.len() - 1)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr, parse_guard};

    fn index() -> HashMap<String, usize> {
        [("X".to_string(), 0), ("Y".to_string(), 1)].into_iter().collect()
    }

    #[test]
    fn matches_tree_evaluation() {
        let mut stack = Vec::new();
        for src in ["1 + 2*X - Y/4", "min(X, Y)^2", "-X^0.5 + sqrt(Y) * exp(ln(2))", "max(0, X - 10)"] {
            let e = parse_expr(src).unwrap();
            let p = Program::compile(&e, &index()).unwrap();
            let x = [3.5, 7.25];
            let env = [("X", 3.5), ("Y", 7.25)];
            assert_eq!(p.eval(&x, &mut stack).unwrap(), e.eval(&env).unwrap(), "{src}");
        }
    }

    #[test]
    fn errors_propagate() {
        let mut stack = Vec::new();
        let p = Program::compile(&parse_expr("1 / X").unwrap(), &index()).unwrap();
        assert_eq!(p.eval(&[0.0, 0.0], &mut stack), Err(EvalError::DivisionByZero));
        assert!(Program::compile(&parse_expr("Z").unwrap(), &index()).is_err());
    }

    #[test]
    fn affinity() {
        let aff = |s: &str| Program::compile(&parse_expr(s).unwrap(), &index()).unwrap().is_affine();
        assert!(aff("2*X - Y/4 + 3"));
        assert!(aff("-(X - Y) * 2^3"));
        assert!(!aff("X*Y"));
        assert!(!aff("min(X, Y)"));
        assert!(!aff("1 / X"));
    }

    #[test]
    fn equality_by_tolerance_or_crossing() {
        let mut stack = Vec::new();
        let g = GuardProgram::compile(&parse_guard("X = 200").unwrap(), &index(), 1e-8).unwrap();
        assert!(g.holds(&[200.0 - 1e-7, 0.0], None, &mut stack).unwrap());
        assert!(!g.holds(&[199.0, 0.0], None, &mut stack).unwrap());
        let reference = [-10.0];
        assert!(g.holds(&[201.0, 0.0], Some(&reference), &mut stack).unwrap());
        assert!(!g.holds(&[199.0, 0.0], Some(&reference), &mut stack).unwrap());
    }

    #[test]
    fn negation_is_pushed_to_atoms() {
        let mut stack = Vec::new();
        let g = GuardProgram::compile(&parse_guard("not (X >= 1 and Y < 2)").unwrap(), &index(), 0.0).unwrap();
        assert_eq!(g.atoms.len(), 2);
        assert!(g.holds(&[0.0, 0.0], None, &mut stack).unwrap());
        assert!(g.holds(&[5.0, 3.0], None, &mut stack).unwrap());
        assert!(!g.holds(&[5.0, 1.0], None, &mut stack).unwrap());
        let t = GuardProgram::compile(&parse_guard("X >= 1 or true").unwrap(), &index(), 0.0).unwrap();
        assert!(t.is_true());
    }
}
