//! Bit-vector/array terms, SMT-LIB printing and an external solver client.

mod print;
pub mod sexp;
mod solver;

pub use print::to_smtlib;
pub use solver::{parse_model, solve, ModelValue, SatResult, SolveError, SolverConfig, SolverReply, SolverStats, DEFAULT_TIMEOUT};

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Bv(u32),
    /// Array from `bv(index)` to `bv(elem)`.
    Array(u32, u32),
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => f.write_str("Bool"),
            Sort::Bv(w) => write!(f, "(_ BitVec {w})"),
            Sort::Array(i, e) => write!(f, "(Array (_ BitVec {i}) (_ BitVec {e}))"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BvOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
}

impl BvOp {
    fn smt(self) -> &'static str {
        match self {
            BvOp::Add => "bvadd",
            BvOp::Sub => "bvsub",
            BvOp::Mul => "bvmul",
            BvOp::And => "bvand",
            BvOp::Or => "bvor",
            BvOp::Xor => "bvxor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Ult,
    Ule,
    Ugt,
    Uge,
    Slt,
    Sle,
    Sgt,
    Sge,
}

impl CmpOp {
    fn smt(self) -> &'static str {
        match self {
            CmpOp::Ult => "bvult",
            CmpOp::Ule => "bvule",
            CmpOp::Ugt => "bvugt",
            CmpOp::Uge => "bvuge",
            CmpOp::Slt => "bvslt",
            CmpOp::Sle => "bvsle",
            CmpOp::Sgt => "bvsgt",
            CmpOp::Sge => "bvsge",
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Sym(Arc<str>, Sort),
    Bv(u64, u32),
    Bool(bool),
    Not(Term),
    And(Vec<Term>),
    Or(Vec<Term>),
    Implies(Term, Term),
    Eq(Term, Term),
    Ite(Term, Term, Term),
    BvBin(BvOp, Term, Term),
    BvNot(Term),
    BvNeg(Term),
    Cmp(CmpOp, Term, Term),
    ZeroExt(u32, Term),
    Select(Term, Term),
    Store(Term, Term, Term),
}

/// Shared, immutable term. Equality and hashing are structural.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Term(Arc<Node>);

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print::term_to_string(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print::term_to_string(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sort error in {node}: {message}")]
pub struct SortError {
    pub node: String,
    pub message: String,
}

fn mask(v: u64, w: u32) -> u64 {
    crate::ir::word_mask(w) & v
}

impl Term {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn mk(n: Node) -> Term {
        Term(Arc::new(n))
    }

    pub fn sym(name: &str, sort: Sort) -> Term {
        Term::mk(Node::Sym(name.into(), sort))
    }

    pub fn bv(v: u64, width: u32) -> Term {
        Term::mk(Node::Bv(mask(v, width), width))
    }

    pub fn bool(b: bool) -> Term {
        Term::mk(Node::Bool(b))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.node() {
            Node::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn not(t: Term) -> Term {
        match t.node() {
            Node::Bool(b) => Term::bool(!b),
            Node::Not(inner) => inner.clone(),
            _ => Term::mk(Node::Not(t)),
        }
    }

    pub fn and(ts: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for t in ts {
            match t.as_bool() {
                Some(true) => {}
                Some(false) => return Term::bool(false),
                None => out.push(t),
            }
        }
        match out.len() {
            0 => Term::bool(true),
            1 => out.pop().expect("one element"),
            _ => Term::mk(Node::And(out)),
        }
    }

    pub fn or(ts: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for t in ts {
            match t.as_bool() {
                Some(false) => {}
                Some(true) => return Term::bool(true),
                None => out.push(t),
            }
        }
        match out.len() {
            0 => Term::bool(false),
            1 => out.pop().expect("one element"),
            _ => Term::mk(Node::Or(out)),
        }
    }

    pub fn implies(a: Term, b: Term) -> Term {
        match (a.as_bool(), b.as_bool()) {
            (Some(true), _) => b,
            (Some(false), _) | (_, Some(true)) => Term::bool(true),
            _ => Term::mk(Node::Implies(a, b)),
        }
    }

    pub fn eq(a: Term, b: Term) -> Term {
        if a == b {
            return Term::bool(true);
        }
        Term::mk(Node::Eq(a, b))
    }

    pub fn ite(c: Term, a: Term, b: Term) -> Term {
        match c.as_bool() {
            Some(true) => a,
            Some(false) => b,
            None if a == b => a,
            None => Term::mk(Node::Ite(c, a, b)),
        }
    }

    pub fn bvbin(op: BvOp, a: Term, b: Term) -> Term {
        Term::mk(Node::BvBin(op, a, b))
    }

    pub fn bvnot(a: Term) -> Term {
        Term::mk(Node::BvNot(a))
    }

    pub fn bvneg(a: Term) -> Term {
        Term::mk(Node::BvNeg(a))
    }

    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Term {
        Term::mk(Node::Cmp(op, a, b))
    }

    pub fn zero_ext(extra: u32, a: Term) -> Term {
        if extra == 0 {
            return a;
        }
        Term::mk(Node::ZeroExt(extra, a))
    }

    pub fn select(array: Term, index: Term) -> Term {
        Term::mk(Node::Select(array, index))
    }

    pub fn store(array: Term, index: Term, value: Term) -> Term {
        Term::mk(Node::Store(array, index, value))
    }

    pub fn children(&self) -> Vec<&Term> {
        match self.node() {
            Node::Sym(..) | Node::Bv(..) | Node::Bool(_) => vec![],
            Node::Not(a) | Node::BvNot(a) | Node::BvNeg(a) | Node::ZeroExt(_, a) => vec![a],
            Node::And(ts) | Node::Or(ts) => ts.iter().collect(),
            Node::Implies(a, b)
            | Node::Eq(a, b)
            | Node::BvBin(_, a, b)
            | Node::Cmp(_, a, b)
            | Node::Select(a, b) => vec![a, b],
            Node::Ite(a, b, c) | Node::Store(a, b, c) => vec![a, b, c],
        }
    }

    /// Computes the sort, checking every node on the way.
    pub fn sort(&self) -> Result<Sort, SortError> {
        let err = |msg: &str| SortError { node: print::term_to_string(self), message: msg.to_string() };
        let bool_arg = |t: &Term| -> Result<(), SortError> {
            if t.sort()? == Sort::Bool {
                Ok(())
            } else {
                Err(err("expected a Bool operand"))
            }
        };
        let bv_arg = |t: &Term| -> Result<u32, SortError> {
            match t.sort()? {
                Sort::Bv(w) => Ok(w),
                _ => Err(err("expected a bit-vector operand")),
            }
        };
        match self.node() {
            Node::Sym(_, s) => Ok(*s),
            Node::Bv(_, w) => {
                if *w == 0 {
                    Err(err("zero-width literal"))
                } else {
                    Ok(Sort::Bv(*w))
                }
            }
            Node::Bool(_) => Ok(Sort::Bool),
            Node::Not(a) => bool_arg(a).map(|_| Sort::Bool),
            Node::And(ts) | Node::Or(ts) => {
                for t in ts {
                    bool_arg(t)?;
                }
                Ok(Sort::Bool)
            }
            Node::Implies(a, b) => {
                bool_arg(a)?;
                bool_arg(b)?;
                Ok(Sort::Bool)
            }
            Node::Eq(a, b) => {
                if a.sort()? != b.sort()? {
                    return Err(err("equality between different sorts"));
                }
                Ok(Sort::Bool)
            }
            Node::Ite(c, a, b) => {
                bool_arg(c)?;
                let s = a.sort()?;
                if s != b.sort()? {
                    return Err(err("ite branches have different sorts"));
                }
                Ok(s)
            }
            Node::BvBin(_, a, b) => {
                let w = bv_arg(a)?;
                if bv_arg(b)? != w {
                    return Err(err("operand widths differ"));
                }
                Ok(Sort::Bv(w))
            }
            Node::BvNot(a) | Node::BvNeg(a) => bv_arg(a).map(Sort::Bv),
            Node::Cmp(_, a, b) => {
                if bv_arg(a)? != bv_arg(b)? {
                    return Err(err("operand widths differ"));
                }
                Ok(Sort::Bool)
            }
            Node::ZeroExt(k, a) => Ok(Sort::Bv(bv_arg(a)? + k)),
            Node::Select(arr, i) => match arr.sort()? {
                Sort::Array(iw, ew) if bv_arg(i)? == iw => Ok(Sort::Bv(ew)),
                _ => Err(err("select on a non-array or with a mistyped index")),
            },
            Node::Store(arr, i, v) => match arr.sort()? {
                Sort::Array(iw, ew) if bv_arg(i)? == iw && bv_arg(v)? == ew => Ok(Sort::Array(iw, ew)),
                _ => Err(err("store on a non-array or with mistyped operands")),
            },
        }
    }

    /// Visits every distinct subterm once.
    pub fn visit_distinct<'a>(&'a self, seen: &mut HashSet<&'a Term>, f: &mut impl FnMut(&'a Term)) {
        if !seen.insert(self) {
            return;
        }
        f(self);
        for c in self.children() {
            c.visit_distinct(seen, f);
        }
    }

    /// Free symbol names in this term.
    pub fn symbols(&self, out: &mut HashSet<Arc<str>>) {
        let mut seen = HashSet::new();
        self.visit_distinct(&mut seen, &mut |t| {
            if let Node::Sym(name, _) = t.node() {
                out.insert(name.clone());
            }
        });
    }
}

/// A verification condition: declared symbols, definitions `sym = term`, side
/// constraints, and a goal. The script is satisfiable iff some execution violates
/// an assertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcScript {
    pub decls: Vec<(String, Sort)>,
    pub defs: Vec<(String, Term)>,
    pub constraints: Vec<Term>,
    pub goal: Term,
}

impl Default for VcScript {
    fn default() -> Self {
        VcScript { decls: vec![], defs: vec![], constraints: vec![], goal: Term::bool(false) }
    }
}

impl VcScript {
    pub fn uses_arrays(&self) -> bool {
        self.decls.iter().any(|(_, s)| matches!(s, Sort::Array(..)))
    }

    pub fn sort_of(&self, name: &str) -> Option<Sort> {
        self.decls.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    /// All top-level conjuncts in print order (definitions, constraints, goal).
    pub fn conjuncts(&self) -> Vec<Term> {
        let mut out: Vec<Term> = self
            .defs
            .iter()
            .map(|(name, t)| {
                let sort = self.sort_of(name).unwrap_or(Sort::Bool);
                Term::eq(Term::sym(name, sort), t.clone())
            })
            .collect();
        out.extend(self.constraints.iter().cloned());
        out.push(self.goal.clone());
        out
    }

    /// Drops definitions (and their declarations) that neither the goal nor any
    /// constraint depends on. Every dropped definition introduces a fresh symbol, so
    /// satisfiability is unchanged.
    pub fn sliced(&self) -> VcScript {
        let defs: std::collections::HashMap<&str, &Term> =
            self.defs.iter().map(|(n, t)| (n.as_str(), t)).collect();
        let mut needed: HashSet<Arc<str>> = HashSet::new();
        let mut work: Vec<Arc<str>> = Vec::new();
        let mut roots: HashSet<Arc<str>> = HashSet::new();
        self.goal.symbols(&mut roots);
        for c in &self.constraints {
            c.symbols(&mut roots);
        }
        work.extend(roots);
        while let Some(s) = work.pop() {
            if !needed.insert(s.clone()) {
                continue;
            }
            if let Some(t) = defs.get(&*s) {
                let mut syms = HashSet::new();
                t.symbols(&mut syms);
                work.extend(syms.into_iter().filter(|x| !needed.contains(x)));
            }
        }
        VcScript {
            decls: self.decls.iter().filter(|(n, _)| needed.contains(n.as_str())).cloned().collect(),
            defs: self.defs.iter().filter(|(n, _)| needed.contains(n.as_str())).cloned().collect(),
            constraints: self.constraints.clone(),
            goal: self.goal.clone(),
        }
    }

    /// Checks sorts of every conjunct and that each symbol is declared exactly once.
    pub fn check(&self) -> Result<(), SortError> {
        let mut names = HashSet::new();
        for (n, _) in &self.decls {
            if !names.insert(n.as_str()) {
                return Err(SortError { node: n.clone(), message: "declared twice".into() });
            }
        }
        for c in self.conjuncts() {
            if c.sort()? != Sort::Bool {
                return Err(SortError { node: c.to_string(), message: "conjunct is not Bool".into() });
            }
            let mut syms = HashSet::new();
            c.symbols(&mut syms);
            for s in syms {
                if self.sort_of(&s).is_none() {
                    return Err(SortError { node: s.to_string(), message: "undeclared symbol".into() });
                }
            }
        }
        for (n, t) in &self.defs {
            let declared = self.sort_of(n);
            if declared != Some(t.sort()?) {
                return Err(SortError { node: n.clone(), message: "definition sort differs from declaration".into() });
            }
        }
        Ok(())
    }

    /// Distinct array `select` and `store` subterms across the whole script.
    pub fn count_array_ops(&self) -> (usize, usize) {
        let conj = self.conjuncts();
        let mut seen = HashSet::new();
        let (mut reads, mut writes) = (0, 0);
        for c in &conj {
            c.visit_distinct(&mut seen, &mut |t| match t.node() {
                Node::Select(..) => reads += 1,
                Node::Store(..) => writes += 1,
                _ => {}
            });
        }
        (reads, writes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_folding() {
        let x = Term::sym("x", Sort::Bool);
        assert_eq!(Term::and([Term::bool(true), x.clone()]), x);
        assert_eq!(Term::or([Term::bool(true), x.clone()]), Term::bool(true));
        assert_eq!(Term::ite(Term::bool(false), Term::bv(1, 8), Term::bv(2, 8)), Term::bv(2, 8));
        assert_eq!(Term::not(Term::not(x.clone())), x);
    }

    #[test]
    fn sort_errors_name_the_node() {
        let t = Term::bvbin(BvOp::Add, Term::bv(1, 8), Term::bv(1, 16));
        let e = t.sort().unwrap_err();
        assert!(e.node.contains("bvadd"));
        let arr = Term::sym("m", Sort::Array(8, 8));
        assert_eq!(Term::select(arr.clone(), Term::bv(4, 8)).sort(), Ok(Sort::Bv(8)));
        assert!(Term::select(arr, Term::bv(4, 16)).sort().is_err());
    }

    #[test]
    fn array_ops_are_counted_once() {
        let m = Term::sym("m", Sort::Array(8, 8));
        let r = Term::select(m.clone(), Term::bv(4, 8));
        let mut s = VcScript::default();
        s.decls.push(("m".into(), Sort::Array(8, 8)));
        s.goal = Term::eq(r.clone(), Term::select(Term::store(m, Term::bv(4, 8), r), Term::bv(5, 8)));
        assert_eq!(s.count_array_ops(), (2, 1));
        assert_eq!(VcScript::default().count_array_ops(), (0, 0));
    }

    #[test]
    fn slicing_keeps_dependencies() {
        let mut s = VcScript::default();
        for n in ["a", "b", "c"] {
            s.decls.push((n.into(), Sort::Bv(8)));
        }
        s.defs.push(("a".into(), Term::bv(1, 8)));
        s.defs.push(("b".into(), Term::sym("a", Sort::Bv(8))));
        s.defs.push(("c".into(), Term::bv(3, 8)));
        s.goal = Term::eq(Term::sym("b", Sort::Bv(8)), Term::bv(2, 8));
        let sl = s.sliced();
        assert_eq!(sl.defs.len(), 2);
        assert!(sl.sort_of("c").is_none());
        sl.check().unwrap();
    }
}
