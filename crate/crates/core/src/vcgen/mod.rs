//! Verification conditions for flattened programs.
//!
//! [`encode_ownsem`] models pointers as `(addr, val, ret_val)` triples: loads through
//! owned or borrowed pointers read `val`, mutable borrows link the successor's value
//! to the borrow's final value through a prophecy symbol, and `die` resolves it.
//! [`encode_baseline`] keeps pointers as bare addresses and sends every access, cache
//! operations included, through arrays.
//!
//! Both encoders assume the program is free of undefined behavior and follow the
//! ownership discipline (a successor is not used while its borrow is live). Callers
//! establish that first by running the concrete machine.

use std::collections::HashMap;

use thiserror::Error;

use crate::ir::{
    nondet_sites, BinOp, Instr, Level, Loc, Operand, PairKind, Program, Reg, RegKind, UnOp,
};
use crate::machine::FIRST_ADDR;
use crate::smt::{BvOp, CmpOp, Sort, Term, VcScript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcError {
    #[error("program must be flattened to a single block first (has {0} blocks)")]
    NotFlattened(usize),
    #[error("{loc}: `{mnemonic}` is not supported by the encoder")]
    UnsupportedInstr { loc: String, mnemonic: String },
    #[error("{loc}: allocation size must be a constant")]
    SymbolicAllocation { loc: String },
    #[error("{loc}: allocations exceed the {width}-bit address space")]
    AddressSpace { loc: String, width: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoding {
    Ownsem,
    Baseline,
}

impl Encoding {
    pub fn name(self) -> &'static str {
        match self {
            Encoding::Ownsem => "ownsem",
            Encoding::Baseline => "baseline",
        }
    }
}

pub fn encode_ownsem(program: &Program) -> Result<VcScript, VcError> {
    encode(program, Encoding::Ownsem)
}

pub fn encode_baseline(program: &Program) -> Result<VcScript, VcError> {
    encode(program, Encoding::Baseline)
}

/// Encodes and slices away definitions the goal does not depend on.
pub fn encode(program: &Program, encoding: Encoding) -> Result<VcScript, VcError> {
    if program.blocks.len() != 1 {
        return Err(VcError::NotFlattened(program.blocks.len()));
    }
    let mut enc = Encoder::new(program, encoding);
    let body = &program.blocks[0].body;
    for (i, stmt) in body.iter().enumerate() {
        let loc = Loc::body(0, i);
        let guard = stmt.guard.as_ref().map(|g| enc.truthy(&enc.scalar(g)));
        enc.instr(loc, i, guard.unwrap_or_else(|| Term::bool(true)), &stmt.instr)?;
    }
    Ok(enc.finish().sliced())
}

/// Which allocation-time tag a pointer register may carry, as a decision tree over
/// select conditions. Leaves index `Encoder::kinds`.
#[derive(Debug, Clone)]
enum Id {
    Base(usize),
    Ite(Term, Box<Id>, Box<Id>),
}

impl Id {
    fn ite(c: Term, a: Id, b: Id) -> Id {
        match (&a, &b) {
            (Id::Base(x), Id::Base(y)) if x == y => a,
            _ => Id::Ite(c, Box::new(a), Box::new(b)),
        }
    }

    /// The kind shared by every leaf, if they agree.
    fn kind(&self, kinds: &[Kind]) -> Option<Kind> {
        match self {
            Id::Base(b) => kinds.get(*b).copied(),
            Id::Ite(_, x, y) => match (x.kind(kinds), y.kind(kinds)) {
                (Some(a), Some(b)) if a == b => Some(a),
                _ => None,
            },
        }
    }

    /// Condition under which `self` and `other` carry the same tag.
    fn same(&self, other: &Id) -> Term {
        match (self, other) {
            (Id::Base(a), Id::Base(b)) => Term::bool(a == b),
            (Id::Ite(c, x, y), o) | (o, Id::Ite(c, x, y)) => Term::ite(c.clone(), x.same(o), y.same(o)),
        }
    }

    fn holds(&self, pred: &impl Fn(usize) -> bool) -> Term {
        match self {
            Id::Base(b) => Term::bool(pred(*b)),
            Id::Ite(c, x, y) => Term::ite(c.clone(), x.holds(pred), y.holds(pred)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    O,
    Mb,
    Rb,
    C,
    U,
}

#[derive(Debug, Clone)]
struct SymPtr {
    addr: Term,
    val: Term,
    ret: Term,
    id: Id,
    /// The cache mirrors memory (automatic-cache levels only).
    cached: bool,
}

struct Encoder<'a> {
    program: &'a Program,
    encoding: Encoding,
    width: u32,
    script: VcScript,
    scalars: HashMap<Reg, Term>,
    ptrs: HashMap<Reg, SymPtr>,
    mems: HashMap<Reg, Term>,
    cur_mem: Option<Term>,
    shadow: Option<Term>,
    shadow_versions: usize,
    kinds: Vec<Kind>,
    next_addr: u64,
    variants: HashMap<Reg, usize>,
    last_use: HashMap<Reg, usize>,
    sites: HashMap<Loc, usize>,
    ok: Term,
    ok_count: usize,
    failures: Vec<Term>,
}

impl<'a> Encoder<'a> {
    fn new(program: &'a Program, encoding: Encoding) -> Self {
        let mut last_use = HashMap::new();
        for (i, s) in program.blocks[0].body.iter().enumerate() {
            for r in s.instr.uses().into_iter().chain(s.guard.as_ref()) {
                let r = r.clone();
                last_use.insert(r, i);
            }
        }
        Encoder {
            program,
            encoding,
            width: program.width,
            script: VcScript::default(),
            scalars: HashMap::new(),
            ptrs: HashMap::new(),
            mems: HashMap::new(),
            cur_mem: None,
            shadow: None,
            shadow_versions: 0,
            kinds: Vec::new(),
            next_addr: FIRST_ADDR,
            variants: HashMap::new(),
            last_use,
            sites: nondet_sites(program),
            ok: Term::bool(true),
            ok_count: 0,
            failures: Vec::new(),
        }
    }

    fn finish(mut self) -> VcScript {
        self.script.goal = Term::or(self.failures.drain(..));
        self.script
    }

    fn word(&self) -> Sort {
        Sort::Bv(self.width)
    }

    fn mem_sort(&self) -> Sort {
        Sort::Array(self.width, self.width)
    }

    fn declare(&mut self, name: String, sort: Sort) -> Term {
        let t = Term::sym(&name, sort);
        self.script.decls.push((name, sort));
        t
    }

    fn define(&mut self, name: String, sort: Sort, term: Term) -> Term {
        let t = self.declare(name.clone(), sort);
        self.script.defs.push((name, term));
        t
    }

    fn truthy(&self, t: &Term) -> Term {
        Term::not(Term::eq(t.clone(), Term::bv(0, self.width)))
    }

    fn from_bool(&self, b: Term) -> Term {
        Term::ite(b, Term::bv(1, self.width), Term::bv(0, self.width))
    }

    fn scalar(&self, r: &Reg) -> Term {
        self.scalars.get(r).cloned().unwrap_or_else(|| Term::sym(r.name(), Sort::Bv(self.width)))
    }

    fn operand(&self, op: &Operand) -> Term {
        match op {
            Operand::Const(c) => Term::bv(*c, self.width),
            Operand::Reg(r) => self.scalar(r),
        }
    }

    fn ptr(&self, r: &Reg) -> SymPtr {
        self.ptrs.get(r).cloned().unwrap_or_else(|| {
            // Unreachable for validated programs; keep the encoding total.
            SymPtr {
                addr: Term::sym(&format!("{}.addr", r.name()), self.word()),
                val: Term::sym(&format!("{}.val", r.name()), self.word()),
                ret: Term::sym(&format!("{}.ret_val", r.name()), self.word()),
                id: Id::Base(usize::MAX),
                cached: false,
            }
        })
    }

    fn mem(&self, r: &Reg) -> Term {
        self.mems.get(r).cloned().unwrap_or_else(|| Term::sym(r.name(), self.mem_sort()))
    }

    fn current_mem(&mut self) -> Term {
        match &self.cur_mem {
            Some(m) => m.clone(),
            None => {
                let m = self.declare("mem_init".into(), self.mem_sort());
                self.cur_mem = Some(m.clone());
                m
            }
        }
    }

    fn ownsem(&self) -> bool {
        self.encoding == Encoding::Ownsem
    }

    fn auto_cache(&self) -> bool {
        self.ownsem() && self.program.level != Level::M2
    }

    /// The value a pointer currently designates: its cache when that is trusted,
    /// otherwise a memory read.
    fn current_val(&mut self, p: &SymPtr) -> Term {
        if self.auto_cache() && !p.cached {
            let m = self.current_mem();
            Term::select(m, p.addr.clone())
        } else {
            p.val.clone()
        }
    }

    fn def_scalar(&mut self, dst: &Reg, t: Term) {
        let s = self.define(dst.name().to_string(), self.word(), t);
        self.scalars.insert(dst.clone(), s);
    }

    fn def_mem(&mut self, dst: &Reg, t: Term) {
        let s = self.define(dst.name().to_string(), self.mem_sort(), t);
        self.mems.insert(dst.clone(), s.clone());
        self.cur_mem = Some(s);
    }

    fn new_base(&mut self, kind: Kind) -> Id {
        self.kinds.push(kind);
        Id::Base(self.kinds.len() - 1)
    }

    /// Binds a pointer register, naming each field with its own symbol.
    fn def_ptr(&mut self, dst: &Reg, addr: Term, val: Option<Term>, ret: Option<Term>, id: Id, cached: bool) {
        let w = self.word();
        let name = &dst.name();
        let addr = self.define(format!("{name}.addr"), w, addr);
        let (val, ret) = if self.ownsem() {
            let val = match val {
                Some(v) => self.define(format!("{name}.val"), w, v),
                None => self.declare(format!("{name}.val"), w),
            };
            let ret = match ret {
                Some(r) => self.define(format!("{name}.ret_val"), w, r),
                None => self.declare(format!("{name}.ret_val"), w),
            };
            (val, ret)
        } else {
            (Term::bv(0, self.width), Term::bv(0, self.width))
        };
        self.ptrs.insert(dst.clone(), SymPtr { addr, val, ret, id, cached });
    }

    fn allocate(&mut self, loc: Loc, size: Option<&Operand>) -> Result<u64, VcError> {
        let stride = self.program.word_bytes();
        let size = match size {
            None => stride,
            Some(Operand::Const(c)) => *c & crate::ir::word_mask(self.width),
            Some(Operand::Reg(_)) => {
                return Err(VcError::SymbolicAllocation { loc: loc.display(self.program).to_string() })
            }
        };
        let base = self.next_addr;
        let end = base.checked_add(size.max(1));
        match end {
            Some(e) if e - 1 <= crate::ir::word_mask(self.width) => {
                self.next_addr = e.div_ceil(stride) * stride;
                Ok(base)
            }
            _ => Err(VcError::AddressSpace { loc: loc.display(self.program).to_string(), width: self.width }),
        }
    }

    /// `mem_out = guard ? store(mem_in, addr, value) : mem_in`.
    fn write(&mut self, mem_out: &Reg, mem_in: Term, guard: &Term, addr: Term, value: Term) {
        let t = Term::ite(guard.clone(), Term::store(mem_in.clone(), addr, value), mem_in);
        self.def_mem(mem_out, t);
    }

    /// After a store through `p`, every live register with the same tag sees the new value.
    fn sync_caches(&mut self, i: usize, guard: &Term, p: &SymPtr, value: &Term) {
        let mut regs: Vec<Reg> = self
            .ptrs
            .iter()
            .filter(|(r, x)| x.cached && self.last_use.get(*r).is_some_and(|&u| u > i))
            .map(|(r, _)| r.clone())
            .collect();
        regs.sort_by(|a, b| a.name().cmp(b.name()));
        for r in regs {
            let x = self.ptrs[&r].clone();
            let cond = Term::and([guard.clone(), x.id.same(&p.id)]);
            if cond.as_bool() == Some(false) {
                continue;
            }
            let n = self.variants.entry(r.clone()).or_insert(0);
            *n += 1;
            let name = format!("{}.{}.val", r.name(), n);
            let v = self.define(name, self.word(), Term::ite(cond, value.clone(), x.val.clone()));
            self.ptrs.get_mut(&r).expect("present").val = v;
        }
    }

    fn check(&mut self, guard: Term, cond: Term, is_assert: bool) {
        let holds = self.truthy(&cond);
        if is_assert {
            let fail = Term::and([self.ok.clone(), guard.clone(), Term::not(holds.clone())]);
            self.failures.push(fail);
        }
        let next = Term::and([self.ok.clone(), Term::implies(guard, holds)]);
        if next.as_bool().is_some() {
            self.ok = next;
        } else {
            let name = format!("ok_{}", self.ok_count);
            self.ok_count += 1;
            self.ok = self.define(name, Sort::Bool, next);
        }
    }

    fn unsupported(&self, loc: Loc, instr: &Instr) -> VcError {
        VcError::UnsupportedInstr { loc: loc.display(self.program).to_string(), mnemonic: instr.mnemonic().to_string() }
    }

    fn binop(&self, op: BinOp, a: Term, b: Term) -> Term {
        let arith = |o| Term::bvbin(o, a.clone(), b.clone());
        let cmp = |o| self.from_bool(Term::cmp(o, a.clone(), b.clone()));
        match op {
            BinOp::Add => arith(BvOp::Add),
            BinOp::Sub => arith(BvOp::Sub),
            BinOp::Mul => arith(BvOp::Mul),
            BinOp::And => arith(BvOp::And),
            BinOp::Or => arith(BvOp::Or),
            BinOp::Xor => arith(BvOp::Xor),
            BinOp::LAnd => self.from_bool(Term::and([self.truthy(&a), self.truthy(&b)])),
            BinOp::LOr => self.from_bool(Term::or([self.truthy(&a), self.truthy(&b)])),
            BinOp::Eq => self.from_bool(Term::eq(a, b)),
            BinOp::Ne => self.from_bool(Term::not(Term::eq(a, b))),
            BinOp::Ult => cmp(CmpOp::Ult),
            BinOp::Ule => cmp(CmpOp::Ule),
            BinOp::Ugt => cmp(CmpOp::Ugt),
            BinOp::Uge => cmp(CmpOp::Uge),
            BinOp::Slt => cmp(CmpOp::Slt),
            BinOp::Sle => cmp(CmpOp::Sle),
            BinOp::Sgt => cmp(CmpOp::Sgt),
            BinOp::Sge => cmp(CmpOp::Sge),
        }
    }

    fn instr(&mut self, loc: Loc, i: usize, guard: Term, instr: &Instr) -> Result<(), VcError> {
        let w = self.width;
        match instr {
            Instr::Copy { dst, src } => match dst.kind() {
                RegKind::Scalar => {
                    let t = self.operand(src);
                    self.def_scalar(dst, t);
                }
                RegKind::Ptr => {
                    let src = src.reg().expect("pointer copy of a register");
                    let p = self.ptr(src);
                    self.def_ptr(dst, p.addr, Some(p.val), Some(p.ret), p.id, p.cached);
                }
                RegKind::Mem => {
                    let m = self.mem(src.reg().expect("memory copy of a register"));
                    self.def_mem(dst, m);
                }
            },
            Instr::Unary { dst, op, arg } => {
                let a = self.operand(arg);
                let t = match op {
                    UnOp::Not => self.from_bool(Term::eq(a, Term::bv(0, w))),
                    UnOp::BitNot => Term::bvnot(a),
                    UnOp::Neg => Term::bvneg(a),
                };
                self.def_scalar(dst, t);
            }
            Instr::Binary { dst, op, lhs, rhs } => {
                let t = self.binop(*op, self.operand(lhs), self.operand(rhs));
                self.def_scalar(dst, t);
            }
            Instr::Select { dst, cond, then_val, else_val } => {
                let c = self.truthy(&self.operand(cond));
                match dst.kind() {
                    RegKind::Scalar => {
                        let t = Term::ite(c, self.operand(then_val), self.operand(else_val));
                        self.def_scalar(dst, t);
                    }
                    RegKind::Ptr => {
                        let a = self.ptr(then_val.reg().expect("pointer operand"));
                        let b = self.ptr(else_val.reg().expect("pointer operand"));
                        let id = Id::ite(c.clone(), a.id, b.id);
                        self.def_ptr(
                            dst,
                            Term::ite(c.clone(), a.addr, b.addr),
                            Some(Term::ite(c.clone(), a.val, b.val)),
                            Some(Term::ite(c, a.ret, b.ret)),
                            id,
                            a.cached && b.cached,
                        );
                    }
                    RegKind::Mem => {
                        let t = Term::ite(
                            c,
                            self.mem(then_val.reg().expect("memory operand")),
                            self.mem(else_val.reg().expect("memory operand")),
                        );
                        self.def_mem(dst, t);
                    }
                }
            }
            Instr::Nondet { dst, bits } => {
                let site = self.sites[&loc];
                let nd = self.declare(format!("nd_{site}"), Sort::Bv(*bits));
                self.def_scalar(dst, Term::zero_ext(w - bits, nd));
            }
            Instr::MemInit { dst } => {
                let m = self.declare(dst.name().to_string(), self.mem_sort());
                self.mems.insert(dst.clone(), m.clone());
                self.cur_mem = Some(m);
            }
            Instr::MkOwn { ptr, mem_out, arg, mem_in } => {
                let m_in = self.mem(mem_in);
                let sized = self.program.level == Level::M2;
                let base = self.allocate(loc, if sized { Some(arg) } else { None })?;
                let addr = Term::bv(base, w);
                let id = self.new_base(Kind::O);
                if sized {
                    self.def_ptr(ptr, addr, None, None, id, false);
                    self.def_mem(mem_out, m_in);
                } else {
                    let n = self.operand(arg);
                    self.def_ptr(ptr, addr.clone(), Some(n.clone()), None, id, true);
                    self.write(mem_out, m_in, &guard, addr, n);
                }
            }
            Instr::Malloc { ptr, mem_out, size, mem_in } => {
                let m_in = self.mem(mem_in);
                let base = self.allocate(loc, Some(size))?;
                let id = self.new_base(Kind::C);
                self.def_ptr(ptr, Term::bv(base, w), None, None, id, false);
                self.def_mem(mem_out, m_in);
            }
            Instr::MkBor { dst, lender, pair, offset } => {
                let body = &self.program.blocks[0].body;
                let Some(Instr::MkSuc { dst: succ, .. }) = body.get(i + 1).map(|s| &s.instr) else {
                    return Err(self.unsupported(loc, instr));
                };
                let l = self.ptr(lender);
                let addr = match offset {
                    Some(o) => Term::bvbin(BvOp::Add, l.addr.clone(), self.operand(o)),
                    None => l.addr.clone(),
                };
                let lk = l.id.kind(&self.kinds).unwrap_or(Kind::O);
                let cur = self.current_val(&l);
                match pair {
                    PairKind::Mut => {
                        let proph = self.declare(format!("proph_{i}"), self.word());
                        let bid = self.new_base(Kind::Mb);
                        let sid = self.new_base(lk);
                        self.def_ptr(dst, addr, Some(cur), Some(proph.clone()), bid, true);
                        self.def_ptr(succ, l.addr, Some(proph), Some(l.ret), sid, true);
                    }
                    PairKind::Ro => {
                        let bid = self.new_base(Kind::Rb);
                        let sid = self.new_base(lk);
                        self.def_ptr(dst, addr, Some(cur.clone()), None, bid, true);
                        self.def_ptr(succ, l.addr, Some(cur), Some(l.ret), sid, true);
                    }
                    PairKind::Copy => {
                        let bid = self.new_base(Kind::C);
                        let sid = self.new_base(lk);
                        self.def_ptr(dst, addr, Some(l.val.clone()), None, bid, false);
                        self.def_ptr(succ, l.addr, Some(l.val), Some(l.ret), sid, false);
                    }
                }
            }
            Instr::MkSuc { .. } => {}
            Instr::Die { ptr } => {
                if self.ownsem() {
                    let q = self.ptr(ptr);
                    let kinds = self.kinds.clone();
                    let is_mb = q.id.holds(&|b| kinds.get(b) == Some(&Kind::Mb));
                    let cur = self.current_val(&q);
                    let c = Term::implies(Term::and([guard, is_mb]), Term::eq(q.ret.clone(), cur));
                    if c.as_bool() != Some(true) {
                        self.script.constraints.push(c);
                    }
                }
            }
            Instr::Load { dst, ptr, mem } => {
                if dst.kind() != RegKind::Scalar {
                    return Err(self.unsupported(loc, instr));
                }
                let p = self.ptr(ptr);
                let t = if self.auto_cache() && p.cached {
                    p.val
                } else {
                    Term::select(self.mem(mem), p.addr)
                };
                self.def_scalar(dst, t);
            }
            Instr::Store { mem_out, value, ptr, mem_in } => {
                if value.kind() != RegKind::Scalar {
                    return Err(self.unsupported(loc, instr));
                }
                let p = self.ptr(ptr);
                let v = self.operand(value);
                let m_in = self.mem(mem_in);
                self.write(mem_out, m_in, &guard, p.addr.clone(), v.clone());
                if self.auto_cache() {
                    self.sync_caches(i, &guard, &p, &v);
                }
            }
            Instr::SetCache { dst, src, value } => {
                let p = self.ptr(src);
                let v = self.operand(value);
                if self.ownsem() {
                    self.def_ptr(dst, p.addr, Some(v), Some(p.ret), p.id, p.cached);
                } else {
                    let sh = self.shadow();
                    let n = self.shadow_versions;
                    self.shadow_versions += 1;
                    let t = Term::ite(guard, Term::store(sh.clone(), p.addr.clone(), v), sh);
                    let s = self.define(format!("shadow_{n}"), self.mem_sort(), t);
                    self.shadow = Some(s);
                    self.def_ptr(dst, p.addr, None, None, p.id, false);
                }
            }
            Instr::GetCache { dst, ptr } => {
                let p = self.ptr(ptr);
                let t = if self.ownsem() {
                    p.val
                } else {
                    Term::select(self.shadow(), p.addr)
                };
                self.def_scalar(dst, t);
            }
            Instr::BeginUnique { dst, src } | Instr::EndUnique { dst, src } => {
                let p = self.ptr(src);
                let kind = if matches!(instr, Instr::BeginUnique { .. }) { Kind::U } else { Kind::C };
                let id = self.new_base(kind);
                self.def_ptr(dst, p.addr, Some(p.val), Some(p.ret), id, false);
            }
            Instr::MutMkborMem2Reg { .. } | Instr::MovReg2Mem { .. } => {
                return Err(self.unsupported(loc, instr));
            }
            Instr::Assume { cond } => {
                let c = self.operand(cond);
                self.check(guard, c, false);
            }
            Instr::Assert { cond } => {
                let c = self.operand(cond);
                self.check(guard, c, true);
            }
        }
        Ok(())
    }

    fn shadow(&mut self) -> Term {
        match &self.shadow {
            Some(s) => s.clone(),
            None => {
                let s = self.declare("shadow_init".into(), self.mem_sort());
                self.shadow = Some(s.clone());
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse;

    fn flat(src: &str) -> Program {
        crate::ir::flatten(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn scalar_programs_encode_identically() {
        let p = flat("fun f() width(8) { B: r0 = nd_char() r1 = r0 + 1 assert r1 != 0 halt }");
        let a = encode_ownsem(&p).unwrap();
        let b = encode_baseline(&p).unwrap();
        assert_eq!(a, b);
        assert!(!a.uses_arrays());
        a.check().unwrap();
    }

    #[test]
    fn multi_block_programs_are_rejected() {
        let p = parse("fun f() { A: br B B: halt }").unwrap();
        assert_eq!(encode_ownsem(&p), Err(VcError::NotFlattened(2)));
    }

    #[test]
    fn pointer_memory_is_unsupported() {
        let p = flat(
            "fun f() level(m3) { B: m0 = mem.init() p0, m1 = mk_own 1, m0 \
             p1, m2 = mk_own 2, m1 m3 = mov_reg2mem p0, p1, m2 halt }",
        );
        assert!(matches!(encode_ownsem(&p), Err(VcError::UnsupportedInstr { .. })));
    }

    #[test]
    fn cached_load_reads_no_array() {
        let p = flat(include_str!("../../../../programs/walkthrough_checked.oseair"));
        let own = encode_ownsem(&p).unwrap();
        let base = encode_baseline(&p).unwrap();
        assert_eq!(own.count_array_ops().0, 0);
        assert!(base.count_array_ops().0 >= 2);
        own.check().unwrap();
        base.check().unwrap();
    }
}
