use std::collections::{BTreeMap, HashMap};

use crate::ir::{
    eval_binop, eval_unop, nondet_sites, word_mask, Instr, Level, Loc, Operand, PairKind, Pos, Program, Reg,
    RegKind, Terminator,
};

use super::borrow::{BorrowStore, PtrKind, Rule};
use super::m1::{Fault, M1Config};
use super::{
    CacheVal, FatPtr, MemCell, Oracle, Outcome, RunConfig, RunError, Stats, Status, TraceStep, Value,
    FIRST_ADDR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Pc {
    Phis,
    Body(usize),
    Term,
}

/// Pointer as exposed to the lockstep comparison: the cache is hidden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObservedValue {
    Word(u64),
    Ptr { addr: u64, tag: u64 },
    Mem(u64),
}

/// Machine state with every pointer cache projected away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub pc: Option<Loc>,
    pub status: Status,
    pub regs: BTreeMap<String, ObservedValue>,
    pub mem: BTreeMap<u64, ObservedValue>,
    pub borrows: BorrowStore,
}

/// One machine instance. `cached` selects the pointer-cache discipline.
pub struct Machine<'p> {
    program: &'p Program,
    cached: bool,
    m1: M1Config,
    config: RunConfig,
    mask: u64,
    sites: HashMap<Loc, usize>,
    site_used: Vec<bool>,
    overflow: usize,
    oracle: Oracle,
    block: usize,
    prev_block: Option<usize>,
    pc: Pc,
    regs: HashMap<Reg, Value>,
    def_order: Vec<Reg>,
    mem: BTreeMap<u64, MemCell>,
    borrows: BorrowStore,
    next_tag: u64,
    next_addr: u64,
    mem_version: u64,
    status: Status,
    stats: Stats,
    trace: Vec<TraceStep>,
    notes: Vec<String>,
}

fn entry_pc(program: &Program, block: usize) -> Pc {
    let b = &program.blocks[block];
    if !b.phis.is_empty() {
        Pc::Phis
    } else if !b.body.is_empty() {
        Pc::Body(0)
    } else {
        Pc::Term
    }
}

impl<'p> Machine<'p> {
    pub(crate) fn new(program: &'p Program, oracle: Oracle, cached: bool, m1: M1Config, config: RunConfig) -> Self {
        let sites = nondet_sites(program);
        let n = sites.len();
        Machine {
            program,
            cached,
            m1,
            config,
            mask: word_mask(program.width),
            sites,
            site_used: vec![false; n],
            overflow: 0,
            oracle,
            block: 0,
            prev_block: None,
            pc: if program.blocks.is_empty() { Pc::Term } else { entry_pc(program, 0) },
            regs: HashMap::new(),
            def_order: Vec::new(),
            mem: BTreeMap::new(),
            borrows: BorrowStore::default(),
            next_tag: 1,
            next_addr: FIRST_ADDR,
            mem_version: 0,
            status: if program.blocks.is_empty() { Status::Halted } else { Status::Running },
            stats: Stats::default(),
            trace: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    pub fn registers(&self) -> impl Iterator<Item = (&Reg, &Value)> {
        self.def_order.iter().filter_map(|r| self.regs.get(r).map(|v| (r, v)))
    }

    pub fn memory(&self) -> &BTreeMap<u64, MemCell> {
        &self.mem
    }

    pub fn borrows(&self) -> &BorrowStore {
        &self.borrows
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    /// Overwrites a register's cache; used to build negative controls.
    pub fn corrupt_cache(&mut self, reg: &Reg, cache: Option<CacheVal>) {
        if let Some(Value::Ptr(p)) = self.regs.get_mut(reg) {
            p.cache = cache;
        }
    }

    fn current_loc(&self) -> Option<Loc> {
        if !self.is_running() {
            return None;
        }
        let pos = match self.pc {
            Pc::Phis => Pos::Phi(0),
            Pc::Body(i) => Pos::Body(i),
            Pc::Term => Pos::Term,
        };
        Some(Loc { block: self.block, pos })
    }

    pub fn observe(&self) -> Observation {
        let project = |v: &Value| match v {
            Value::Word(w) => ObservedValue::Word(*w),
            Value::Ptr(p) => ObservedValue::Ptr { addr: p.addr, tag: p.tag },
            Value::Mem(m) => ObservedValue::Mem(*m),
        };
        Observation {
            pc: self.current_loc(),
            status: self.status.clone(),
            regs: self.regs.iter().map(|(r, v)| (r.name().to_string(), project(v))).collect(),
            mem: self
                .mem
                .iter()
                .map(|(a, c)| {
                    let v = match c {
                        MemCell::Word(w) => ObservedValue::Word(*w),
                        MemCell::Ptr { addr, tag, .. } => ObservedValue::Ptr { addr: *addr, tag: *tag },
                    };
                    (*a, v)
                })
                .collect(),
            borrows: self.borrows.clone(),
        }
    }

    pub fn run(mut self) -> Result<Outcome, RunError> {
        while self.is_running() {
            if self.stats.steps >= self.config.step_limit {
                return Err(RunError::StepLimitExceeded(self.config.step_limit));
            }
            self.step();
        }
        Ok(self.into_outcome())
    }

    pub fn into_outcome(self) -> Outcome {
        let registers = self
            .def_order
            .iter()
            .filter_map(|r| self.regs.get(r).map(|v| (r.name().to_string(), *v)))
            .collect();
        Outcome { status: self.status, registers, trace: self.trace, stats: self.stats }
    }

    /// Executes one statement (a borrow pair counts as one).
    pub fn step(&mut self) {
        let Some(loc) = self.current_loc() else { return };
        self.stats.steps += 1;
        self.notes.clear();
        let tracing = self.config.record_trace;
        let block = &self.program.blocks[self.block];
        let text = if !tracing {
            String::new()
        } else {
            match self.pc {
                Pc::Phis => block.phis.iter().map(|p| format!("{} = phi", p.dst)).collect::<Vec<_>>().join(", "),
                Pc::Body(i) => {
                    let stmt = &block.body[i];
                    match (&stmt.instr, block.body.get(i + 1)) {
                        (Instr::MkBor { .. }, Some(next)) => format!("{stmt} / {next}"),
                        _ => stmt.to_string(),
                    }
                }
                Pc::Term => block.terminator.to_string(),
            }
        };
        let result = match self.pc {
            Pc::Phis => self.exec_phis(),
            Pc::Body(i) => self.exec_stmt(loc, i),
            Pc::Term => self.exec_term(),
        };
        if let Err(rule) = result {
            self.status = Status::Ub { rule, loc };
            self.notes.push(format!("UB({rule})"));
        }
        if self.config.record_trace {
            let delta = if self.notes.is_empty() { "-".to_string() } else { self.notes.join(", ") };
            self.trace.push(TraceStep { step: self.stats.steps, loc, instr: text, delta });
        }
    }

    fn note(&mut self, f: impl FnOnce() -> String) {
        if self.config.record_trace {
            self.notes.push(f());
        }
    }

    fn def(&mut self, reg: &Reg, v: Value) {
        if self.regs.insert(reg.clone(), v).is_none() {
            self.def_order.push(reg.clone());
        }
        self.note(|| format!("R[{reg}] = {v}"));
    }

    fn value(&self, op: &Operand) -> Result<Value, Rule> {
        match op {
            Operand::Const(c) => Ok(Value::Word(c & self.mask)),
            Operand::Reg(r) => self.regs.get(r).copied().ok_or("undefined-register"),
        }
    }

    fn word(&self, op: &Operand) -> Result<u64, Rule> {
        match self.value(op)? {
            Value::Word(w) => Ok(w),
            _ => Err("kind-mismatch"),
        }
    }

    fn ptr(&self, r: &Reg) -> Result<FatPtr, Rule> {
        match self.regs.get(r) {
            Some(Value::Ptr(p)) => Ok(*p),
            Some(_) => Err("kind-mismatch"),
            None => Err("undefined-register"),
        }
    }

    fn use_mem(&self, r: &Reg) -> Result<(), Rule> {
        match self.regs.get(r) {
            Some(Value::Mem(v)) if *v == self.mem_version => Ok(()),
            Some(Value::Mem(_)) => Err("stale-memory"),
            Some(_) => Err("kind-mismatch"),
            None => Err("undefined-register"),
        }
    }

    fn new_mem(&mut self, r: &Reg) {
        self.mem_version += 1;
        self.def(r, Value::Mem(self.mem_version));
    }

    fn fresh_tag(&mut self) -> u64 {
        let t = self.next_tag;
        self.next_tag += 1;
        t
    }

    fn alloc(&mut self, size: u64) -> Result<u64, Rule> {
        if size == 0 {
            return Err("zero-size");
        }
        let stride = self.program.word_bytes();
        let base = self.next_addr;
        let end = base.checked_add(size).ok_or("address-overflow")?;
        if end - 1 > self.mask {
            return Err("address-overflow");
        }
        self.next_addr = end.div_ceil(stride) * stride;
        Ok(base)
    }

    fn write(&mut self, addr: u64, cell: MemCell) {
        self.stats.mem_writes += 1;
        self.mem.insert(addr, cell);
        self.note(|| format!("M[{addr:#x}] = {cell}"));
    }

    fn read(&mut self, addr: u64) -> Option<MemCell> {
        self.stats.mem_reads += 1;
        self.mem.get(&addr).copied()
    }

    fn note_stack(&mut self, addr: u64) {
        if self.config.record_trace {
            if let Some(base) = self.borrows.base_of(addr) {
                let s = self.borrows.allocations()[&base].stack.to_string();
                self.notes.push(format!("SB[{base:#x}] = {s}"));
            }
        }
    }

    /// Caches follow the automatic discipline only on the cached machine outside level M2.
    fn auto_cache(&self) -> bool {
        self.cached && self.program.level != Level::M2
    }

    /// Sets the cache of every register holding a pointer with this address and tag.
    fn refresh(&mut self, addr: u64, tag: u64, cache: Option<CacheVal>, stale: bool) {
        for v in self.regs.values_mut() {
            if let Value::Ptr(p) = v {
                if p.addr == addr && p.tag == tag {
                    p.cache = cache;
                    p.stale = stale;
                }
            }
        }
    }

    fn exec_phis(&mut self) -> Result<(), Rule> {
        let block = &self.program.blocks[self.block];
        let prev = self.prev_block.map(|b| &self.program.blocks[b].label).ok_or("phi-without-predecessor")?;
        let mut vals = Vec::with_capacity(block.phis.len());
        for phi in &block.phis {
            let (op, _) = phi.incoming.iter().find(|(_, l)| l == prev).ok_or("phi-missing-edge")?;
            vals.push((phi.dst.clone(), self.value(op)?));
        }
        for (r, v) in vals {
            self.def(&r, v);
        }
        self.pc = if block.body.is_empty() { Pc::Term } else { Pc::Body(0) };
        Ok(())
    }

    fn advance(&mut self, by: usize) {
        let Pc::Body(i) = self.pc else { return };
        let n = self.program.blocks[self.block].body.len();
        self.pc = if i + by < n { Pc::Body(i + by) } else { Pc::Term };
    }

    fn exec_term(&mut self) -> Result<(), Rule> {
        let target = match &self.program.blocks[self.block].terminator {
            Terminator::Halt => {
                self.status = Status::Halted;
                return Ok(());
            }
            Terminator::Br(l) => l,
            Terminator::CondBr { cond, then_label, else_label } => {
                if self.word(cond)? != 0 {
                    then_label
                } else {
                    else_label
                }
            }
        };
        let next = self.program.block_index(target).ok_or("undefined-label")?;
        self.prev_block = Some(self.block);
        self.block = next;
        self.pc = entry_pc(self.program, next);
        Ok(())
    }

    fn exec_stmt(&mut self, loc: Loc, i: usize) -> Result<(), Rule> {
        let program = self.program;
        let stmt = &program.blocks[self.block].body[i];
        let paired = matches!(stmt.instr, Instr::MkBor { .. });
        if let Some(g) = &stmt.guard {
            if self.word(&Operand::Reg(g.clone()))? == 0 {
                self.note(|| "skipped".into());
                self.advance(if paired { 2 } else { 1 });
                return Ok(());
            }
        }
        self.advance(if paired { 2 } else { 1 });
        self.exec_instr(loc, i, &stmt.instr)
    }

    fn exec_instr(&mut self, loc: Loc, i: usize, instr: &Instr) -> Result<(), Rule> {
        let width = self.program.width;
        match instr {
            Instr::Copy { dst, src } => {
                let v = self.value(src)?;
                self.def(dst, v);
            }
            Instr::Unary { dst, op, arg } => {
                let v = eval_unop(*op, self.word(arg)?, width);
                self.def(dst, Value::Word(v));
            }
            Instr::Binary { dst, op, lhs, rhs } => {
                let v = eval_binop(*op, self.word(lhs)?, self.word(rhs)?, width);
                self.def(dst, Value::Word(v));
            }
            Instr::Select { dst, cond, then_val, else_val } => {
                let v = if self.word(cond)? != 0 { self.value(then_val)? } else { self.value(else_val)? };
                self.def(dst, v);
            }
            Instr::Nondet { dst, bits } => {
                let site = self.sites.get(&loc).copied().ok_or("unknown-nondet-site")?;
                let slot = if !self.site_used[site] {
                    self.site_used[site] = true;
                    site
                } else {
                    self.overflow += 1;
                    self.site_used.len() + self.overflow - 1
                };
                let v = self.oracle.get(slot) & word_mask(*bits) & self.mask;
                self.def(dst, Value::Word(v));
            }
            Instr::MemInit { dst } => {
                let v = self.mem_version;
                self.def(dst, Value::Mem(v));
            }
            Instr::MkOwn { ptr, mem_out, arg, mem_in } => {
                self.use_mem(mem_in)?;
                let tag;
                let cache;
                let base;
                if self.program.level == Level::M2 {
                    let size = self.word(arg)?;
                    base = self.alloc(size)?;
                    tag = self.fresh_tag();
                    self.borrows.allocate(base, size, tag, PtrKind::O);
                    cache = None;
                } else {
                    let n = self.word(arg)?;
                    base = self.alloc(self.program.word_bytes())?;
                    tag = self.fresh_tag();
                    self.borrows.allocate(base, self.program.word_bytes(), tag, PtrKind::O);
                    self.write(base, MemCell::Word(n));
                    cache = self.cached.then_some(CacheVal::Word(n));
                }
                self.def(ptr, Value::Ptr(FatPtr { addr: base, tag, cache, stale: false }));
                self.new_mem(mem_out);
                self.note_stack(base);
            }
            Instr::Malloc { ptr, mem_out, size, mem_in } => {
                self.use_mem(mem_in)?;
                let size = self.word(size)?;
                let base = self.alloc(size)?;
                let tag = self.fresh_tag();
                self.borrows.allocate(base, size, tag, PtrKind::C);
                self.def(ptr, Value::Ptr(FatPtr { addr: base, tag, cache: None, stale: false }));
                self.new_mem(mem_out);
                self.note_stack(base);
            }
            Instr::MkBor { dst, lender, pair, offset } => {
                let next = self.program.blocks[self.block].body.get(i + 1);
                let Some(Instr::MkSuc { dst: succ_dst, .. }) = next.map(|s| &s.instr) else {
                    return Err("unpaired-borrow");
                };
                let l = self.ptr(lender)?;
                let off = match offset {
                    Some(o) => self.word(o)?,
                    None => 0,
                };
                let addr = l.addr.wrapping_add(off) & self.mask;
                if self.borrows.base_of(addr).is_none() || self.borrows.base_of(addr) != self.borrows.base_of(l.addr) {
                    return Err("out-of-bounds");
                }
                let succ_tag = self.fresh_tag();
                let bor_tag = self.fresh_tag();
                let info = self.borrows.pair(l.addr, l.tag, *pair, succ_tag, bor_tag)?;
                let (cache, stale) = if !self.auto_cache() {
                    (l.cache, l.stale)
                } else {
                    let from_lender = info.was_top
                        && match pair {
                            PairKind::Copy => info.lender_kind != PtrKind::C,
                            _ => true,
                        };
                    if from_lender {
                        (l.cache, l.stale)
                    } else {
                        let cell = self.read(l.addr);
                        (cell.map(MemCell::as_cache), false)
                    }
                };
                self.def(dst, Value::Ptr(FatPtr { addr, tag: bor_tag, cache, stale }));
                self.def(succ_dst, Value::Ptr(FatPtr { addr: l.addr, tag: succ_tag, cache, stale }));
                self.note_stack(l.addr);
            }
            Instr::MkSuc { .. } => return Err("unpaired-borrow"),
            Instr::Die { ptr } => {
                let q = self.ptr(ptr)?;
                let (kind, succ) = self.borrows.die(q.addr, q.tag)?;
                self.note_stack(q.addr);
                if kind == PtrKind::Mb {
                    let transfer = self.cached || self.program.level == Level::M2;
                    self.transfer_to_successor(succ, q, transfer)?;
                }
            }
            Instr::Load { dst, ptr, mem } => {
                self.use_mem(mem)?;
                let p = self.ptr(ptr)?;
                let access = self.borrows.load(p.addr, p.tag)?;
                let cached_ok = self.auto_cache()
                    && self.m1.serve_from_cache
                    && access.was_top
                    && access.kind.is_exclusive()
                    && !p.stale;
                match dst.kind() {
                    RegKind::Ptr => {
                        let (a, t) = match (cached_ok, p.cache) {
                            (true, Some(CacheVal::Ptr { addr, tag })) => {
                                self.stats.cache_hits += 1;
                                (addr, tag)
                            }
                            _ => match self.read(p.addr) {
                                Some(MemCell::Ptr { addr, tag, .. }) => (addr, tag),
                                Some(MemCell::Word(_)) => return Err("mixed-cell-kind"),
                                None => return Err("read-uninit"),
                            },
                        };
                        let (cache, stale) = if !self.auto_cache() {
                            (None, false)
                        } else if access.kind == PtrKind::C {
                            (None, true)
                        } else {
                            (self.read(a).map(MemCell::as_cache), false)
                        };
                        if self.auto_cache() {
                            self.refresh(p.addr, p.tag, Some(CacheVal::Ptr { addr: a, tag: t }), false);
                        }
                        self.def(dst, Value::Ptr(FatPtr { addr: a, tag: t, cache, stale }));
                    }
                    _ => {
                        let v = match (cached_ok, p.cache) {
                            (true, Some(CacheVal::Word(v))) => {
                                self.stats.cache_hits += 1;
                                v
                            }
                            _ => {
                                let v = match self.read(p.addr) {
                                    Some(MemCell::Word(v)) => v,
                                    Some(MemCell::Ptr { .. }) => return Err("mixed-cell-kind"),
                                    None => return Err("read-uninit"),
                                };
                                if self.auto_cache() {
                                    self.refresh(p.addr, p.tag, Some(CacheVal::Word(v)), false);
                                }
                                v
                            }
                        };
                        self.def(dst, Value::Word(v));
                    }
                }
                self.note_stack(p.addr);
            }
            Instr::Store { mem_out, value, ptr, mem_in } => {
                self.use_mem(mem_in)?;
                let p = self.ptr(ptr)?;
                let cell = match self.value(value)? {
                    Value::Word(w) => MemCell::Word(w),
                    Value::Ptr(v) => MemCell::Ptr { addr: v.addr, tag: v.tag, cache: None },
                    Value::Mem(_) => return Err("kind-mismatch"),
                };
                self.borrows.store(p.addr, p.tag)?;
                self.write(p.addr, cell);
                if self.auto_cache() && self.m1.fault != Some(Fault::SkipStoreCacheSync) {
                    self.refresh(p.addr, p.tag, Some(cell.as_cache()), false);
                }
                self.new_mem(mem_out);
                self.note_stack(p.addr);
            }
            Instr::SetCache { dst, src, value } => {
                let p = self.ptr(src)?;
                self.borrows.lookup(p.addr, p.tag).ok_or("cache-op-on-untracked")?;
                let v = self.word(value)?;
                self.def(dst, Value::Ptr(FatPtr { cache: Some(CacheVal::Word(v)), stale: false, ..p }));
            }
            Instr::GetCache { dst, ptr } => {
                let p = self.ptr(ptr)?;
                self.borrows.lookup(p.addr, p.tag).ok_or("cache-op-on-untracked")?;
                let v = match p.cache {
                    Some(CacheVal::Word(v)) => v,
                    Some(CacheVal::Ptr { .. }) => return Err("mixed-cell-kind"),
                    None => return Err("cache-uninit"),
                };
                self.def(dst, Value::Word(v));
            }
            Instr::BeginUnique { dst, src } | Instr::EndUnique { dst, src } => {
                let p = self.ptr(src)?;
                let (from, to) = if matches!(instr, Instr::BeginUnique { .. }) {
                    (PtrKind::C, PtrKind::U)
                } else {
                    (PtrKind::U, PtrKind::C)
                };
                let tag = self.fresh_tag();
                self.borrows.rekind(p.addr, p.tag, from, tag, to)?;
                self.def(dst, Value::Ptr(FatPtr { tag, ..p }));
                self.note_stack(p.addr);
            }
            Instr::MutMkborMem2Reg { dst, mem_out, container, mem_in } => {
                self.use_mem(mem_in)?;
                let c = self.ptr(container)?;
                self.borrows.store(c.addr, c.tag)?;
                let (a, t) = match self.read(c.addr) {
                    Some(MemCell::Ptr { addr, tag, .. }) => (addr, tag),
                    Some(MemCell::Word(_)) => return Err("mixed-cell-kind"),
                    None => return Err("read-uninit"),
                };
                let succ = self.fresh_tag();
                let bor = self.fresh_tag();
                self.borrows.pair(a, t, PairKind::Mut, succ, bor)?;
                let cache = if self.auto_cache() { self.read(a).map(MemCell::as_cache) } else { None };
                let cell = MemCell::Ptr { addr: a, tag: succ, cache: None };
                self.write(c.addr, cell);
                if self.auto_cache() {
                    self.refresh(c.addr, c.tag, Some(cell.as_cache()), false);
                }
                self.def(dst, Value::Ptr(FatPtr { addr: a, tag: bor, cache, stale: false }));
                self.new_mem(mem_out);
                self.note_stack(a);
            }
            Instr::MovReg2Mem { mem_out, ptr, container, mem_in } => {
                self.use_mem(mem_in)?;
                let v = self.ptr(ptr)?;
                let c = self.ptr(container)?;
                self.borrows.store(c.addr, c.tag)?;
                let cell = MemCell::Ptr { addr: v.addr, tag: v.tag, cache: None };
                self.write(c.addr, cell);
                if self.auto_cache() {
                    self.refresh(c.addr, c.tag, Some(cell.as_cache()), false);
                }
                self.regs.remove(ptr);
                self.note(|| format!("R[{ptr}] = -"));
                self.new_mem(mem_out);
            }
            Instr::Assume { cond } => {
                if self.word(cond)? == 0 {
                    self.status = Status::AssumeInfeasible(loc);
                }
            }
            Instr::Assert { cond } => {
                if self.word(cond)? == 0 {
                    self.status = Status::AssertFailed(loc);
                }
            }
        }
        Ok(())
    }

    /// Finds the successor of a dying mutable borrow (registers first, then stored
    /// pointers at level M3) and, when `transfer` is set, hands it the borrow's cache.
    fn transfer_to_successor(&mut self, succ: u64, q: FatPtr, transfer: bool) -> Result<(), Rule> {
        let mut found = false;
        let mut updated = Vec::new();
        for (r, v) in self.regs.iter_mut() {
            if let Value::Ptr(p) = v {
                if p.tag == succ {
                    found = true;
                    if transfer {
                        p.cache = q.cache;
                        p.stale = q.stale;
                        updated.push((r.clone(), *p));
                    }
                }
            }
        }
        updated.sort_by(|a, b| a.0.cmp(&b.0));
        for (r, p) in updated {
            self.note(|| format!("R[{r}] = {p}"));
        }
        if found {
            return Ok(());
        }
        if self.program.level != Level::M3 {
            return Err("die-successor-not-found");
        }
        let cells: Vec<u64> = self
            .mem
            .iter()
            .filter(|(_, c)| matches!(c, MemCell::Ptr { tag, .. } if *tag == succ))
            .map(|(a, _)| *a)
            .collect();
        match cells.as_slice() {
            [] => Err("die-successor-not-found"),
            [a] => {
                if transfer {
                    if let Some(MemCell::Ptr { cache, .. }) = self.mem.get_mut(a) {
                        *cache = match q.cache {
                            Some(CacheVal::Word(w)) => Some(w),
                            _ => None,
                        };
                    }
                }
                Ok(())
            }
            _ => Err("die-successor-ambiguous"),
        }
    }
}
