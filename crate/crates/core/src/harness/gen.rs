//! Random acyclic programs that respect the ownership discipline by construction.
//!
//! Each allocation is tracked as a stack of frames mirroring its borrow stack; only
//! operations that are legal for the current top frame are emitted. Branches are
//! diamonds whose arms leave every stack unchanged apart from register renaming,
//! which the join block reconciles with phis.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{
    BasicBlock, BinOp, Instr, Label, Level, Operand, PairKind, Phi, Program, Reg, Stmt, Terminator,
    UnOp,
};

/// Relative weights of the operation families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpMix {
    pub scalar: u32,
    pub memory: u32,
    pub borrow: u32,
    pub read_only: u32,
    pub copy: u32,
    pub cache: u32,
    pub branch: u32,
    pub check: u32,
    pub die: u32,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix { scalar: 4, memory: 6, borrow: 4, read_only: 2, copy: 2, cache: 4, branch: 2, check: 3, die: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    /// Upper bound on branch diamonds (each adds three blocks).
    pub max_blocks: usize,
    /// Operations emitted on the main path.
    pub max_instrs: usize,
    /// Maximum number of `nondet` instructions.
    pub nondet_budget: usize,
    pub level: Level,
    pub width: u32,
    pub mix: OpMix,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 0, max_blocks: 7, max_instrs: 14, nondet_budget: 3, level: Level::M1, width: 4, mix: OpMix::default() }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> GenConfig {
        GenConfig { seed, ..GenConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    O,
    Mb,
    Rb,
}

#[derive(Debug, Clone)]
struct Frame {
    reg: Reg,
    kind: Kind,
    /// Known pointer cache (level M2).
    cache: Option<Operand>,
}

#[derive(Debug, Clone)]
struct Chain {
    frames: Vec<Frame>,
    /// Copied pointer pushed above the top frame, if any.
    copy: Option<Reg>,
    /// Value currently stored in the allocation.
    known: Option<Operand>,
}

impl Chain {
    fn top(&self) -> &Frame {
        self.frames.last().expect("chain has an owner frame")
    }
}

struct Gen {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    blocks: Vec<BasicBlock>,
    cur: BasicBlock,
    counter: usize,
    scalars: Vec<Reg>,
    chains: Vec<Chain>,
    mem: Reg,
    nondets: usize,
    asserts: usize,
}

/// Generates one program. Deterministic in the configuration.
pub fn gen_program(cfg: &GenConfig) -> Program {
    let mut g = Gen::new(cfg.clone());
    g.run();
    g.finish()
}

impl Gen {
    fn new(cfg: GenConfig) -> Gen {
        let mut cur = BasicBlock::new("B0");
        let mem = Reg::named("m0");
        cur.body.push(Stmt::new(Instr::MemInit { dst: mem.clone() }));
        Gen {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            blocks: vec![],
            cur,
            counter: 1,
            scalars: vec![],
            chains: vec![],
            mem,
            nondets: 0,
            asserts: 0,
        }
    }

    fn fresh(&mut self, prefix: &str) -> Reg {
        let r = Reg::named(&format!("{prefix}{}", self.counter));
        self.counter += 1;
        r
    }

    fn emit(&mut self, instr: Instr) {
        self.cur.body.push(Stmt::new(instr));
    }

    fn mask(&self) -> u64 {
        crate::ir::word_mask(self.cfg.width)
    }

    fn constant(&mut self) -> Operand {
        let v = self.rng.gen_range(0..=self.mask().min(255));
        Operand::Const(v)
    }

    fn value(&mut self) -> Operand {
        if !self.scalars.is_empty() && self.rng.gen_bool(0.6) {
            Operand::Reg(self.scalars.choose(&mut self.rng).expect("nonempty").clone())
        } else {
            self.constant()
        }
    }

    fn new_mem(&mut self) -> (Reg, Reg) {
        let out = self.fresh("m");
        let old = std::mem::replace(&mut self.mem, out.clone());
        (old, out)
    }

    fn run(&mut self) {
        self.alloc();
        let mut diamonds = 0;
        for _ in 0..self.cfg.max_instrs {
            let mix = self.cfg.mix;
            let m2 = self.cfg.level == Level::M2;
            let weights = [
                mix.scalar,
                mix.memory,
                mix.borrow,
                mix.read_only,
                if m2 { 0 } else { mix.copy },
                if m2 { mix.cache } else { 0 },
                if diamonds < self.cfg.max_blocks / 3 { mix.branch } else { 0 },
                mix.check,
                mix.die,
                1,
            ];
            let total: u32 = weights.iter().sum();
            let mut pick = self.rng.gen_range(0..total);
            let mut choice = 0;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    choice = i;
                    break;
                }
                pick -= w;
            }
            match choice {
                0 => self.scalar_op(),
                1 => self.memory_op(),
                2 => self.borrow_op(PairKind::Mut),
                3 => self.borrow_op(PairKind::Ro),
                4 => self.copy_op(),
                5 => self.cache_op(),
                6 => {
                    diamonds += 1;
                    self.diamond();
                }
                7 => self.check_op(),
                8 => self.die_op(),
                _ if self.chains.len() < 3 => self.alloc(),
                _ => self.die_op(),
            }
        }
        if self.asserts == 0 {
            self.check_op();
            if self.asserts == 0 {
                let r = self.fresh("r");
                self.emit(Instr::Copy { dst: r.clone(), src: Operand::Const(1) });
                self.emit(Instr::Assert { cond: Operand::Reg(r) });
                self.asserts += 1;
            }
        }
    }

    fn finish(mut self) -> Program {
        self.cur.terminator = Terminator::Halt;
        self.blocks.push(self.cur);
        Program {
            name: format!("gen{}", self.cfg.seed),
            width: self.cfg.width,
            level: self.cfg.level,
            blocks: self.blocks,
        }
    }

    fn alloc(&mut self) {
        let p = self.fresh("p");
        let (m_in, m_out) = self.new_mem();
        let mut frame = Frame { reg: p.clone(), kind: Kind::O, cache: None };
        let known;
        if self.cfg.level == Level::M2 {
            let size = self.rng.gen_range(1..=2);
            self.emit(Instr::MkOwn { ptr: p.clone(), mem_out: m_out, arg: Operand::Const(size), mem_in: m_in });
            let v = self.value();
            let (m_in, m_out) = self.new_mem();
            self.emit(Instr::Store { mem_out: m_out, value: v.clone(), ptr: p.clone(), mem_in: m_in });
            let c = self.value();
            let p2 = self.fresh("p");
            self.emit(Instr::SetCache { dst: p2.clone(), src: p, value: c.clone() });
            frame.reg = p2;
            frame.cache = Some(c);
            known = v;
        } else {
            let v = self.value();
            self.emit(Instr::MkOwn { ptr: p, mem_out: m_out, arg: v.clone(), mem_in: m_in });
            known = v;
        }
        self.chains.push(Chain { frames: vec![frame], copy: None, known: Some(known) });
    }

    fn pick_chain(&mut self) -> usize {
        self.rng.gen_range(0..self.chains.len())
    }

    fn nondet(&mut self) -> Option<Reg> {
        if self.nondets >= self.cfg.nondet_budget {
            return None;
        }
        self.nondets += 1;
        let r = self.fresh("r");
        let bits = if self.rng.gen_bool(0.3) { 1 } else { self.cfg.width };
        self.emit(Instr::Nondet { dst: r.clone(), bits });
        self.scalars.push(r.clone());
        Some(r)
    }

    fn scalar_op(&mut self) {
        let r = self.fresh("r");
        match self.rng.gen_range(0..6) {
            0 if self.nondet().is_some() => return,
            1 => {
                let op = *[UnOp::Not, UnOp::BitNot, UnOp::Neg].choose(&mut self.rng).expect("nonempty");
                let arg = self.value();
                self.emit(Instr::Unary { dst: r.clone(), op, arg });
            }
            2 if !self.scalars.is_empty() => {
                let cond = self.value();
                let (a, b) = (self.value(), self.value());
                self.emit(Instr::Select { dst: r.clone(), cond, then_val: a, else_val: b });
            }
            3 if self.scalars.len() >= 2 && self.nondets < self.cfg.nondet_budget => {
                // constrain a value so both outcomes of later checks stay reachable
                let op = *[BinOp::Ult, BinOp::Ne, BinOp::Uge].choose(&mut self.rng).expect("nonempty");
                let lhs = self.value();
                let rhs = self.constant();
                self.emit(Instr::Binary { dst: r.clone(), op, lhs, rhs });
                self.emit(Instr::Assume { cond: Operand::Reg(r.clone()) });
            }
            _ => {
                let op = *BinOp::ALL.choose(&mut self.rng).expect("nonempty");
                let (lhs, rhs) = (self.value(), self.value());
                self.emit(Instr::Binary { dst: r.clone(), op, lhs, rhs });
            }
        }
        self.scalars.push(r);
    }

    /// Pointer through which the chain may currently be read.
    fn readers(c: &Chain) -> Vec<Reg> {
        let mut v = vec![c.top().reg.clone()];
        v.extend(c.copy.clone());
        v
    }

    fn memory_op(&mut self) {
        let ci = self.pick_chain();
        let chain = self.chains[ci].clone();
        let load = self.rng.gen_bool(0.5);
        let through_copy = chain.copy.is_some() && self.rng.gen_bool(0.6);
        let ptr = if through_copy { chain.copy.clone().expect("copy") } else { chain.top().reg.clone() };
        if load || (!through_copy && chain.top().kind == Kind::Rb) {
            let r = self.fresh("r");
            self.emit(Instr::Load { dst: r.clone(), ptr, mem: self.mem.clone() });
            self.scalars.push(r);
            return;
        }
        let v = self.value();
        let (m_in, m_out) = self.new_mem();
        self.emit(Instr::Store { mem_out: m_out, value: v.clone(), ptr, mem_in: m_in });
        let c = &mut self.chains[ci];
        c.known = Some(v);
        if !through_copy {
            // a store through the successor retires the copy above it
            c.copy = None;
        }
    }

    fn borrow_op(&mut self, pair: PairKind) {
        let ci = self.pick_chain();
        let chain = &self.chains[ci];
        if chain.copy.is_some() || chain.top().kind == Kind::Rb {
            return self.die_op();
        }
        let lender = chain.top().reg.clone();
        let cache = chain.top().cache.clone();
        let (bp, sp) = ("q", "p");
        let bor = self.fresh(bp);
        let suc = self.fresh(sp);
        self.emit(Instr::MkBor { dst: bor.clone(), lender: lender.clone(), pair, offset: None });
        self.emit(Instr::MkSuc { dst: suc.clone(), lender, pair });
        let kind = if pair == PairKind::Mut { Kind::Mb } else { Kind::Rb };
        let c = &mut self.chains[ci];
        c.frames.last_mut().expect("top").reg = suc;
        c.frames.push(Frame { reg: bor, kind, cache });
    }

    fn copy_op(&mut self) {
        let ci = self.pick_chain();
        let chain = &self.chains[ci];
        if chain.copy.is_some() || chain.top().kind == Kind::Rb {
            return self.memory_op();
        }
        let lender = chain.top().reg.clone();
        let c1 = self.fresh("q");
        let c2 = self.fresh("p");
        self.emit(Instr::MkBor { dst: c1.clone(), lender: lender.clone(), pair: PairKind::Copy, offset: None });
        self.emit(Instr::MkSuc { dst: c2.clone(), lender, pair: PairKind::Copy });
        let c = &mut self.chains[ci];
        c.frames.last_mut().expect("top").reg = c2;
        c.copy = Some(c1);
    }

    fn die_op(&mut self) {
        let candidates: Vec<usize> = (0..self.chains.len())
            .filter(|&i| self.chains[i].copy.is_none() && self.chains[i].frames.len() > 1)
            .collect();
        let Some(&ci) = candidates.choose(&mut self.rng) else { return };
        let c = &mut self.chains[ci];
        let top = c.frames.pop().expect("borrow frame");
        if top.kind == Kind::Mb {
            c.frames.last_mut().expect("successor").cache = top.cache;
        }
        self.emit(Instr::Die { ptr: top.reg });
        if self.rng.gen_bool(0.6) {
            self.check_chain(ci);
        }
    }

    fn cache_op(&mut self) {
        let ci = self.pick_chain();
        let top = self.chains[ci].top().clone();
        if top.kind == Kind::Rb || self.rng.gen_bool(0.4) {
            let r = self.fresh("r");
            self.emit(Instr::GetCache { dst: r.clone(), ptr: top.reg });
            self.scalars.push(r);
            return;
        }
        let v = self.value();
        let p = self.fresh("p");
        self.emit(Instr::SetCache { dst: p.clone(), src: top.reg, value: v.clone() });
        let f = self.chains[ci].frames.last_mut().expect("top");
        f.reg = p;
        f.cache = Some(v);
    }

    /// Emits an assertion. Most compare a value read back against what was written.
    fn check_op(&mut self) {
        let ci = self.pick_chain();
        self.check_chain(ci);
    }

    fn check_chain(&mut self, ci: usize) {
        let chain = self.chains[ci].clone();
        let m2 = self.cfg.level == Level::M2;
        let (observed, expected) = match self.rng.gen_range(0..4) {
            0 if !self.scalars.is_empty() => {
                let r = self.scalars.choose(&mut self.rng).expect("nonempty").clone();
                (r, self.constant())
            }
            1 if m2 && chain.top().cache.is_some() => {
                let r = self.fresh("r");
                self.emit(Instr::GetCache { dst: r.clone(), ptr: chain.top().reg.clone() });
                (r, chain.top().cache.clone().expect("known cache"))
            }
            _ => {
                let Some(known) = chain.known.clone() else { return };
                let readers = Self::readers(&chain);
                let ptr = readers.choose(&mut self.rng).expect("nonempty").clone();
                let r = self.fresh("r");
                self.emit(Instr::Load { dst: r.clone(), ptr, mem: self.mem.clone() });
                self.scalars.push(r.clone());
                (r, known)
            }
        };
        // occasionally perturb the expectation so that some checks fail
        let expected = if self.rng.gen_bool(0.2) {
            let t = self.fresh("r");
            self.emit(Instr::Binary { dst: t.clone(), op: BinOp::Add, lhs: expected, rhs: Operand::Const(1) });
            Operand::Reg(t)
        } else {
            expected
        };
        let c = self.fresh("r");
        let op = if self.rng.gen_bool(0.85) { BinOp::Eq } else { *[BinOp::Ule, BinOp::Uge].choose(&mut self.rng).expect("nonempty") };
        self.emit(Instr::Binary { dst: c.clone(), op, lhs: Operand::Reg(observed), rhs: expected });
        self.emit(Instr::Assert { cond: Operand::Reg(c) });
        self.asserts += 1;
    }

    /// One arm of a diamond: operations that leave every borrow stack as it was.
    fn arm(&mut self) -> (Option<Operand>, Vec<Option<Operand>>) {
        let mut result = None;
        for _ in 0..self.rng.gen_range(1..=3) {
            match self.rng.gen_range(0..4) {
                0 => {
                    self.scalar_op();
                    result = self.scalars.last().cloned().map(Operand::Reg);
                }
                1 => {
                    let ci = self.pick_chain();
                    let top = self.chains[ci].top().clone();
                    if top.kind == Kind::Rb {
                        continue;
                    }
                    let v = self.value();
                    let (m_in, m_out) = self.new_mem();
                    let through_copy = self.chains[ci].copy.clone();
                    let ptr = through_copy.clone().unwrap_or(top.reg);
                    self.emit(Instr::Store { mem_out: m_out, value: v.clone(), ptr, mem_in: m_in });
                    self.chains[ci].known = Some(v);
                }
                2 if self.cfg.level == Level::M2 => self.cache_op(),
                2 => {
                    let ci = self.pick_chain();
                    let top = self.chains[ci].top().reg.clone();
                    let p = self.fresh("p");
                    self.emit(Instr::Copy { dst: p.clone(), src: Operand::Reg(top) });
                    self.chains[ci].frames.last_mut().expect("top").reg = p;
                }
                _ => {
                    let ci = self.pick_chain();
                    let ptr = Self::readers(&self.chains[ci])[0].clone();
                    let r = self.fresh("r");
                    self.emit(Instr::Load { dst: r.clone(), ptr, mem: self.mem.clone() });
                    self.scalars.push(r.clone());
                    result = Some(Operand::Reg(r));
                }
            }
        }
        let knowns = self.chains.iter().map(|c| c.known.clone()).collect();
        (result, knowns)
    }

    fn diamond(&mut self) {
        let cond = match self.nondet() {
            Some(r) if self.rng.gen_bool(0.5) => r,
            _ if !self.scalars.is_empty() => self.scalars.choose(&mut self.rng).expect("nonempty").clone(),
            _ => return self.scalar_op(),
        };
        let k = self.blocks.len() + 1;
        let (lt, le, lj) = (format!("T{k}"), format!("E{k}"), format!("J{k}"));
        let mut head = std::mem::replace(&mut self.cur, BasicBlock::new(&lt));
        head.terminator = Terminator::CondBr { cond: Operand::Reg(cond), then_label: Label::new(&lt), else_label: Label::new(&le) };
        self.blocks.push(head);

        let saved_scalars = self.scalars.clone();
        let saved_chains = self.chains.clone();
        let saved_mem = self.mem.clone();
        let saved_asserts = self.asserts;

        let (res_t, known_t) = self.arm();
        let chains_t = std::mem::replace(&mut self.chains, saved_chains.clone());
        let mem_t = std::mem::replace(&mut self.mem, saved_mem.clone());
        self.scalars = saved_scalars.clone();
        let mut then_block = std::mem::replace(&mut self.cur, BasicBlock::new(&le));
        then_block.terminator = Terminator::Br(Label::new(&lj));
        self.blocks.push(then_block);

        let (res_e, known_e) = self.arm();
        let chains_e = std::mem::replace(&mut self.chains, saved_chains);
        let mem_e = std::mem::replace(&mut self.mem, saved_mem.clone());
        self.scalars = saved_scalars;
        let mut else_block = std::mem::replace(&mut self.cur, BasicBlock::new(&lj));
        else_block.terminator = Terminator::Br(Label::new(&lj));
        self.blocks.push(else_block);
        self.asserts = saved_asserts;

        let (t, e) = (Label::new(&lt), Label::new(&le));
        let phi = |dst: &Reg, a: Operand, b: Operand| Phi { dst: dst.clone(), incoming: vec![(a, t.clone()), (b, e.clone())] };
        let mut phis = Vec::new();
        if mem_t != saved_mem || mem_e != saved_mem {
            let m = self.fresh("m");
            phis.push(phi(&m, Operand::Reg(mem_t), Operand::Reg(mem_e)));
            self.mem = m;
        }
        let mut chains = chains_t.clone();
        for (i, chain) in chains.iter_mut().enumerate() {
            let (ft, fe) = (chains_t[i].top(), chains_e[i].top());
            if ft.reg != fe.reg {
                let p = self.fresh("p");
                phis.push(phi(&p, Operand::Reg(ft.reg.clone()), Operand::Reg(fe.reg.clone())));
                let f = chain.frames.last_mut().expect("top");
                f.reg = p;
            }
            let cache = match (&ft.cache, &fe.cache) {
                (Some(a), Some(b)) if a == b => Some(a.clone()),
                (Some(a), Some(b)) => {
                    let r = self.fresh("r");
                    phis.push(phi(&r, a.clone(), b.clone()));
                    Some(Operand::Reg(r))
                }
                _ => None,
            };
            chain.frames.last_mut().expect("top").cache = cache;
            chain.known = match (&known_t[i], &known_e[i]) {
                (Some(a), Some(b)) if a == b => Some(a.clone()),
                (Some(a), Some(b)) => {
                    let r = self.fresh("r");
                    phis.push(phi(&r, a.clone(), b.clone()));
                    Some(Operand::Reg(r))
                }
                _ => None,
            };
        }
        self.chains = chains;
        if let (Some(a), Some(b)) = (res_t, res_e) {
            let r = self.fresh("r");
            phis.push(phi(&r, a, b));
            self.scalars.push(r);
        }
        self.cur.phis = phis;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::validate;

    #[test]
    fn same_seed_same_program() {
        let c = GenConfig::with_seed(0);
        assert_eq!(gen_program(&c), gen_program(&c));
        assert_ne!(gen_program(&c), gen_program(&GenConfig::with_seed(1)));
    }

    #[test]
    fn programs_validate() {
        for seed in 0..200 {
            for level in [Level::M1, Level::M2] {
                let p = gen_program(&GenConfig { seed, level, ..GenConfig::default() });
                let report = validate(&p);
                assert!(report.is_ok(), "seed {seed}:\n{}\n{}", report.render(&p), crate::text::print(&p));
            }
        }
    }
}
