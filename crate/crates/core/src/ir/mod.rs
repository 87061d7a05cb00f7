//! In-memory model of the ownership IR.
//!
//! A [`Program`] is a single function made of basic blocks in SSA form. Registers
//! carry their kind in their name prefix: `r` for scalars, `p` or `q` for fat pointers and
//! `m` for memory states. Every statement may carry an optional guard register;
//! guards only appear in flattened (pure dataflow) programs and make the statement
//! a no-op when the guard evaluates to zero.

mod flatten;
mod validate;

pub use flatten::{flatten, nondet_sites, FlattenError};
pub use validate::{validate, Diagnostic, ValidationReport};

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// Static kind of a register, implied by its name prefix (`r`, `p` or `q`, `m`; either case).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RegKind {
    Scalar,
    Ptr,
    Mem,
}

impl RegKind {
    pub fn from_prefix(name: &str) -> Option<RegKind> {
        match name.as_bytes().first()?.to_ascii_lowercase() {
            b'r' => Some(RegKind::Scalar),
            b'p' | b'q' => Some(RegKind::Ptr),
            b'm' => Some(RegKind::Mem),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegKind::Scalar => "scalar",
            RegKind::Ptr => "pointer",
            RegKind::Mem => "memory",
        }
    }
}

/// Instruction keywords that would otherwise read as register names.
pub const RESERVED: [&str; 12] = [
    "phi", "mk_own", "malloc", "mut_mkbor", "mut_mkbor_off", "mut_mksuc", "ro_mkbor", "ro_mkbor_off",
    "ro_mksuc", "mut_mkbor_mem2reg", "mov_reg2mem", "mem.init",
];

/// A register name together with its kind.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg {
    kind: RegKind,
    name: Arc<str>,
}

impl Reg {
    /// Builds a register from its textual name; `None` when the prefix is not a register prefix
    /// or the name contains characters outside `[A-Za-z0-9_]`.
    pub fn new(name: &str) -> Option<Reg> {
        let kind = RegKind::from_prefix(name)?;
        if RESERVED.contains(&name) {
            return None;
        }
        if !name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return None;
        }
        Some(Reg { kind, name: name.into() })
    }

    /// Panicking constructor for names known to be well formed.
    pub fn named(name: &str) -> Reg {
        Reg::new(name).unwrap_or_else(|| panic!("malformed register name {name:?}"))
    }

    pub fn kind(&self) -> RegKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Debug for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(name: &str) -> Label {
        Label(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A register or an integer literal. Literals are only meaningful in scalar positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Reg),
    Const(u64),
}

impl Operand {
    pub fn reg(&self) -> Option<&Reg> {
        match self {
            Operand::Reg(r) => Some(r),
            Operand::Const(_) => None,
        }
    }

    /// Kind of the operand; literals are scalars.
    pub fn kind(&self) -> RegKind {
        match self {
            Operand::Reg(r) => r.kind(),
            Operand::Const(_) => RegKind::Scalar,
        }
    }
}

impl From<Reg> for Operand {
    fn from(r: Reg) -> Self {
        Operand::Reg(r)
    }
}

impl From<u64> for Operand {
    fn from(v: u64) -> Self {
        Operand::Const(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    LAnd,
    LOr,
    Eq,
    Ne,
    Ult,
    Ule,
    Ugt,
    Uge,
    Slt,
    Sle,
    Sgt,
    Sge,
}

impl BinOp {
    pub const ALL: [BinOp; 18] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::LAnd,
        BinOp::LOr,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Ult,
        BinOp::Ule,
        BinOp::Ugt,
        BinOp::Uge,
        BinOp::Slt,
        BinOp::Sle,
        BinOp::Sgt,
        BinOp::Sge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::LAnd => "&&",
            BinOp::LOr => "||",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Ult => "<",
            BinOp::Ule => "<=",
            BinOp::Ugt => ">",
            BinOp::Uge => ">=",
            BinOp::Slt => "s<",
            BinOp::Sle => "s<=",
            BinOp::Sgt => "s>",
            BinOp::Sge => "s>=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        BinOp::ALL.iter().copied().find(|op| op.symbol() == s)
    }

    /// True for operators whose result is a 0/1 truth value.
    pub fn is_predicate(self) -> bool {
        !matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::And | BinOp::Or | BinOp::Xor
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    /// Logical negation: 1 when the operand is zero, else 0.
    Not,
    /// Bitwise complement.
    BitNot,
    Neg,
}

impl UnOp {
    pub fn keyword(self) -> &'static str {
        match self {
            UnOp::Not => "not",
            UnOp::BitNot => "bvnot",
            UnOp::Neg => "neg",
        }
    }
}

/// Which aliasing operation a `*_mkbor` / `*_mksuc` pair performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PairKind {
    Mut,
    Ro,
    Copy,
}

impl PairKind {
    pub fn first_mnemonic(self) -> &'static str {
        match self {
            PairKind::Mut => "mut_mkbor",
            PairKind::Ro => "ro_mkbor",
            PairKind::Copy => "cpy_mkcpy1",
        }
    }

    pub fn second_mnemonic(self) -> &'static str {
        match self {
            PairKind::Mut => "mut_mksuc",
            PairKind::Ro => "ro_mksuc",
            PairKind::Copy => "cpy_mkcpy2",
        }
    }
}

/// Feature level of a program. `M1` is the single-word machine with a hard-wired
/// pointer cache, `M2` adds sized allocation with programmer-managed caches, and
/// `M3` is `M1` plus fat pointers stored in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub enum Level {
    #[default]
    M1,
    M2,
    M3,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::M1 => "m1",
            Level::M2 => "m2",
            Level::M3 => "m3",
        }
    }

    pub fn from_name(s: &str) -> Option<Level> {
        match s {
            "m1" => Some(Level::M1),
            "m2" => Some(Level::M2),
            "m3" => Some(Level::M3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instr {
    /// `dst = src`, for any register kind.
    Copy { dst: Reg, src: Operand },
    Unary { dst: Reg, op: UnOp, arg: Operand },
    Binary { dst: Reg, op: BinOp, lhs: Operand, rhs: Operand },
    /// Lazy choice: only the selected operand is read.
    Select { dst: Reg, cond: Operand, then_val: Operand, else_val: Operand },
    /// A fresh unconstrained value of `bits` bits, zero-extended to the word width.
    Nondet { dst: Reg, bits: u32 },
    MemInit { dst: Reg },
    /// `ptr, mem_out = mk_own arg, mem_in`. At M1/M3 `arg` is the initial value;
    /// at M2 it is the allocation size in bytes.
    MkOwn { ptr: Reg, mem_out: Reg, arg: Operand, mem_in: Reg },
    /// Raw (copied) allocation of `size` bytes without initialization.
    Malloc { ptr: Reg, mem_out: Reg, size: Operand, mem_in: Reg },
    /// First half of an aliasing pair (`mut_mkbor`, `ro_mkbor`, `cpy_mkcpy1`, with `_off` variants).
    MkBor { dst: Reg, lender: Reg, pair: PairKind, offset: Option<Operand> },
    /// Second half of an aliasing pair (`mut_mksuc`, `ro_mksuc`, `cpy_mkcpy2`).
    MkSuc { dst: Reg, lender: Reg, pair: PairKind },
    Die { ptr: Reg },
    /// `dst = load ptr, mem`; `dst` is a pointer only at M3.
    Load { dst: Reg, ptr: Reg, mem: Reg },
    /// `mem_out = store value, ptr, mem_in`; `value` is a pointer only at M3.
    Store { mem_out: Reg, value: Operand, ptr: Reg, mem_in: Reg },
    SetCache { dst: Reg, src: Reg, value: Operand },
    GetCache { dst: Reg, ptr: Reg },
    BeginUnique { dst: Reg, src: Reg },
    EndUnique { dst: Reg, src: Reg },
    /// Load a pointer stored behind `container` and mutably borrow it into `dst`;
    /// the successor replaces the stored pointer in `mem_out`.
    MutMkborMem2Reg { dst: Reg, mem_out: Reg, container: Reg, mem_in: Reg },
    /// Move `ptr` into the cell behind `container`; `ptr` is consumed.
    MovReg2Mem { mem_out: Reg, ptr: Reg, container: Reg, mem_in: Reg },
    Assume { cond: Operand },
    Assert { cond: Operand },
}

impl Instr {
    /// Registers defined by this instruction, in textual order.
    pub fn defs(&self) -> Vec<&Reg> {
        use Instr::*;
        match self {
            Copy { dst, .. }
            | Unary { dst, .. }
            | Binary { dst, .. }
            | Select { dst, .. }
            | Nondet { dst, .. }
            | MemInit { dst }
            | MkBor { dst, .. }
            | MkSuc { dst, .. }
            | Load { dst, .. }
            | SetCache { dst, .. }
            | GetCache { dst, .. }
            | BeginUnique { dst, .. }
            | EndUnique { dst, .. } => vec![dst],
            MkOwn { ptr, mem_out, .. } | Malloc { ptr, mem_out, .. } => vec![ptr, mem_out],
            MutMkborMem2Reg { dst, mem_out, .. } => vec![dst, mem_out],
            Store { mem_out, .. } | MovReg2Mem { mem_out, .. } => vec![mem_out],
            Die { .. } | Assume { .. } | Assert { .. } => vec![],
        }
    }

    /// Register operands read by this instruction (literals omitted).
    pub fn uses(&self) -> Vec<&Reg> {
        use Instr::*;
        let ops: Vec<Option<&Reg>> = match self {
            Copy { src, .. } => vec![src.reg()],
            Unary { arg, .. } => vec![arg.reg()],
            Binary { lhs, rhs, .. } => vec![lhs.reg(), rhs.reg()],
            Select { cond, then_val, else_val, .. } => {
                vec![cond.reg(), then_val.reg(), else_val.reg()]
            }
            Nondet { .. } | MemInit { .. } => vec![],
            MkOwn { arg, mem_in, .. } => vec![arg.reg(), Some(mem_in)],
            Malloc { size, mem_in, .. } => vec![size.reg(), Some(mem_in)],
            MkBor { lender, offset, .. } => {
                vec![Some(lender), offset.as_ref().and_then(Operand::reg)]
            }
            MkSuc { lender, .. } => vec![Some(lender)],
            Die { ptr } => vec![Some(ptr)],
            Load { ptr, mem, .. } => vec![Some(ptr), Some(mem)],
            Store { value, ptr, mem_in, .. } => vec![value.reg(), Some(ptr), Some(mem_in)],
            SetCache { src, value, .. } => vec![Some(src), value.reg()],
            GetCache { ptr, .. } => vec![Some(ptr)],
            BeginUnique { src, .. } | EndUnique { src, .. } => vec![Some(src)],
            MutMkborMem2Reg { container, mem_in, .. } => vec![Some(container), Some(mem_in)],
            MovReg2Mem { ptr, container, mem_in, .. } => {
                vec![Some(ptr), Some(container), Some(mem_in)]
            }
            Assume { cond } | Assert { cond } => vec![cond.reg()],
        };
        ops.into_iter().flatten().collect()
    }

    pub fn mnemonic(&self) -> &'static str {
        use Instr::*;
        match self {
            Copy { .. } => "copy",
            Unary { op, .. } => op.keyword(),
            Binary { .. } => "binop",
            Select { .. } => "select",
            Nondet { .. } => "nondet",
            MemInit { .. } => "mem.init",
            MkOwn { .. } => "mk_own",
            Malloc { .. } => "malloc",
            MkBor { pair, offset: None, .. } => pair.first_mnemonic(),
            MkBor { pair: PairKind::Mut, .. } => "mut_mkbor_off",
            MkBor { pair: PairKind::Ro, .. } => "ro_mkbor_off",
            MkBor { pair: PairKind::Copy, .. } => "cpy_mkcpy1_off",
            MkSuc { pair, .. } => pair.second_mnemonic(),
            Die { .. } => "die",
            Load { .. } => "load",
            Store { .. } => "store",
            SetCache { .. } => "set_cache",
            GetCache { .. } => "get_cache",
            BeginUnique { .. } => "begin_unique",
            EndUnique { .. } => "end_unique",
            MutMkborMem2Reg { .. } => "mut_mkbor_mem2reg",
            MovReg2Mem { .. } => "mov_reg2mem",
            Assume { .. } => "assume",
            Assert { .. } => "assert",
        }
    }

    /// Lowest feature level that admits this instruction, and whether higher levels do too.
    pub fn level_ok(&self, level: Level) -> bool {
        use Instr::*;
        match self {
            SetCache { .. } | GetCache { .. } | BeginUnique { .. } | EndUnique { .. } => {
                level == Level::M2
            }
            MkBor { offset: Some(_), .. } => level == Level::M2,
            MutMkborMem2Reg { .. } | MovReg2Mem { .. } => level == Level::M3,
            Load { dst, .. } => dst.kind() == RegKind::Scalar || level == Level::M3,
            Store { value, .. } => value.kind() == RegKind::Scalar || level == Level::M3,
            _ => true,
        }
    }
}

/// A body statement: an instruction with an optional guard register.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub guard: Option<Reg>,
    pub instr: Instr,
}

impl Stmt {
    pub fn new(instr: Instr) -> Stmt {
        Stmt { guard: None, instr }
    }

    pub fn guarded(guard: Option<Reg>, instr: Instr) -> Stmt {
        Stmt { guard, instr }
    }
}

impl From<Instr> for Stmt {
    fn from(instr: Instr) -> Self {
        Stmt::new(instr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Phi {
    pub dst: Reg,
    pub incoming: Vec<(Operand, Label)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Terminator {
    Br(Label),
    CondBr { cond: Operand, then_label: Label, else_label: Label },
    Halt,
}

impl Terminator {
    pub fn successors(&self) -> Vec<&Label> {
        match self {
            Terminator::Br(l) => vec![l],
            Terminator::CondBr { then_label, else_label, .. } => {
                if then_label == else_label {
                    vec![then_label]
                } else {
                    vec![then_label, else_label]
                }
            }
            Terminator::Halt => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasicBlock {
    pub label: Label,
    pub phis: Vec<Phi>,
    pub body: Vec<Stmt>,
    pub terminator: Terminator,
}

impl BasicBlock {
    pub fn new(label: &str) -> BasicBlock {
        BasicBlock { label: Label::new(label), phis: vec![], body: vec![], terminator: Terminator::Halt }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub name: String,
    pub width: u32,
    pub level: Level,
    /// The first block is the entry block.
    pub blocks: Vec<BasicBlock>,
}

pub const DEFAULT_WIDTH: u32 = 64;

impl Program {
    pub fn new(blocks: Vec<BasicBlock>) -> Program {
        Program { name: "main".into(), width: DEFAULT_WIDTH, level: Level::M1, blocks }
    }

    pub fn entry(&self) -> Option<&Label> {
        self.blocks.first().map(|b| &b.label)
    }

    pub fn block_index(&self, label: &Label) -> Option<usize> {
        self.blocks.iter().position(|b| &b.label == label)
    }

    /// Number of body statements plus terminators over all blocks; phis count as statements.
    pub fn instr_count(&self) -> usize {
        self.blocks.iter().map(|b| b.phis.len() + b.body.len() + 1).sum()
    }

    /// Predecessor block indices for each block, deduplicated, in textual order.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            for succ in b.terminator.successors() {
                if let Some(j) = self.block_index(succ) {
                    if !preds[j].contains(&i) {
                        preds[j].push(i);
                    }
                }
            }
        }
        preds
    }

    pub fn successors_of(&self, block: usize) -> Vec<usize> {
        self.blocks[block]
            .terminator
            .successors()
            .into_iter()
            .filter_map(|l| self.block_index(l))
            .collect()
    }

    /// Every register name appearing anywhere in the program.
    pub fn register_names(&self) -> std::collections::HashSet<String> {
        let mut names = std::collections::HashSet::new();
        for b in &self.blocks {
            for phi in &b.phis {
                names.insert(phi.dst.name().to_string());
            }
            for s in &b.body {
                for r in s.instr.defs().into_iter().chain(s.instr.uses()) {
                    names.insert(r.name().to_string());
                }
                if let Some(g) = &s.guard {
                    names.insert(g.name().to_string());
                }
            }
        }
        names
    }

    pub fn word_mask(&self) -> u64 {
        word_mask(self.width)
    }

    /// Bytes per memory word; allocations are strided by this.
    pub fn word_bytes(&self) -> u64 {
        u64::from(self.width.div_ceil(8)).max(1)
    }
}

/// Position of a statement inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Pos {
    Phi(usize),
    Body(usize),
    Term,
}

/// A statement location: block index plus position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Loc {
    pub block: usize,
    pub pos: Pos,
}

impl Loc {
    pub fn body(block: usize, index: usize) -> Loc {
        Loc { block, pos: Pos::Body(index) }
    }

    pub fn display<'a>(&self, program: &'a Program) -> LocDisplay<'a> {
        LocDisplay { loc: *self, program }
    }
}

pub struct LocDisplay<'a> {
    loc: Loc,
    program: &'a Program,
}

impl fmt::Display for LocDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = self
            .program
            .blocks
            .get(self.loc.block)
            .map(|b| b.label.as_str())
            .unwrap_or("?");
        match self.loc.pos {
            Pos::Phi(i) => write!(f, "{label}:phi{i}"),
            Pos::Body(i) => write!(f, "{label}:{i}"),
            Pos::Term => write!(f, "{label}:term"),
        }
    }
}

pub fn word_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn to_signed(v: u64, width: u32) -> i64 {
    if width >= 64 {
        v as i64
    } else {
        let shift = 64 - width;
        ((v << shift) as i64) >> shift
    }
}

/// Concrete evaluation of a binary operator on `width`-bit words.
pub fn eval_binop(op: BinOp, a: u64, b: u64, width: u32) -> u64 {
    let mask = word_mask(width);
    let (a, b) = (a & mask, b & mask);
    let bit = |c: bool| u64::from(c);
    let r = match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::LAnd => bit(a != 0 && b != 0),
        BinOp::LOr => bit(a != 0 || b != 0),
        BinOp::Eq => bit(a == b),
        BinOp::Ne => bit(a != b),
        BinOp::Ult => bit(a < b),
        BinOp::Ule => bit(a <= b),
        BinOp::Ugt => bit(a > b),
        BinOp::Uge => bit(a >= b),
        BinOp::Slt => bit(to_signed(a, width) < to_signed(b, width)),
        BinOp::Sle => bit(to_signed(a, width) <= to_signed(b, width)),
        BinOp::Sgt => bit(to_signed(a, width) > to_signed(b, width)),
        BinOp::Sge => bit(to_signed(a, width) >= to_signed(b, width)),
    };
    r & mask
}

pub fn eval_unop(op: UnOp, a: u64, width: u32) -> u64 {
    let mask = word_mask(width);
    let r = match op {
        UnOp::Not => u64::from(a & mask == 0),
        UnOp::BitNot => !a,
        UnOp::Neg => a.wrapping_neg(),
    };
    r & mask
}
