use std::fmt::{self, Display, Formatter, Write};

use crate::ir::{Instr, Operand, Program, Stmt, Terminator, DEFAULT_WIDTH, Level};

impl Display for Operand {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Const(v) => write!(f, "{v}"),
        }
    }
}

impl Display for Instr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        use Instr::*;
        match self {
            Copy { dst, src } => write!(f, "{dst} = {src}"),
            Unary { dst, op, arg } => write!(f, "{dst} = {} {arg}", op.keyword()),
            Binary { dst, op, lhs, rhs } => write!(f, "{dst} = {lhs} {} {rhs}", op.symbol()),
            Select { dst, cond, then_val, else_val } => {
                write!(f, "{dst} = select {cond}, {then_val}, {else_val}")
            }
            Nondet { dst, bits } => write!(f, "{dst} = nondet {bits}"),
            MemInit { dst } => write!(f, "{dst} = mem.init()"),
            MkOwn { ptr, mem_out, arg, mem_in } => write!(f, "{ptr}, {mem_out} = mk_own {arg}, {mem_in}"),
            Malloc { ptr, mem_out, size, mem_in } => {
                write!(f, "{ptr}, {mem_out} = malloc {size}, {mem_in}")
            }
            MkBor { dst, lender, offset: Some(off), .. } => {
                write!(f, "{dst} = {} {lender}, {off}", self.mnemonic())
            }
            MkBor { dst, lender, .. } | MkSuc { dst, lender, .. } => {
                write!(f, "{dst} = {} {lender}", self.mnemonic())
            }
            Die { ptr } => write!(f, "die {ptr}"),
            Load { dst, ptr, mem } => write!(f, "{dst} = load {ptr}, {mem}"),
            Store { mem_out, value, ptr, mem_in } => write!(f, "{mem_out} = store {value}, {ptr}, {mem_in}"),
            SetCache { dst, src, value } => write!(f, "{dst} = set_cache {src}, {value}"),
            GetCache { dst, ptr } => write!(f, "{dst} = get_cache {ptr}"),
            BeginUnique { dst, src } => write!(f, "{dst} = begin_unique {src}"),
            EndUnique { dst, src } => write!(f, "{dst} = end_unique {src}"),
            MutMkborMem2Reg { dst, mem_out, container, mem_in } => {
                write!(f, "{dst}, {mem_out} = mut_mkbor_mem2reg {container}, {mem_in}")
            }
            MovReg2Mem { mem_out, ptr, container, mem_in } => {
                write!(f, "{mem_out} = mov_reg2mem {ptr}, {container}, {mem_in}")
            }
            Assume { cond } => write!(f, "assume {cond}"),
            Assert { cond } => write!(f, "assert {cond}"),
        }
    }
}

impl Display for Stmt {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.instr)?;
        if let Some(g) = &self.guard {
            write!(f, " if {g}")?;
        }
        Ok(())
    }
}

impl Display for Terminator {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Terminator::Br(l) => write!(f, "br {l}"),
            Terminator::CondBr { cond, then_label, else_label } => {
                write!(f, "br {cond}, {then_label}, {else_label}")
            }
            Terminator::Halt => f.write_str("halt"),
        }
    }
}

pub(crate) fn print(p: &Program) -> String {
    let mut out = String::new();
    let mut header = format!("fun {}()", p.name);
    if p.width != DEFAULT_WIDTH {
        let _ = write!(header, " width({})", p.width);
    }
    if p.level != Level::M1 {
        let _ = write!(header, " level({})", p.level.name());
    }
    let _ = writeln!(out, "{header} {{");
    for b in &p.blocks {
        let _ = writeln!(out, "{}:", b.label);
        for phi in &b.phis {
            let arms: Vec<String> = phi.incoming.iter().map(|(v, l)| format!("[{v}, {l}]")).collect();
            let _ = writeln!(out, "  {} = phi {}", phi.dst, arms.join(", "));
        }
        for s in &b.body {
            let _ = writeln!(out, "  {s}");
        }
        let _ = writeln!(out, "  {}", b.terminator);
    }
    out.push_str("}\n");
    out
}
