use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{Instr, Loc, Operand, Pos, Program, Reg, RegKind, Terminator};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub loc: Option<Loc>,
    pub rule: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.diagnostics.iter().any(|d| d.rule == rule)
    }

    /// One line per diagnostic, with locations rendered against `program`.
    pub fn render(&self, program: &Program) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            match d.loc {
                Some(loc) => out.push_str(&format!("{}: {}: {}\n", loc.display(program), d.rule, d.message)),
                None => out.push_str(&format!("{}: {}\n", d.rule, d.message)),
            }
        }
        out
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)
    }
}

struct Checker<'a> {
    program: &'a Program,
    report: ValidationReport,
}

impl Checker<'_> {
    fn emit(&mut self, loc: Option<Loc>, rule: &'static str, message: String) {
        self.report.diagnostics.push(Diagnostic { loc, rule, message });
    }

    fn expect_kind(&mut self, loc: Loc, reg: &Reg, kind: RegKind, role: &str) {
        if reg.kind() != kind {
            self.emit(
                Some(loc),
                "kind-mismatch",
                format!("{role} {reg} must be a {} register", kind.name()),
            );
        }
    }

    fn expect_operand(&mut self, loc: Loc, op: &Operand, kind: RegKind, role: &str) {
        match op {
            Operand::Reg(r) => self.expect_kind(loc, r, kind, role),
            Operand::Const(_) if kind != RegKind::Scalar => self.emit(
                Some(loc),
                "kind-mismatch",
                format!("{role} must be a {} register, found a literal", kind.name()),
            ),
            Operand::Const(_) => {}
        }
    }

    fn check_instr(&mut self, loc: Loc, instr: &Instr) {
        use Instr::*;
        use RegKind::*;
        let p = self.program;
        match instr {
            Copy { dst, src } => self.expect_operand(loc, src, dst.kind(), "source"),
            Unary { dst, arg, .. } => {
                self.expect_kind(loc, dst, Scalar, "destination");
                self.expect_operand(loc, arg, Scalar, "operand");
            }
            Binary { dst, lhs, rhs, .. } => {
                self.expect_kind(loc, dst, Scalar, "destination");
                self.expect_operand(loc, lhs, Scalar, "operand");
                self.expect_operand(loc, rhs, Scalar, "operand");
            }
            Select { dst, cond, then_val, else_val } => {
                self.expect_operand(loc, cond, Scalar, "condition");
                self.expect_operand(loc, then_val, dst.kind(), "alternative");
                self.expect_operand(loc, else_val, dst.kind(), "alternative");
            }
            Nondet { dst, bits } => {
                self.expect_kind(loc, dst, Scalar, "destination");
                if *bits == 0 || *bits > p.width {
                    self.emit(
                        Some(loc),
                        "bad-nondet-width",
                        format!("nondet width {bits} outside 1..={}", p.width),
                    );
                }
            }
            MemInit { dst } => self.expect_kind(loc, dst, Mem, "destination"),
            MkOwn { ptr, mem_out, arg, mem_in } | Malloc { ptr, mem_out, size: arg, mem_in } => {
                self.expect_kind(loc, ptr, Ptr, "pointer");
                self.expect_kind(loc, mem_out, Mem, "memory result");
                self.expect_kind(loc, mem_in, Mem, "memory operand");
                self.expect_operand(loc, arg, Scalar, "argument");
            }
            MkBor { dst, lender, offset, .. } => {
                self.expect_kind(loc, dst, Ptr, "destination");
                self.expect_kind(loc, lender, Ptr, "lender");
                if let Some(off) = offset {
                    self.expect_operand(loc, off, Scalar, "offset");
                }
            }
            MkSuc { dst, lender, .. } => {
                self.expect_kind(loc, dst, Ptr, "destination");
                self.expect_kind(loc, lender, Ptr, "lender");
            }
            Die { ptr } => self.expect_kind(loc, ptr, Ptr, "pointer"),
            Load { dst, ptr, mem } => {
                if dst.kind() == Mem {
                    self.emit(Some(loc), "kind-mismatch", format!("cannot load into {dst}"));
                }
                self.expect_kind(loc, ptr, Ptr, "pointer");
                self.expect_kind(loc, mem, Mem, "memory operand");
            }
            Store { mem_out, value, ptr, mem_in } => {
                if value.kind() == Mem {
                    self.emit(Some(loc), "kind-mismatch", "cannot store a memory register".into());
                }
                self.expect_kind(loc, mem_out, Mem, "memory result");
                self.expect_kind(loc, ptr, Ptr, "pointer");
                self.expect_kind(loc, mem_in, Mem, "memory operand");
            }
            SetCache { dst, src, value } => {
                self.expect_kind(loc, dst, Ptr, "destination");
                self.expect_kind(loc, src, Ptr, "pointer");
                self.expect_operand(loc, value, Scalar, "cache value");
            }
            GetCache { dst, ptr } => {
                self.expect_kind(loc, dst, Scalar, "destination");
                self.expect_kind(loc, ptr, Ptr, "pointer");
            }
            BeginUnique { dst, src } | EndUnique { dst, src } => {
                self.expect_kind(loc, dst, Ptr, "destination");
                self.expect_kind(loc, src, Ptr, "pointer");
            }
            MutMkborMem2Reg { dst, mem_out, container, mem_in } => {
                self.expect_kind(loc, dst, Ptr, "destination");
                self.expect_kind(loc, mem_out, Mem, "memory result");
                self.expect_kind(loc, container, Ptr, "container");
                self.expect_kind(loc, mem_in, Mem, "memory operand");
            }
            MovReg2Mem { mem_out, ptr, container, mem_in } => {
                self.expect_kind(loc, mem_out, Mem, "memory result");
                self.expect_kind(loc, ptr, Ptr, "pointer");
                self.expect_kind(loc, container, Ptr, "container");
                self.expect_kind(loc, mem_in, Mem, "memory operand");
            }
            Assume { cond } | Assert { cond } => self.expect_operand(loc, cond, Scalar, "condition"),
        }
        if !instr.level_ok(p.level) {
            self.emit(
                Some(loc),
                "level-mismatch",
                format!("{} is not available at level {}", instr.mnemonic(), p.level.name()),
            );
        }
    }

    fn check_pairing(&mut self, block: usize) {
        let body = &self.program.blocks[block].body;
        for (i, stmt) in body.iter().enumerate() {
            match &stmt.instr {
                Instr::MkBor { lender, pair, .. } => {
                    let ok = body.get(i + 1).is_some_and(|next| {
                        next.guard == stmt.guard
                            && matches!(&next.instr, Instr::MkSuc { lender: l, pair: k, .. } if l == lender && k == pair)
                    });
                    if !ok {
                        self.emit(
                            Some(Loc::body(block, i)),
                            "unpaired-borrow",
                            format!("{} {lender} is not followed by {} {lender}", pair.first_mnemonic(), pair.second_mnemonic()),
                        );
                    }
                }
                Instr::MkSuc { lender, pair, .. } => {
                    let ok = i > 0
                        && body[i - 1].guard == stmt.guard
                        && matches!(&body[i - 1].instr, Instr::MkBor { lender: l, pair: k, .. } if l == lender && k == pair);
                    if !ok {
                        self.emit(
                            Some(Loc::body(block, i)),
                            "unpaired-borrow",
                            format!("{} {lender} is not preceded by {} {lender}", pair.second_mnemonic(), pair.first_mnemonic()),
                        );
                    }
                }
                _ => {}
            }
        }
    }
}

/// Checks structural well-formedness. Diagnostics are returned as data; an empty
/// report means the program satisfies every invariant.
pub fn validate(program: &Program) -> ValidationReport {
    let mut c = Checker { program, report: ValidationReport::default() };
    if program.blocks.is_empty() {
        c.emit(None, "no-blocks", "program has no blocks".into());
        return c.report;
    }
    if program.width == 0 || program.width > 64 {
        c.emit(None, "bad-width", format!("word width {} outside 1..=64", program.width));
    }

    let mut labels = HashSet::new();
    for (b, block) in program.blocks.iter().enumerate() {
        if !labels.insert(block.label.clone()) {
            c.emit(
                Some(Loc { block: b, pos: Pos::Term }),
                "duplicate-label",
                format!("label {} defined twice", block.label),
            );
        }
    }

    // Single assignment and kind checks.
    let mut defined: HashMap<Reg, Loc> = HashMap::new();
    let mut def_once = |c: &mut Checker, reg: &Reg, loc: Loc| {
        if defined.insert(reg.clone(), loc).is_some() {
            c.emit(Some(loc), "ssa-violation", format!("{reg} is assigned more than once"));
        }
    };
    for (b, block) in program.blocks.iter().enumerate() {
        for (i, phi) in block.phis.iter().enumerate() {
            let loc = Loc { block: b, pos: Pos::Phi(i) };
            def_once(&mut c, &phi.dst, loc);
            for (v, _) in &phi.incoming {
                c.expect_operand(loc, v, phi.dst.kind(), "incoming value");
            }
        }
        for (i, stmt) in block.body.iter().enumerate() {
            let loc = Loc::body(b, i);
            for d in stmt.instr.defs() {
                def_once(&mut c, d, loc);
            }
            if let Some(g) = &stmt.guard {
                c.expect_kind(loc, g, RegKind::Scalar, "guard");
            }
            c.check_instr(loc, &stmt.instr);
        }
        c.check_pairing(b);
        let tloc = Loc { block: b, pos: Pos::Term };
        if let Terminator::CondBr { cond, .. } = &block.terminator {
            c.expect_operand(tloc, cond, RegKind::Scalar, "branch condition");
        }
        for target in block.terminator.successors() {
            if program.block_index(target).is_none() {
                c.emit(Some(tloc), "undefined-label", format!("branch to undefined label {target}"));
            }
        }
    }

    // Phi incoming labels must match the predecessor set.
    let preds = program.predecessors();
    for (b, block) in program.blocks.iter().enumerate() {
        if b == 0 && !block.phis.is_empty() {
            c.emit(Some(Loc { block: 0, pos: Pos::Phi(0) }), "phi-mismatch", "entry block cannot have phis".into());
            continue;
        }
        let pred_labels: HashSet<_> = preds[b].iter().map(|&p| program.blocks[p].label.clone()).collect();
        for (i, phi) in block.phis.iter().enumerate() {
            let inc: HashSet<_> = phi.incoming.iter().map(|(_, l)| l.clone()).collect();
            if inc != pred_labels || inc.len() != phi.incoming.len() {
                c.emit(
                    Some(Loc { block: b, pos: Pos::Phi(i) }),
                    "phi-mismatch",
                    format!("phi {} does not list each predecessor exactly once", phi.dst),
                );
            }
        }
    }

    check_def_before_use(&mut c, &preds);
    c.report
}

/// Forward must-be-defined dataflow; unreachable blocks keep the full set and are not flagged.
fn check_def_before_use(c: &mut Checker, preds: &[Vec<usize>]) {
    let program = c.program;
    let n = program.blocks.len();
    let block_defs: Vec<HashSet<Reg>> = program
        .blocks
        .iter()
        .map(|b| {
            let mut s: HashSet<Reg> = b.phis.iter().map(|p| p.dst.clone()).collect();
            for stmt in &b.body {
                s.extend(stmt.instr.defs().into_iter().cloned());
            }
            s
        })
        .collect();
    // None stands for "every register" (not yet reached).
    let mut out: Vec<Option<HashSet<Reg>>> = vec![None; n];
    let in_of = |out: &[Option<HashSet<Reg>>], b: usize| -> Option<HashSet<Reg>> {
        if b == 0 {
            return Some(HashSet::new());
        }
        let mut acc: Option<HashSet<Reg>> = None;
        for &p in &preds[b] {
            if let Some(o) = &out[p] {
                acc = Some(match acc {
                    None => o.clone(),
                    Some(a) => a.intersection(o).cloned().collect(),
                });
            }
        }
        acc
    };
    let mut changed = true;
    while changed {
        changed = false;
        for b in 0..n {
            let new_out = in_of(&out, b).map(|mut s| {
                s.extend(block_defs[b].iter().cloned());
                s
            });
            if new_out != out[b] {
                out[b] = new_out;
                changed = true;
            }
        }
    }

    for b in 0..n {
        let Some(mut avail) = in_of(&out, b) else { continue };
        let block = &program.blocks[b];
        for (i, phi) in block.phis.iter().enumerate() {
            for (v, label) in &phi.incoming {
                let (Some(r), Some(p)) = (v.reg(), program.block_index(label)) else { continue };
                if let Some(po) = &out[p] {
                    if !po.contains(r) {
                        c.emit(
                            Some(Loc { block: b, pos: Pos::Phi(i) }),
                            "use-before-def",
                            format!("{r} is not defined on the edge from {label}"),
                        );
                    }
                }
            }
        }
        avail.extend(block.phis.iter().map(|p| p.dst.clone()));
        for (i, stmt) in block.body.iter().enumerate() {
            for r in stmt.instr.uses().into_iter().chain(stmt.guard.as_ref()) {
                if !avail.contains(r) {
                    c.emit(Some(Loc::body(b, i)), "use-before-def", format!("{r} is used before it is defined"));
                }
            }
            avail.extend(stmt.instr.defs().into_iter().cloned());
        }
        if let Terminator::CondBr { cond: Operand::Reg(r), .. } = &block.terminator {
            if !avail.contains(r) {
                c.emit(
                    Some(Loc { block: b, pos: Pos::Term }),
                    "use-before-def",
                    format!("{r} is used before it is defined"),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{BasicBlock, Instr, Level, PairKind, Program, Stmt};

    fn r(n: &str) -> Reg {
        Reg::named(n)
    }

    fn prog(body: Vec<Instr>) -> Program {
        let mut b = BasicBlock::new("BB0");
        b.body = body.into_iter().map(Stmt::new).collect();
        Program::new(vec![b])
    }

    #[test]
    fn double_assignment_is_ssa_violation() {
        let p = prog(vec![
            Instr::Copy { dst: r("r1"), src: 1.into() },
            Instr::Copy { dst: r("r1"), src: 2.into() },
        ]);
        let rep = validate(&p);
        assert!(rep.has_rule("ssa-violation"), "{rep:?}");
    }

    #[test]
    fn lone_borrow_is_unpaired() {
        let p = prog(vec![
            Instr::MemInit { dst: r("m0") },
            Instr::MkOwn { ptr: r("p0"), mem_out: r("m1"), arg: 1.into(), mem_in: r("m0") },
            Instr::MkBor { dst: r("p1"), lender: r("p0"), pair: PairKind::Mut, offset: None },
            Instr::Die { ptr: r("p1") },
        ]);
        let rep = validate(&p);
        assert!(rep.has_rule("unpaired-borrow"), "{rep:?}");
        assert_eq!(rep.diagnostics.len(), 1);
    }

    #[test]
    fn use_before_def_and_kinds() {
        let p = prog(vec![Instr::Assert { cond: Operand::Reg(r("r9")) }]);
        assert!(validate(&p).has_rule("use-before-def"));
        let p = prog(vec![
            Instr::MemInit { dst: r("m0") },
            Instr::Assert { cond: Operand::Reg(r("m0")) },
        ]);
        assert!(validate(&p).has_rule("kind-mismatch"));
    }

    #[test]
    fn cache_ops_require_level_m2() {
        let mut p = prog(vec![
            Instr::MemInit { dst: r("m0") },
            Instr::MkOwn { ptr: r("p0"), mem_out: r("m1"), arg: 8.into(), mem_in: r("m0") },
            Instr::GetCache { dst: r("r1"), ptr: r("p0") },
        ]);
        assert!(validate(&p).has_rule("level-mismatch"));
        p.level = Level::M2;
        assert!(validate(&p).is_ok());
    }
}
