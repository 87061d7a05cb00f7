use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{
    validate, BasicBlock, BinOp, Instr, Label, Loc, Operand, Program, Reg, Stmt, Terminator, UnOp,
    ValidationReport,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FlattenError {
    #[error("cyclic CFG: back edge from {from} to {to}")]
    CyclicCfg { from: Label, to: Label },
    #[error("program does not validate")]
    Invalid(ValidationReport),
}

fn reachable(program: &Program) -> Vec<bool> {
    let mut seen = vec![false; program.blocks.len()];
    let mut stack = vec![0usize];
    while let Some(b) = stack.pop() {
        if b >= seen.len() || seen[b] {
            continue;
        }
        seen[b] = true;
        stack.extend(program.successors_of(b));
    }
    seen
}

fn find_back_edge(program: &Program) -> Option<(usize, usize)> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; program.blocks.len()];
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    state[0] = 1;
    while let Some(&mut (b, ref mut next)) = stack.last_mut() {
        let succs = program.successors_of(b);
        if *next < succs.len() {
            let s = succs[*next];
            *next += 1;
            match state[s] {
                0 => {
                    state[s] = 1;
                    stack.push((s, 0));
                }
                1 => return Some((b, s)),
                _ => {}
            }
        } else {
            state[b] = 2;
            stack.pop();
        }
    }
    None
}

/// Stable topological order of reachable blocks (ties broken by textual position),
/// followed by unreachable blocks in textual order. Falls back to textual order when
/// the CFG has a cycle.
pub(crate) fn block_order(program: &Program) -> Vec<usize> {
    if program.blocks.is_empty() {
        return vec![];
    }
    let reach = reachable(program);
    let mut order = Vec::with_capacity(program.blocks.len());
    if find_back_edge(program).is_none() {
        let preds = program.predecessors();
        let mut indeg: Vec<usize> = (0..program.blocks.len())
            .map(|b| preds[b].iter().filter(|&&p| reach[p]).count())
            .collect();
        let mut ready: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
        ready.insert(0);
        while let Some(b) = ready.pop_first() {
            order.push(b);
            for s in program.successors_of(b) {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
    } else {
        order.extend((0..program.blocks.len()).filter(|&b| reach[b]));
    }
    order.extend((0..program.blocks.len()).filter(|&b| !reach[b]));
    order
}

/// Numbers every static `nondet` site in stable block order. The concrete machines
/// read oracle slot `k` at site `k`, so a program and its flattened form consume the
/// same oracle slots for the same choices.
pub fn nondet_sites(program: &Program) -> HashMap<Loc, usize> {
    let mut sites = HashMap::new();
    for b in block_order(program) {
        for (i, s) in program.blocks[b].body.iter().enumerate() {
            if matches!(s.instr, Instr::Nondet { .. }) {
                let k = sites.len();
                sites.insert(Loc::body(b, i), k);
            }
        }
    }
    sites
}

struct Fresh {
    used: HashSet<String>,
    next: usize,
}

impl Fresh {
    fn scalar(&mut self) -> Reg {
        self.named('r')
    }

    fn named(&mut self, prefix: char) -> Reg {
        loop {
            let name = format!("{prefix}_f{}", self.next);
            self.next += 1;
            if self.used.insert(name.clone()) {
                return Reg::named(&name);
            }
        }
    }
}

/// Converts an acyclic multi-block program into a single block of guarded statements.
///
/// Each block gets a path-condition register; its statements are guarded by it and
/// its phis become `select` chains over the incoming edge conditions. Single-block
/// programs are returned unchanged.
pub fn flatten(program: &Program) -> Result<Program, FlattenError> {
    let report = validate(program);
    if !report.is_ok() {
        return Err(FlattenError::Invalid(report));
    }
    if let Some((from, to)) = find_back_edge(program) {
        return Err(FlattenError::CyclicCfg {
            from: program.blocks[from].label.clone(),
            to: program.blocks[to].label.clone(),
        });
    }
    if program.blocks.len() == 1 {
        return Ok(program.clone());
    }

    let mut fresh = Fresh { used: program.register_names(), next: 0 };
    let reach = reachable(program);
    let preds = program.predecessors();
    let mut out: Vec<Stmt> = Vec::new();
    // Path condition per block; `None` means always taken.
    let mut pc: Vec<Option<Operand>> = vec![None; program.blocks.len()];
    // Condition under which the edge (pred, succ) is taken.
    let mut edge: HashMap<(usize, usize), Option<Operand>> = HashMap::new();

    let and_pc = |fresh: &mut Fresh, out: &mut Vec<Stmt>, pc: &Option<Operand>, c: Operand| -> Operand {
        match pc {
            None => c,
            Some(p) => {
                let r = fresh.scalar();
                out.push(Stmt::new(Instr::Select {
                    dst: r.clone(),
                    cond: p.clone(),
                    then_val: c,
                    else_val: Operand::Const(0),
                }));
                Operand::Reg(r)
            }
        }
    };

    for b in block_order(program) {
        if !reach[b] {
            continue;
        }
        let block = &program.blocks[b];
        if b != 0 {
            let incoming: Vec<Option<Operand>> = preds[b]
                .iter()
                .filter(|&&p| reach[p])
                .map(|&p| edge[&(p, b)].clone())
                .collect();
            pc[b] = if incoming.iter().any(Option::is_none) {
                None
            } else {
                let mut conds = incoming.into_iter().flatten();
                let first = conds.next().expect("reachable block has a predecessor");
                let mut acc = first;
                for c in conds {
                    let r = fresh.scalar();
                    out.push(Stmt::new(Instr::Binary { dst: r.clone(), op: BinOp::LOr, lhs: acc, rhs: c }));
                    acc = Operand::Reg(r);
                }
                Some(acc)
            };
        }
        let guard = match &pc[b] {
            None => None,
            Some(Operand::Reg(r)) => Some(r.clone()),
            Some(c @ Operand::Const(_)) => {
                let r = fresh.scalar();
                out.push(Stmt::new(Instr::Copy { dst: r.clone(), src: c.clone() }));
                Some(r)
            }
        };

        for phi in &block.phis {
            let arms: Vec<(Option<Operand>, Operand)> = phi
                .incoming
                .iter()
                .filter_map(|(v, l)| {
                    let p = program.block_index(l)?;
                    reach[p].then(|| (edge[&(p, b)].clone(), v.clone()))
                })
                .collect();
            let (_, last) = arms.last().cloned().expect("phi has a reachable incoming edge");
            let mut acc = last;
            let n = arms.len();
            for (k, (cond, v)) in arms.into_iter().enumerate().rev().skip(1) {
                let dst = if k == 0 { phi.dst.clone() } else { fresh.named(phi.dst.name().as_bytes()[0] as char) };
                let instr = match cond {
                    None => Instr::Copy { dst: dst.clone(), src: v },
                    Some(c) => Instr::Select { dst: dst.clone(), cond: c, then_val: v, else_val: acc },
                };
                out.push(Stmt::guarded(guard.clone(), instr));
                acc = Operand::Reg(dst);
            }
            if n == 1 {
                out.push(Stmt::guarded(guard.clone(), Instr::Copy { dst: phi.dst.clone(), src: acc }));
            }
        }

        for s in &block.body {
            let g = match (&guard, &s.guard) {
                (None, g) | (g, None) => g.clone(),
                (Some(outer), Some(inner)) => {
                    let r = fresh.scalar();
                    out.push(Stmt::new(Instr::Select {
                        dst: r.clone(),
                        cond: Operand::Reg(outer.clone()),
                        then_val: Operand::Reg(inner.clone()),
                        else_val: Operand::Const(0),
                    }));
                    Some(r)
                }
            };
            out.push(Stmt::guarded(g, s.instr.clone()));
        }

        match &block.terminator {
            Terminator::Halt => {}
            Terminator::Br(l) => {
                let s = program.block_index(l).expect("validated label");
                edge.insert((b, s), pc[b].clone());
            }
            Terminator::CondBr { cond, then_label, else_label } => {
                let t = program.block_index(then_label).expect("validated label");
                let e = program.block_index(else_label).expect("validated label");
                if t == e {
                    edge.insert((b, t), pc[b].clone());
                } else {
                    let taken = and_pc(&mut fresh, &mut out, &pc[b], cond.clone());
                    let neg = fresh.scalar();
                    out.push(Stmt::guarded(guard.clone(), Instr::Unary { dst: neg.clone(), op: UnOp::Not, arg: cond.clone() }));
                    let not_taken = and_pc(&mut fresh, &mut out, &pc[b], Operand::Reg(neg));
                    edge.insert((b, t), Some(taken));
                    edge.insert((b, e), Some(not_taken));
                }
            }
        }
    }

    let mut block = BasicBlock::new(program.blocks[0].label.as_str());
    block.body = out;
    Ok(Program { name: program.name.clone(), width: program.width, level: program.level, blocks: vec![block] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Phi, Stmt};

    fn r(n: &str) -> Reg {
        Reg::named(n)
    }

    fn diamond() -> Program {
        let mut b0 = BasicBlock::new("BB0");
        b0.body = vec![
            Stmt::new(Instr::Nondet { dst: r("r0"), bits: 1 }),
        ];
        b0.terminator = Terminator::CondBr { cond: Operand::Reg(r("r0")), then_label: Label::new("T"), else_label: Label::new("E") };
        let mut t = BasicBlock::new("T");
        t.body = vec![Stmt::new(Instr::Copy { dst: r("r1"), src: 5.into() })];
        t.terminator = Terminator::Br(Label::new("J"));
        let mut e = BasicBlock::new("E");
        e.body = vec![Stmt::new(Instr::Copy { dst: r("r2"), src: 7.into() })];
        e.terminator = Terminator::Br(Label::new("J"));
        let mut j = BasicBlock::new("J");
        j.phis = vec![Phi { dst: r("r3"), incoming: vec![(r("r1").into(), Label::new("T")), (r("r2").into(), Label::new("E"))] }];
        j.body = vec![Stmt::new(Instr::Assert { cond: r("r3").into() })];
        Program::new(vec![b0, t, e, j])
    }

    #[test]
    fn diamond_flattens_to_one_valid_block() {
        let p = diamond();
        assert!(validate(&p).is_ok(), "{:?}", validate(&p));
        let f = flatten(&p).unwrap();
        assert_eq!(f.blocks.len(), 1);
        assert!(validate(&f).is_ok(), "{}", validate(&f).render(&f));
        // the phi became a select on the branch condition
        assert!(f.blocks[0].body.iter().any(|s| matches!(
            &s.instr,
            Instr::Select { dst, cond: Operand::Reg(c), .. } if dst.name() == "r3" && c.name() == "r0"
        )));
        assert_eq!(flatten(&f).unwrap(), f);
    }

    #[test]
    fn back_edge_is_rejected() {
        let mut b0 = BasicBlock::new("BB0");
        b0.terminator = Terminator::Br(Label::new("L"));
        let mut l = BasicBlock::new("L");
        l.body = vec![Stmt::new(Instr::Nondet { dst: r("r0"), bits: 1 })];
        l.terminator = Terminator::CondBr { cond: r("r0").into(), then_label: Label::new("L"), else_label: Label::new("X") };
        let x = BasicBlock::new("X");
        let p = Program::new(vec![b0, l, x]);
        // r0 redefinition on the back edge is fine for validation of SSA text
        assert!(matches!(flatten(&p), Err(FlattenError::CyclicCfg { .. })));
    }

    #[test]
    fn nondet_sites_follow_topological_order() {
        let mut p = diamond();
        // move the join before the arms textually; site numbering must not change
        p.blocks[3].body.insert(0, Stmt::new(Instr::Nondet { dst: r("r9"), bits: 2 }));
        let before = nondet_sites(&p);
        let j = p.blocks.remove(3);
        p.blocks.insert(1, j);
        let after = nondet_sites(&p);
        assert_eq!(before[&Loc::body(3, 0)], after[&Loc::body(1, 0)]);
        assert_eq!(after[&Loc::body(1, 0)], 1);
    }
}
