use crate::ir::{
    BasicBlock, BinOp, Instr, Label, Level, Operand, PairKind, Phi, Program, Reg, Stmt, Terminator, UnOp,
    DEFAULT_WIDTH,
};

use super::lexer::{lex, Tok, Token};
use super::ParseError;

const NONDET_CALLS: [&str; 3] = ["nd_char", "nd_bool", "nd_size_t"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    width: u32,
    /// Temporaries introduced by inline expressions, emitted before the current statement.
    pending: Vec<Instr>,
    names: std::collections::HashSet<String>,
    next_tmp: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError {
            span: t.span,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        })
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            self.error(&[op])
        }
    }

    fn expect_keyword(&mut self, word: &str) -> PResult<()> {
        if self.is_ident(word) {
            self.bump();
            Ok(())
        } else {
            self.error(&[word])
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(&[what]),
        }
    }

    fn int(&mut self) -> PResult<u64> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.error(&["integer"]),
        }
    }

    fn reg(&mut self) -> PResult<Reg> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(r) = Reg::new(s) {
                self.bump();
                return Ok(r);
            }
        }
        self.error(&["register"])
    }

    fn operand(&mut self) -> PResult<Operand> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Operand::Const(v))
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Operand::Const(1))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Operand::Const(0))
            }
            Tok::Ident(s) if Reg::new(&s).is_some() => Ok(Operand::Reg(self.reg()?)),
            _ => self.error(&["register", "integer"]),
        }
    }

    fn label(&mut self) -> PResult<Label> {
        Ok(Label::new(&self.ident("label")?))
    }

    fn program(&mut self) -> PResult<Program> {
        self.expect_keyword("fun")?;
        let name = self.ident("function name")?;
        self.expect_op("(")?;
        self.expect_op(")")?;
        let mut level = Level::M1;
        loop {
            if self.is_ident("width") {
                self.bump();
                self.expect_op("(")?;
                let w = self.int()?;
                if w == 0 || w > 64 {
                    self.pos -= 1;
                    return self.error(&["width between 1 and 64"]);
                }
                self.width = w as u32;
                self.expect_op(")")?;
            } else if self.is_ident("level") {
                self.bump();
                self.expect_op("(")?;
                let name = self.ident("level name")?;
                level = match Level::from_name(&name) {
                    Some(l) => l,
                    None => {
                        self.pos -= 1;
                        return self.error(&["m1", "m2", "m3"]);
                    }
                };
                self.expect_op(")")?;
            } else {
                break;
            }
        }
        self.expect_op("{")?;
        let mut blocks = Vec::new();
        while !self.is_op("}") {
            blocks.push(self.block()?);
        }
        self.expect_op("}")?;
        if *self.peek() != Tok::Eof {
            return self.error(&["end of input"]);
        }
        if blocks.is_empty() {
            return self.error(&["block label"]);
        }
        Ok(Program { name, width: self.width, level, blocks })
    }

    fn block(&mut self) -> PResult<BasicBlock> {
        let label = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Ident(s), Tok::Op(":")) => {
                self.bump();
                self.bump();
                s
            }
            _ => return self.error(&["block label", "}"]),
        };
        let mut block = BasicBlock::new(&label);
        loop {
            match self.peek().clone() {
                Tok::Ident(w) if w == "halt" => {
                    self.bump();
                    block.terminator = Terminator::Halt;
                    return Ok(block);
                }
                Tok::Ident(w) if w == "br" => {
                    self.bump();
                    block.terminator = self.branch()?;
                    return Ok(block);
                }
                Tok::Ident(w) if w == "die" || w == "assume" || w == "assert" => {
                    self.bump();
                    let instr = match w.as_str() {
                        "die" => Instr::Die { ptr: self.reg()? },
                        "assume" => Instr::Assume { cond: self.expr()? },
                        _ => Instr::Assert { cond: self.expr()? },
                    };
                    let guard = self.guard()?;
                    self.push(&mut block, guard, instr);
                }
                Tok::Ident(w) if Reg::new(&w).is_some() => {
                    let mut dsts = vec![self.reg()?];
                    while self.eat_op(",") {
                        dsts.push(self.reg()?);
                    }
                    self.expect_op("=")?;
                    if self.is_ident("phi") {
                        if dsts.len() != 1 || !block.body.is_empty() {
                            return self.error(&["instruction"]);
                        }
                        self.bump();
                        let phi = self.phi(dsts.remove(0))?;
                        block.phis.push(phi);
                        continue;
                    }
                    let instr = self.rhs(dsts)?;
                    let guard = self.guard()?;
                    self.push(&mut block, guard, instr);
                }
                _ => return self.error(&["instruction", "halt", "br"]),
            }
        }
    }

    fn push(&mut self, block: &mut BasicBlock, guard: Option<Reg>, instr: Instr) {
        for tmp in self.pending.drain(..) {
            block.body.push(Stmt { guard: guard.clone(), instr: tmp });
        }
        block.body.push(Stmt { guard, instr });
    }

    /// An operand optionally followed by one binary operator and a second operand, as in
    /// `store r1 + 1, q0, m0`. The binary form is lowered to a fresh scalar temporary.
    fn expr(&mut self) -> PResult<Operand> {
        let lhs = self.operand()?;
        let Some(op) = self.binop() else { return Ok(lhs) };
        let rhs = self.operand()?;
        let dst = loop {
            let name = format!("r_t{}", self.next_tmp);
            self.next_tmp += 1;
            if self.names.insert(name.clone()) {
                break Reg::named(&name);
            }
        };
        self.pending.push(Instr::Binary { dst: dst.clone(), op, lhs, rhs });
        Ok(Operand::Reg(dst))
    }

    fn guard(&mut self) -> PResult<Option<Reg>> {
        if self.is_ident("if") {
            self.bump();
            Ok(Some(self.reg()?))
        } else {
            Ok(None)
        }
    }

    fn branch(&mut self) -> PResult<Terminator> {
        let conditional = matches!(self.peek_at(1), Tok::Op(","));
        if !conditional {
            return Ok(Terminator::Br(self.label()?));
        }
        let cond = self.operand()?;
        self.expect_op(",")?;
        let then_label = self.label()?;
        self.expect_op(",")?;
        let else_label = self.label()?;
        Ok(Terminator::CondBr { cond, then_label, else_label })
    }

    fn phi(&mut self, dst: Reg) -> PResult<Phi> {
        let mut incoming = Vec::new();
        loop {
            self.expect_op("[")?;
            let v = self.operand()?;
            self.expect_op(",")?;
            let l = self.label()?;
            self.expect_op("]")?;
            incoming.push((v, l));
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(Phi { dst, incoming })
    }

    fn empty_call(&mut self) -> PResult<()> {
        self.expect_op("(")?;
        self.expect_op(")")
    }

    fn arity<const N: usize>(&self, dsts: Vec<Reg>) -> PResult<[Reg; N]> {
        match <[Reg; N]>::try_from(dsts) {
            Ok(a) => Ok(a),
            Err(_) => self.error(&[if N == 1 { "single destination" } else { "two destinations" }]),
        }
    }

    fn rhs(&mut self, dsts: Vec<Reg>) -> PResult<Instr> {
        let word = match self.peek().clone() {
            Tok::Ident(w) if Reg::new(&w).is_none() && w != "true" && w != "false" => w,
            _ => {
                let [dst] = self.arity::<1>(dsts)?;
                let lhs = self.operand()?;
                return match self.binop() {
                    Some(op) => {
                        let rhs = self.operand()?;
                        Ok(Instr::Binary { dst, op, lhs, rhs })
                    }
                    None => Ok(Instr::Copy { dst, src: lhs }),
                };
            }
        };
        let pair = |w: &str| -> Option<(PairKind, bool, bool)> {
            // (kind, is first half, has offset)
            Some(match w {
                "mut_mkbor" => (PairKind::Mut, true, false),
                "mut_mkbor_off" => (PairKind::Mut, true, true),
                "mut_mksuc" => (PairKind::Mut, false, false),
                "ro_mkbor" => (PairKind::Ro, true, false),
                "ro_mkbor_off" => (PairKind::Ro, true, true),
                "ro_mksuc" => (PairKind::Ro, false, false),
                "cpy_mkcpy1" => (PairKind::Copy, true, false),
                "cpy_mkcpy1_off" => (PairKind::Copy, true, true),
                "cpy_mkcpy2" => (PairKind::Copy, false, false),
                _ => return None,
            })
        };
        if let Some((kind, first, off)) = pair(&word) {
            self.bump();
            let [dst] = self.arity::<1>(dsts)?;
            let lender = self.reg()?;
            if !first {
                return Ok(Instr::MkSuc { dst, lender, pair: kind });
            }
            let offset = if off {
                self.expect_op(",")?;
                Some(self.operand()?)
            } else {
                None
            };
            return Ok(Instr::MkBor { dst, lender, pair: kind, offset });
        }
        if NONDET_CALLS.contains(&word.as_str()) {
            self.bump();
            self.empty_call()?;
            let [dst] = self.arity::<1>(dsts)?;
            let bits = match word.as_str() {
                "nd_char" => 8,
                "nd_bool" => 1,
                _ => self.width,
            };
            return Ok(Instr::Nondet { dst, bits: bits.min(self.width) });
        }
        self.bump();
        match word.as_str() {
            "not" | "bvnot" | "neg" => {
                let [dst] = self.arity::<1>(dsts)?;
                let op = match word.as_str() {
                    "not" => UnOp::Not,
                    "bvnot" => UnOp::BitNot,
                    _ => UnOp::Neg,
                };
                Ok(Instr::Unary { dst, op, arg: self.operand()? })
            }
            "select" => {
                let [dst] = self.arity::<1>(dsts)?;
                let cond = self.operand()?;
                self.expect_op(",")?;
                let then_val = self.operand()?;
                self.expect_op(",")?;
                let else_val = self.operand()?;
                Ok(Instr::Select { dst, cond, then_val, else_val })
            }
            "nondet" => {
                let [dst] = self.arity::<1>(dsts)?;
                let bits = self.int()?;
                if bits > 64 {
                    self.pos -= 1;
                    return self.error(&["bit count between 1 and 64"]);
                }
                Ok(Instr::Nondet { dst, bits: bits as u32 })
            }
            "mem.init" => {
                self.empty_call()?;
                let [dst] = self.arity::<1>(dsts)?;
                Ok(Instr::MemInit { dst })
            }
            "mk_own" | "malloc" => {
                let [ptr, mem_out] = self.arity::<2>(dsts)?;
                let arg = self.operand()?;
                self.expect_op(",")?;
                let mem_in = self.reg()?;
                Ok(if word == "mk_own" {
                    Instr::MkOwn { ptr, mem_out, arg, mem_in }
                } else {
                    Instr::Malloc { ptr, mem_out, size: arg, mem_in }
                })
            }
            "load" => {
                let [dst] = self.arity::<1>(dsts)?;
                let ptr = self.reg()?;
                self.expect_op(",")?;
                let mem = self.reg()?;
                Ok(Instr::Load { dst, ptr, mem })
            }
            "store" => {
                let [mem_out] = self.arity::<1>(dsts)?;
                let value = self.expr()?;
                self.expect_op(",")?;
                let ptr = self.reg()?;
                self.expect_op(",")?;
                let mem_in = self.reg()?;
                Ok(Instr::Store { mem_out, value, ptr, mem_in })
            }
            "set_cache" => {
                let [dst] = self.arity::<1>(dsts)?;
                let src = self.reg()?;
                self.eat_op(",");
                let value = self.operand()?;
                Ok(Instr::SetCache { dst, src, value })
            }
            "get_cache" => {
                let [dst] = self.arity::<1>(dsts)?;
                Ok(Instr::GetCache { dst, ptr: self.reg()? })
            }
            "begin_unique" | "end_unique" => {
                let [dst] = self.arity::<1>(dsts)?;
                let src = self.reg()?;
                Ok(if word == "begin_unique" {
                    Instr::BeginUnique { dst, src }
                } else {
                    Instr::EndUnique { dst, src }
                })
            }
            "mut_mkbor_mem2reg" => {
                let [dst, mem_out] = self.arity::<2>(dsts)?;
                let container = self.reg()?;
                self.expect_op(",")?;
                let mem_in = self.reg()?;
                Ok(Instr::MutMkborMem2Reg { dst, mem_out, container, mem_in })
            }
            "mov_reg2mem" => {
                let [mem_out] = self.arity::<1>(dsts)?;
                let ptr = self.reg()?;
                self.expect_op(",")?;
                let container = self.reg()?;
                self.expect_op(",")?;
                let mem_in = self.reg()?;
                Ok(Instr::MovReg2Mem { mem_out, ptr, container, mem_in })
            }
            _ => {
                self.pos -= 1;
                self.error(&["instruction"])
            }
        }
    }

    fn binop(&mut self) -> Option<BinOp> {
        let (sym, len) = match (self.peek(), self.peek_at(1)) {
            (Tok::Ident(s), Tok::Op(o)) if s == "s" && matches!(*o, "<" | "<=" | ">" | ">=") => {
                (format!("s{o}"), 2)
            }
            (Tok::Op(o), _) => (o.to_string(), 1),
            _ => return None,
        };
        let op = BinOp::from_symbol(&sym)?;
        for _ in 0..len {
            self.bump();
        }
        Some(op)
    }
}

pub(crate) fn parse(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src);
    let names = toks
        .iter()
        .filter_map(|t| match &t.tok {
            Tok::Ident(s) => Some(s.clone()),
            _ => None,
        })
        .collect();
    let mut p = Parser { toks, pos: 0, width: DEFAULT_WIDTH, pending: vec![], names, next_tmp: 0 };
    p.program()
}
