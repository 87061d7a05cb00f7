//! Textual form of the IR (`.oseair` files).
//!
//! ```text
//! fun main() width(8) level(m2) {
//! BB0:
//!   m00 = mem.init()
//!   p0, m0 = mk_own 42, m00
//!   halt
//! }
//! ```
//!
//! Comments run from `;` to end of line. Binary expressions are allowed inline as the
//! value of `store`, `assume` and `assert` and are lowered to fresh `r_t<N>` temporaries.

mod lexer;
mod parser;
mod printer;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ir::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub offset: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

/// Parses a program. Never panics; malformed input yields a [`ParseError`].
pub fn parse(src: &str) -> Result<Program, ParseError> {
    parser::parse(src)
}

/// Canonical text: one statement per line, two-space indent, default attributes omitted.
pub fn print(program: &Program) -> String {
    printer::print(program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{validate, Instr, Level, RegKind};

    const WALKTHROUGH: &str = "fun main() {
BB0:
  m00 = mem.init()
  p0,m0 = mk_own 42, m00
  q0 = mut_mkbor p0
  p1 = mut_mksuc p0
  r1 = load q0, m0
  m1 = store r1 + 1,q0,m0
  die q0
  r = load p1, m1
  halt
}
";

    #[test]
    fn listing_with_inline_store_expression() {
        let p = parse(WALKTHROUGH).unwrap();
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.instr_count(), 10);
        assert!(validate(&p).is_ok(), "{}", validate(&p).render(&p));
        assert!(matches!(&p.blocks[0].body[5].instr, Instr::Binary { .. }));
        assert_eq!(parse(&print(&p)).unwrap(), p);
    }

    #[test]
    fn empty_input_expects_fun() {
        let e = parse("").unwrap_err();
        assert_eq!(e.expected, vec!["fun".to_string()]);
        assert!(e.to_string().contains("expected fun"));
    }

    #[test]
    fn minimal_program_prints_four_lines() {
        let p = parse("fun main() { BB0: halt }").unwrap();
        assert_eq!(p.blocks.len(), 1);
        assert!(p.blocks[0].body.is_empty());
        assert_eq!(print(&p).lines().count(), 4);
    }

    #[test]
    fn nondet_spellings_and_header() {
        let p = parse(
            "fun f() width(8) level(m2) {\nBB0:\n r1 = nd_char()\n r2 = nd_bool()\n r3 = nd_size_t()\n halt\n}",
        )
        .unwrap();
        assert_eq!(p.width, 8);
        assert_eq!(p.level, Level::M2);
        let bits: Vec<u32> = p.blocks[0]
            .body
            .iter()
            .map(|s| match s.instr {
                Instr::Nondet { bits, .. } => bits,
                _ => 0,
            })
            .collect();
        assert_eq!(bits, vec![8, 1, 8]);
    }

    #[test]
    fn signed_operators_guards_and_phis() {
        let src = "fun main() width(4) {
BB0:
  r0 = nondet 2
  br r0, A, B
A:
  r1 = r0 s< 3
  br J
B:
  r2 = 0x3
  br J
J:
  r3 = phi [r1, A], [r2, B]
  assert r3 if r0
  halt
}
";
        let p = parse(src).unwrap();
        assert!(validate(&p).is_ok(), "{}", validate(&p).render(&p));
        assert_eq!(parse(&print(&p)).unwrap(), p);
        assert_eq!(p.blocks[3].phis[0].dst.kind(), RegKind::Scalar);
    }

    #[test]
    fn error_reports_position() {
        let e = parse("fun main() {\nBB0:\n  r1 = load\n  halt\n}").unwrap_err();
        assert_eq!(e.span.line, 4);
        assert!(e.expected.contains(&"register".to_string()));
    }
}
