use std::fmt::Write;

use super::{Node, SortError, Term, VcScript};

fn bv_literal(out: &mut String, v: u64, w: u32) {
    if w % 4 == 0 {
        let digits = (w / 4) as usize;
        let _ = write!(out, "#x{v:0digits$x}");
    } else {
        let digits = w as usize;
        let _ = write!(out, "#b{v:0digits$b}");
    }
}

fn write_term(out: &mut String, t: &Term) {
    let nary = |out: &mut String, head: &str, args: &[&Term]| {
        out.push('(');
        out.push_str(head);
        for a in args {
            out.push(' ');
            write_term(out, a);
        }
        out.push(')');
    };
    match t.node() {
        Node::Sym(name, _) => out.push_str(name),
        Node::Bv(v, w) => bv_literal(out, *v, *w),
        Node::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Node::Not(a) => nary(out, "not", &[a]),
        Node::And(ts) => nary(out, "and", &ts.iter().collect::<Vec<_>>()),
        Node::Or(ts) => nary(out, "or", &ts.iter().collect::<Vec<_>>()),
        Node::Implies(a, b) => nary(out, "=>", &[a, b]),
        Node::Eq(a, b) => nary(out, "=", &[a, b]),
        Node::Ite(c, a, b) => nary(out, "ite", &[c, a, b]),
        Node::BvBin(op, a, b) => nary(out, op.smt(), &[a, b]),
        Node::BvNot(a) => nary(out, "bvnot", &[a]),
        Node::BvNeg(a) => nary(out, "bvneg", &[a]),
        Node::Cmp(op, a, b) => nary(out, op.smt(), &[a, b]),
        Node::ZeroExt(k, a) => nary(out, &format!("(_ zero_extend {k})"), &[a]),
        Node::Select(a, i) => nary(out, "select", &[a, i]),
        Node::Store(a, i, v) => nary(out, "store", &[a, i, v]),
    }
}

pub(super) fn term_to_string(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t);
    s
}

/// Renders a script as SMT-LIB v2 text. Output depends only on the script.
pub fn to_smtlib(script: &VcScript) -> Result<String, SortError> {
    script.check()?;
    let mut out = String::new();
    let logic = if script.uses_arrays() { "QF_ABV" } else { "QF_BV" };
    let _ = writeln!(out, "(set-logic {logic})");
    out.push_str("(set-option :produce-models true)\n");
    for (name, sort) in &script.decls {
        let _ = writeln!(out, "(declare-fun {name} () {sort})");
    }
    for c in script.conjuncts() {
        if c.as_bool() == Some(true) {
            continue;
        }
        out.push_str("(assert ");
        write_term(&mut out, &c);
        out.push_str(")\n");
    }
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{Sort, Term, VcScript};
    use super::*;

    #[test]
    fn single_definition() {
        let mut s = VcScript::default();
        s.decls.push(("x".into(), Sort::Bv(8)));
        s.defs.push(("x".into(), Term::bv(42, 8)));
        let text = to_smtlib(&s).unwrap();
        assert!(text.starts_with("(set-logic QF_BV)"));
        assert!(text.contains("(declare-fun x () (_ BitVec 8))"));
        assert!(text.contains("(assert (= x #x2a))"));
        assert!(text.ends_with("(check-sat)\n(get-model)\n"));
        assert_eq!(text, to_smtlib(&s.clone()).unwrap());
    }

    #[test]
    fn odd_widths_print_binary() {
        assert_eq!(Term::bv(5, 3).to_string(), "#b101");
        assert_eq!(Term::bv(1, 1).to_string(), "#b1");
    }

    #[test]
    fn undeclared_symbols_are_rejected() {
        let mut s = VcScript::default();
        s.goal = Term::eq(Term::sym("y", Sort::Bv(8)), Term::bv(0, 8));
        assert!(to_smtlib(&s).is_err());
    }
}
