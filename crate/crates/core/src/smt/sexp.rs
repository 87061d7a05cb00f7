//! Minimal S-expression reader for solver output.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexpError {
    #[error("unbalanced ')' at byte {0}")]
    UnexpectedClose(usize),
    #[error("unterminated list, string or quoted symbol")]
    Unterminated,
}

/// Parses every top-level expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'(' => {
                stack.push(Vec::new());
                i += 1;
            }
            b')' => {
                if stack.len() < 2 {
                    return Err(SexpError::UnexpectedClose(i));
                }
                let done = stack.pop().expect("checked");
                stack.last_mut().expect("checked").push(Sexp::List(done));
                i += 1;
            }
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'"' | b'|' => {
                let start = i;
                i += 1;
                loop {
                    if i >= bytes.len() {
                        return Err(SexpError::Unterminated);
                    }
                    if bytes[i] == c {
                        // "" escapes a quote inside strings
                        if c == b'"' && bytes.get(i + 1) == Some(&b'"') {
                            i += 2;
                            continue;
                        }
                        break;
                    }
                    i += 1;
                }
                i += 1;
                stack.last_mut().expect("nonempty").push(Sexp::Atom(text[start..i].to_string()));
            }
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !b"();\"|".contains(&bytes[i]) {
                    i += 1;
                }
                stack.last_mut().expect("nonempty").push(Sexp::Atom(text[start..i].to_string()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SexpError::Unterminated);
    }
    Ok(stack.pop().expect("one level"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_and_comments() {
        let v = parse_all("(a (b #x2a) \"s)\" |q r|) ; tail\nsat").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].to_string(), "(a (b #x2a) \"s)\" |q r|)");
        assert_eq!(v[1].atom(), Some("sat"));
    }

    #[test]
    fn unbalanced_input() {
        assert_eq!(parse_all("a)"), Err(SexpError::UnexpectedClose(1)));
        assert_eq!(parse_all("(a"), Err(SexpError::Unterminated));
    }
}
