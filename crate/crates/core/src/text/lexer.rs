use super::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Op(&'static str),
    /// A byte sequence that is not part of the language.
    Bad(String),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Op(s) => format!("`{s}`"),
            Tok::Bad(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

// Longest first so that `<=` wins over `<`.
const OPS: [&str; 23] = [
    "&&", "||", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "&", "|", "^", ",", "=", "(", ")",
    "{", "}", "[", "]", ":",
];

pub(crate) fn lex(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let span = |i, line, col| SourceSpan { line, column: col, offset: i };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == b';' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = span(i, line, col);
        if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            col += (i - s) as u32;
            out.push(Token { tok: Tok::Ident(src[s..i].to_string()), span: start });
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            col += (i - s) as u32;
            let text = &src[s..i];
            let parsed = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                Some(hex) => u64::from_str_radix(hex, 16).ok(),
                None => text.parse::<u64>().ok(),
            };
            let tok = parsed.map_or_else(|| Tok::Bad(text.to_string()), Tok::Int);
            out.push(Token { tok, span: start });
            continue;
        }
        if let Some(op) = OPS.iter().find(|op| bytes[i..].starts_with(op.as_bytes())) {
            i += op.len();
            col += op.len() as u32;
            out.push(Token { tok: Tok::Op(op), span: start });
            continue;
        }
        // Unknown character: consume one full UTF-8 scalar.
        let ch = src[i..].chars().next().expect("in bounds");
        i += ch.len_utf8();
        col += 1;
        out.push(Token { tok: Tok::Bad(ch.to_string()), span: start });
    }
    out.push(Token { tok: Tok::Eof, span: span(i, line, col) });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_operators_longest_first() {
        let toks: Vec<Tok> = lex("r1 = r2 <= 0x1F ; trailing").into_iter().map(|t| t.tok).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("r1".into()),
                Tok::Op("="),
                Tok::Ident("r2".into()),
                Tok::Op("<="),
                Tok::Int(31),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn spans_track_lines() {
        let toks = lex("a\n  b");
        assert_eq!(toks[1].span.line, 2);
        assert_eq!(toks[1].span.column, 3);
        assert_eq!(toks[1].span.offset, 4);
    }
}
