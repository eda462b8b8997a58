use super::{ParseError, ParseErrorKind, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    /// Digits, optionally with a fractional part (`3`, `2.5`).
    Num(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

// Longest first so that `<=` wins over `<`.
const SYMBOLS: &[&str] = &[
    "->", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", ",", ";", ":", "~", "=", "<",
    ">", "!", "&", "|", "+", "-", "*", "/", "%", ".",
];

pub(crate) fn tokenize(src: &str, file: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let bump = |i: &mut usize, line: &mut u32, col: &mut u32| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            bump(&mut i, &mut line, &mut col);
            bump(&mut i, &mut line, &mut col);
            loop {
                if i + 1 >= chars.len() {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        "unterminated block comment",
                        SourceSpan::new(file, l0, c0, c0 + 2),
                    ));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    bump(&mut i, &mut line, &mut col);
                    bump(&mut i, &mut line, &mut col);
                    break;
                }
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump(&mut i, &mut line, &mut col);
            }
            out.push(Token { len: s.len() as u32, tok: Tok::Ident(s), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                bump(&mut i, &mut line, &mut col);
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                s.push('.');
                bump(&mut i, &mut line, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    bump(&mut i, &mut line, &mut col);
                }
            }
            out.push(Token { len: s.len() as u32, tok: Tok::Num(s), line: l0, col: c0 });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                for _ in 0..sym.len() {
                    bump(&mut i, &mut line, &mut col);
                }
                out.push(Token { tok: Tok::Sym(sym), line: l0, col: c0, len: sym.len() as u32 });
            }
            None => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    format!("unexpected character `{c}`"),
                    SourceSpan::new(file, l0, c0, c0 + 1),
                ))
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col, len: 0 });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s, "t").unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn longest_symbol_wins() {
        assert_eq!(
            toks("a<=b->c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Sym("<="),
                Tok::Ident("b".into()),
                Tok::Sym("->"),
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("// x\n  /* y\n */ foo 2.5", "t").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("foo".into()));
        assert_eq!((t[0].line, t[0].col), (3, 5));
        assert_eq!(t[1].tok, Tok::Num("2.5".into()));
    }

    #[test]
    fn qualified_name_is_three_tokens() {
        assert_eq!(toks("Network.load").len(), 4);
    }

    #[test]
    fn bad_character() {
        let e = tokenize("a @ b", "f").unwrap_err();
        assert_eq!(e.span.col_start, 3);
    }
}
