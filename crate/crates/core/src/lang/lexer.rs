use std::fmt;

use super::ast::Pos;
use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Assign,
    Arrow,
    Eq,
    Semi,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Plus,
    Minus,
    Star,
    Slash,
    Kron,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::Assign => f.write_str("`:=`"),
            Tok::Arrow => f.write_str("`=>`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Kron => f.write_str("`⊗`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                bump!();
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ParseError::new(pos, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(value), pos });
            continue;
        }
        let two = |a: char, b: char| c == a && chars.get(i + 1) == Some(&b);
        let (tok, len) = if two(':', '=') {
            (Tok::Assign, 2)
        } else if two('=', '>') {
            (Tok::Arrow, 2)
        } else {
            let tok = match c {
                '=' => Tok::Eq,
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '+' => Tok::Plus,
                '-' | '−' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '⊗' => Tok::Kron,
                other => return Err(ParseError::new(pos, format!("unexpected character `{other}`"))),
            };
            (tok, 1)
        };
        for _ in 0..len {
            bump!();
        }
        out.push(Token { tok, pos });
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_operators() {
        assert_eq!(
            toks("q := R(1e-3) q; # note"),
            vec![
                Tok::Ident("q".into()),
                Tok::Assign,
                Tok::Ident("R".into()),
                Tok::LParen,
                Tok::Num(1e-3),
                Tok::RParen,
                Tok::Ident("q".into()),
                Tok::Semi,
                Tok::Eof
            ]
        );
        assert_eq!(toks("I4 − P11 ⊗ X"), vec![
            Tok::Ident("I4".into()),
            Tok::Minus,
            Tok::Ident("P11".into()),
            Tok::Kron,
            Tok::Ident("X".into()),
            Tok::Eof
        ]);
    }

    #[test]
    fn positions_track_lines() {
        let t = tokenize("skip;\n  // c\n  diverge").unwrap();
        assert_eq!((t[2].pos.line, t[2].pos.col), (3, 3));
    }

    #[test]
    fn bad_character() {
        let e = tokenize("q := $").unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
    }
}
