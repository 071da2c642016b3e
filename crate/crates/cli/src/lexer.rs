//! Tokens of the workspace language and of the fact notation used inside
//! reports.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Quoted(String),
    Number(String),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "\"{s}\""),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// First token on its line.
    pub line_start: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub hint: Option<String>,
}

const SYMBOLS: [&str; 15] = [":=", "->", "!=", "{", "}", "(", ")", ",", "/", ".", "|", "=", "@", "<", ">"];

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Split `text` into tokens. Bad characters are reported and skipped.
pub fn lex(text: &str) -> (Vec<Token>, Vec<LexError>) {
    let mut toks = Vec::new();
    let mut errs = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        let mut first = true;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            let mut push = |tok: Tok| {
                toks.push(Token {
                    tok,
                    line: ln + 1,
                    col,
                    line_start: first,
                });
                first = false;
            };
            if c == '"' {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' {
                    j += 1;
                }
                if j == chars.len() {
                    errs.push(LexError {
                        line: ln + 1,
                        col,
                        message: "unterminated string".into(),
                        hint: Some("close the constant with `\"` on the same line".into()),
                    });
                    break;
                }
                let s: String = chars[start..j].iter().collect();
                if s.is_empty() {
                    errs.push(LexError {
                        line: ln + 1,
                        col,
                        message: "empty constant".into(),
                        hint: None,
                    });
                }
                push(Tok::Quoted(s));
                i = j + 1;
                continue;
            }
            if ident_char(c) {
                let mut j = i;
                while j < chars.len() && ident_char(chars[j]) {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                if c.is_ascii_digit() {
                    push(Tok::Number(s));
                } else {
                    push(Tok::Ident(s));
                }
                i = j;
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                push(Tok::Sym(sym));
                i += sym.len();
                continue;
            }
            errs.push(LexError {
                line: ln + 1,
                col,
                message: format!("unexpected character `{c}`"),
                hint: if c == ':' { Some("definitions use `:=`".into()) } else { None },
            });
            i += 1;
        }
    }
    (toks, errs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let (t, e) = lex("query Q := R(x, \"a\") # note\n  -> x != 12");
        assert!(e.is_empty());
        let kinds: Vec<&Tok> = t.iter().map(|t| &t.tok).collect();
        assert_eq!(kinds[0], &Tok::Ident("query".into()));
        assert_eq!(kinds[2], &Tok::Sym(":="));
        assert_eq!(kinds[7], &Tok::Quoted("a".into()));
        let arrow = &t[9];
        assert_eq!((arrow.line, arrow.col, arrow.line_start), (2, 3, true));
        assert_eq!(t.last().unwrap().tok, Tok::Number("12".into()));
    }

    #[test]
    fn errors_are_collected() {
        let (_, e) = lex("a ; b : c\n\"open");
        assert_eq!(e.len(), 3);
        assert_eq!(e[1].hint.as_deref(), Some("definitions use `:=`"));
        assert_eq!((e[2].line, e[2].col), (2, 1));
    }
}
