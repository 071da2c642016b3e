//! Textual form of terms, facts and assignments inside JSON reports.
//!
//! Constants are quoted, labeled nulls start with `_`, pairs are written
//! `<a, b>` and bare identifiers are variables, exactly as the core types
//! display them.

use serde_json::{json, Map, Value};

use viewforge_core::homomorphism::Assignment;
use viewforge_core::model::{Atom, Instance, Term};

use crate::lexer::{lex, Tok, Token};

pub fn term_json(t: &Term) -> Value {
    Value::String(t.to_string())
}

pub fn tuple_json(ts: &[Term]) -> Value {
    Value::Array(ts.iter().map(term_json).collect())
}

pub fn instance_json(i: &Instance) -> Value {
    Value::Array(i.iter().map(|a| Value::String(a.to_string())).collect())
}

pub fn assignment_json(h: &Assignment) -> Value {
    let m: Map<String, Value> = h.iter().map(|(k, v)| (k.to_string(), term_json(v))).collect();
    Value::Object(m)
}

pub fn pairs_json<K: std::fmt::Display>(pairs: &[(K, Term)]) -> Value {
    let m: Map<String, Value> = pairs.iter().map(|(k, v)| (k.to_string(), term_json(v))).collect();
    Value::Object(m)
}

pub fn rows_json(rows: &std::collections::BTreeSet<Vec<Term>>) -> Value {
    json!(rows.iter().map(|r| tuple_json(r)).collect::<Vec<_>>())
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn new(text: &str) -> Result<Cursor, String> {
        let (toks, errs) = lex(text);
        if let Some(e) = errs.first() {
            return Err(format!("`{text}`: {}", e.message));
        }
        Ok(Cursor { toks, pos: 0 })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn sym(&mut self, s: &str) -> Result<(), String> {
        match self.next() {
            Some(Tok::Sym(x)) if x == s => Ok(()),
            other => Err(format!("expected `{s}`, found {other:?}")),
        }
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.toks.get(self.pos), Some(Token { tok: Tok::Sym(x), .. }) if *x == s)
    }

    fn term(&mut self) -> Result<Term, String> {
        match self.next() {
            Some(Tok::Quoted(c)) => Ok(Term::constant(&c)),
            Some(Tok::Ident(s)) => Ok(match s.strip_prefix('_') {
                Some(n) => Term::null(n),
                None => Term::var(&s),
            }),
            Some(Tok::Sym("<")) => {
                let a = self.term()?;
                self.sym(",")?;
                let b = self.term()?;
                self.sym(">")?;
                Ok(Term::pair(a, b))
            }
            other => Err(format!("expected a term, found {other:?}")),
        }
    }

    fn atom(&mut self) -> Result<Atom, String> {
        let rel = match self.next() {
            Some(Tok::Ident(s)) => s,
            other => return Err(format!("expected a relation, found {other:?}")),
        };
        self.sym("(")?;
        let mut args = Vec::new();
        if !self.peek_sym(")") {
            loop {
                args.push(self.term()?);
                if self.peek_sym(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.sym(")")?;
        Ok(Atom::new(&rel, args))
    }

    fn done(&self) -> Result<(), String> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(t) => Err(format!("trailing {}", t.tok)),
        }
    }
}

pub fn parse_term(text: &str) -> Result<Term, String> {
    let mut c = Cursor::new(text)?;
    let t = c.term()?;
    c.done()?;
    Ok(t)
}

pub fn parse_fact(text: &str) -> Result<Atom, String> {
    let mut c = Cursor::new(text)?;
    let a = c.atom()?;
    c.done()?;
    Ok(a)
}

fn strings(v: &Value) -> Result<Vec<&str>, String> {
    v.as_array()
        .ok_or_else(|| format!("expected an array, found {v}"))?
        .iter()
        .map(|x| x.as_str().ok_or_else(|| format!("expected a string, found {x}")))
        .collect()
}

pub fn instance_from(v: &Value) -> Result<Instance, String> {
    strings(v)?.into_iter().map(parse_fact).collect()
}

pub fn tuple_from(v: &Value) -> Result<Vec<Term>, String> {
    strings(v)?.into_iter().map(parse_term).collect()
}

pub fn assignment_from(v: &Value) -> Result<Assignment, String> {
    let m = v.as_object().ok_or_else(|| format!("expected an object, found {v}"))?;
    m.iter()
        .map(|(k, x)| {
            let val = x.as_str().ok_or_else(|| format!("expected a string, found {x}"))?;
            Ok((parse_term(k)?, parse_term(val)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_round_trip() {
        let ts = [
            Term::constant("*"),
            Term::constant("a b"),
            Term::var("x"),
            Term::null("k12"),
            Term::pair(Term::pair(Term::constant("a"), Term::null("n")), Term::constant("c_x")),
        ];
        for t in ts {
            assert_eq!(parse_term(&t.to_string()).unwrap(), t);
        }
    }

    #[test]
    fn instances_round_trip() {
        let i: Instance = [
            Atom::new("T", vec![Term::constant("*"), Term::null("k1")]),
            Atom::new("Z", vec![]),
            Atom::new("P", vec![Term::pair(Term::constant("a"), Term::constant("c_w")), Term::constant("b")]),
        ]
        .into_iter()
        .collect();
        assert_eq!(instance_from(&instance_json(&i)).unwrap(), i);
        assert!(parse_fact("T(\"a\") extra").is_err());
    }
}
