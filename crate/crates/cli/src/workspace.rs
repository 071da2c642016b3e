//! Workspace files: schema, queries, secrets, rules, views, d-views and
//! instances in one line-oriented text format.
//!
//! ```text
//! source hospital { Trtmnt/3 }
//! replicate T/2 across P, S
//! query Q(tinfo) := Trtmnt(pid, tinfo, tdate)
//! rule r := A(x) -> exists y . B(x, y)
//! view V(x, y) @ s := E(x, y) | E(y, x) where x != y
//! dview d { V }
//! instance I { E(a, b). }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use viewforge_core::model::{
    name, Atom, ConjunctiveQuery, DInstance, DSchema, DView, Dcq, ExistentialRule, GuardLit, Instance, ModelError,
    Name, Placement, Term, View, ViewDef,
};

use crate::lexer::{lex, Tok, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub hint: Option<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: error: {}", self.line, self.col, self.message)?;
        if let Some(h) = &self.hint {
            write!(f, "\n  hint: {h}")?;
        }
        Ok(())
    }
}

/// A parsed and validated workspace. Every list keeps declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Workspace {
    pub schema: DSchema,
    pub queries: Vec<ConjunctiveQuery>,
    pub secrets: Vec<ConjunctiveQuery>,
    pub rules: Vec<ExistentialRule>,
    pub views: Vec<View>,
    pub dviews: Vec<(Name, Vec<Name>)>,
    pub instances: Vec<(Name, Instance)>,
}

impl Workspace {
    pub fn query(&self, n: &str) -> Option<&ConjunctiveQuery> {
        self.queries.iter().find(|q| &*q.name == n)
    }

    pub fn secret(&self, n: &str) -> Option<&ConjunctiveQuery> {
        self.secrets.iter().find(|q| &*q.name == n)
    }

    pub fn view(&self, n: &str) -> Option<&View> {
        self.views.iter().find(|v| &*v.name == n)
    }

    pub fn dview(&self, n: &str) -> Option<DView> {
        let (_, members) = self.dviews.iter().find(|(d, _)| &**d == n)?;
        let views = members.iter().filter_map(|m| self.view(m).cloned()).collect();
        Some(DView::new(n, views))
    }

    pub fn instance(&self, n: &str) -> Option<&Instance> {
        self.instances.iter().find(|(i, _)| &**i == n).map(|(_, i)| i)
    }

    pub fn dinstance(&self, n: &str) -> Option<DInstance> {
        self.instance(n).map(|i| DInstance::distribute(&self.schema, i))
    }
}

/// Parse and validate a workspace, collecting every diagnostic.
pub fn parse_workspace(text: &str) -> Result<Workspace, Vec<Diagnostic>> {
    let (toks, lex_errs) = lex(text);
    let mut p = Parser {
        toks,
        pos: 0,
        diags: lex_errs
            .into_iter()
            .map(|e| Diagnostic {
                line: e.line,
                col: e.col,
                message: e.message,
                hint: e.hint,
            })
            .collect(),
    };
    let stmts = p.statements();
    let mut diags = p.diags;
    let ws = build(stmts, &mut diags);
    if diags.is_empty() {
        Ok(ws)
    } else {
        diags.sort_by_key(|d| (d.line, d.col));
        Err(diags)
    }
}

const KEYWORDS: [&str; 8] = ["source", "replicate", "query", "secret", "rule", "view", "dview", "instance"];

#[derive(Debug, Clone)]
struct Sp {
    text: String,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum RawTerm {
    Ident(Sp),
    Const(String),
}

#[derive(Debug, Clone)]
struct RawAtom {
    rel: Sp,
    args: Vec<RawTerm>,
}

#[derive(Debug, Clone)]
enum RawHead {
    Atoms(Vec<RawAtom>),
    Eq(RawTerm, RawTerm),
}

#[derive(Debug, Clone)]
enum Stmt {
    Source {
        id: Sp,
        rels: Vec<(Sp, usize)>,
    },
    Replicate {
        rel: Sp,
        arity: usize,
        across: Vec<Sp>,
    },
    Query {
        secret: bool,
        id: Sp,
        head: Option<Vec<Sp>>,
        body: Vec<RawAtom>,
    },
    Rule {
        id: Sp,
        body: Vec<RawAtom>,
        exists: Option<Vec<Sp>>,
        head: RawHead,
    },
    View {
        id: Sp,
        head: Vec<Sp>,
        source: Sp,
        bodies: Vec<Vec<RawAtom>>,
        guard: Vec<(Sp, bool, Sp)>,
    },
    DView {
        id: Sp,
        members: Vec<Sp>,
    },
    Instance {
        id: Sp,
        facts: Vec<RawAtom>,
    },
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Result<T, ()>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn at_statement_start(&self) -> bool {
        self.peek()
            .is_some_and(|t| t.line_start && matches!(&t.tok, Tok::Ident(s) if KEYWORDS.contains(&s.as_str())))
    }

    fn error_here(&mut self, message: String, hint: Option<&str>) {
        let (line, col) = match self.peek() {
            Some(t) => (t.line, t.col),
            None => self.toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1)),
        };
        self.diags.push(Diagnostic {
            line,
            col,
            message,
            hint: hint.map(str::to_string),
        });
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => t.tok.to_string(),
            None => "end of file".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(x), .. }) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(x), .. }) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str, hint: Option<&str>) -> PResult<()> {
        if self.eat_sym(s) {
            return Ok(());
        }
        let msg = format!("expected `{s}`, found {}", self.found());
        self.error_here(msg, hint);
        Err(())
    }

    fn ident(&mut self, what: &str) -> PResult<Sp> {
        if let Some(Token {
            tok: Tok::Ident(s),
            line,
            col,
            ..
        }) = self.peek().cloned()
        {
            self.pos += 1;
            return Ok(Sp { text: s, line, col });
        }
        let msg = format!("expected {what}, found {}", self.found());
        self.error_here(msg, None);
        Err(())
    }

    fn number(&mut self, what: &str) -> PResult<usize> {
        if let Some(Tok::Number(s)) = self.peek().map(|t| t.tok.clone()) {
            if let Ok(n) = s.parse() {
                self.pos += 1;
                return Ok(n);
            }
        }
        let msg = format!("expected {what}, found {}", self.found());
        self.error_here(msg, None);
        Err(())
    }

    fn skip_to_statement(&mut self) {
        self.pos += 1;
        while self.peek().is_some() && !self.at_statement_start() {
            self.pos += 1;
        }
    }

    fn statements(&mut self) -> Vec<Stmt> {
        let mut out = Vec::new();
        while let Some(t) = self.peek().cloned() {
            let kw = match &t.tok {
                Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => s.clone(),
                _ => {
                    let msg = format!("expected a statement, found {}", t.tok);
                    self.error_here(msg, Some("statements start with one of: source, replicate, query, secret, rule, view, dview, instance"));
                    self.skip_to_statement();
                    continue;
                }
            };
            self.pos += 1;
            let parsed = match kw.as_str() {
                "source" => self.source(),
                "replicate" => self.replicate(),
                "query" => self.query(false),
                "secret" => self.query(true),
                "rule" => self.rule(),
                "view" => self.view(),
                "dview" => self.dview(),
                _ => self.instance(),
            };
            match parsed {
                Ok(s) => {
                    if self.peek().is_some() && !self.at_statement_start() {
                        let msg = format!("unexpected {} after the {kw} statement", self.found());
                        self.error_here(msg, Some("each statement starts on its own line"));
                        self.skip_to_statement();
                    }
                    out.push(s);
                }
                Err(()) => {
                    if !self.at_statement_start() {
                        self.skip_to_statement();
                    }
                }
            }
        }
        out
    }

    fn rel_arity(&mut self) -> PResult<(Sp, usize)> {
        let rel = self.ident("a relation name")?;
        self.expect_sym("/", Some("declare relations as Name/arity"))?;
        let n = self.number("an arity")?;
        Ok((rel, n))
    }

    fn source(&mut self) -> PResult<Stmt> {
        let id = self.ident("a source name")?;
        self.expect_sym("{", None)?;
        let mut rels = Vec::new();
        if !self.is_sym("}") {
            loop {
                rels.push(self.rel_arity()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("}", Some("separate relations with `,`"))?;
        Ok(Stmt::Source { id, rels })
    }

    fn replicate(&mut self) -> PResult<Stmt> {
        let (rel, arity) = self.rel_arity()?;
        if !self.is_word("across") {
            let msg = format!("expected `across`, found {}", self.found());
            self.error_here(msg, Some("write `replicate R/2 across s1, s2`"));
            return Err(());
        }
        self.pos += 1;
        let across = self.name_list("a source name")?;
        Ok(Stmt::Replicate { rel, arity, across })
    }

    fn name_list(&mut self, what: &str) -> PResult<Vec<Sp>> {
        let mut out = vec![self.ident(what)?];
        while self.eat_sym(",") {
            out.push(self.ident(what)?);
        }
        Ok(out)
    }

    fn opt_head(&mut self) -> PResult<Option<Vec<Sp>>> {
        if !self.eat_sym("(") {
            return Ok(None);
        }
        let mut vars = Vec::new();
        if !self.is_sym(")") {
            vars = self.name_list("a variable")?;
        }
        self.expect_sym(")", None)?;
        Ok(Some(vars))
    }

    fn term(&mut self, constants: bool) -> PResult<RawTerm> {
        match self.peek().cloned() {
            Some(Token {
                tok: Tok::Ident(s),
                line,
                col,
                ..
            }) => {
                self.pos += 1;
                Ok(if constants {
                    RawTerm::Const(s)
                } else {
                    RawTerm::Ident(Sp { text: s, line, col })
                })
            }
            Some(Token {
                tok: Tok::Quoted(s) | Tok::Number(s),
                ..
            }) => {
                self.pos += 1;
                Ok(RawTerm::Const(s))
            }
            _ => {
                let msg = format!("expected a term, found {}", self.found());
                self.error_here(msg, None);
                Err(())
            }
        }
    }

    fn atom(&mut self, constants: bool) -> PResult<RawAtom> {
        let rel = self.ident("a relation name")?;
        self.expect_sym("(", Some("atoms are written Rel(t1, ..., tn)"))?;
        let mut args = Vec::new();
        if !self.is_sym(")") {
            loop {
                args.push(self.term(constants)?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")", None)?;
        Ok(RawAtom { rel, args })
    }

    fn body(&mut self) -> PResult<Vec<RawAtom>> {
        let mut out = vec![self.atom(false)?];
        while self.eat_sym(",") {
            out.push(self.atom(false)?);
        }
        Ok(out)
    }

    fn query(&mut self, secret: bool) -> PResult<Stmt> {
        let id = self.ident("a query name")?;
        let head = self.opt_head()?;
        self.expect_sym(":=", None)?;
        let body = self.body()?;
        Ok(Stmt::Query { secret, id, head, body })
    }

    fn rule(&mut self) -> PResult<Stmt> {
        let id = self.ident("a rule name")?;
        self.expect_sym(":=", None)?;
        let body = self.body()?;
        self.expect_sym("->", Some("rules are written body -> head"))?;
        let mut exists = None;
        if self.is_word("exists") {
            self.pos += 1;
            exists = Some(self.name_list("a variable")?);
            self.expect_sym(".", Some("close the exists clause with `.`"))?;
        }
        // An equality head is `t = t`; look ahead past the first term.
        let eq_head = matches!(self.toks.get(self.pos + 1), Some(Token { tok: Tok::Sym("="), .. }));
        let head = if eq_head {
            let l = self.term(false)?;
            self.expect_sym("=", None)?;
            let r = self.term(false)?;
            RawHead::Eq(l, r)
        } else {
            RawHead::Atoms(self.body()?)
        };
        Ok(Stmt::Rule { id, body, exists, head })
    }

    fn view(&mut self) -> PResult<Stmt> {
        let id = self.ident("a view name")?;
        let head = self.opt_head()?.unwrap_or_default();
        self.expect_sym("@", Some("views name their source: view V(x) @ s := ..."))?;
        let source = self.ident("a source name")?;
        self.expect_sym(":=", None)?;
        let mut bodies = vec![self.body()?];
        while self.eat_sym("|") {
            bodies.push(self.body()?);
        }
        let mut guard = Vec::new();
        if self.is_word("where") {
            self.pos += 1;
            loop {
                let a = self.ident("a view variable")?;
                let eq = if self.eat_sym("=") {
                    true
                } else if self.eat_sym("!=") {
                    false
                } else {
                    let msg = format!("expected `=` or `!=`, found {}", self.found());
                    self.error_here(msg, None);
                    return Err(());
                };
                let b = self.ident("a view variable")?;
                guard.push((a, eq, b));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        Ok(Stmt::View {
            id,
            head,
            source,
            bodies,
            guard,
        })
    }

    fn dview(&mut self) -> PResult<Stmt> {
        let id = self.ident("a d-view name")?;
        self.expect_sym("{", None)?;
        let mut members = Vec::new();
        if !self.is_sym("}") {
            members = self.name_list("a view name")?;
        }
        self.expect_sym("}", Some("separate views with `,`"))?;
        Ok(Stmt::DView { id, members })
    }

    fn instance(&mut self) -> PResult<Stmt> {
        let id = self.ident("an instance name")?;
        self.expect_sym("{", None)?;
        let mut facts = Vec::new();
        while !self.is_sym("}") {
            if self.peek().is_none() {
                self.error_here("unterminated instance".into(), Some("close the instance with `}`"));
                return Err(());
            }
            facts.push(self.atom(true)?);
            if !self.eat_sym(".") && !self.is_sym("}") {
                let msg = format!("expected `.` after a fact, found {}", self.found());
                self.error_here(msg, Some("terminate each fact with `.`"));
                return Err(());
            }
        }
        self.pos += 1;
        Ok(Stmt::Instance { id, facts })
    }
}

struct Checker<'a> {
    diags: &'a mut Vec<Diagnostic>,
    schema: DSchema,
}

impl Checker<'_> {
    fn err(&mut self, at: &Sp, message: String, hint: Option<String>) {
        self.diags.push(Diagnostic {
            line: at.line,
            col: at.col,
            message,
            hint,
        });
    }

    fn term(t: &RawTerm) -> Term {
        match t {
            RawTerm::Ident(s) => Term::var(&s.text),
            RawTerm::Const(c) => Term::constant(c),
        }
    }

    fn const_term(t: &RawTerm) -> Term {
        match t {
            RawTerm::Ident(s) => Term::constant(&s.text),
            RawTerm::Const(c) => Term::constant(c),
        }
    }

    /// Resolve atoms against the schema; `visible` restricts relations to
    /// one source.
    fn atoms(&mut self, raw: &[RawAtom], visible: Option<&str>, facts: bool) -> Option<Vec<Atom>> {
        let mut ok = true;
        let mut out = Vec::new();
        for a in raw {
            let args: Vec<Term> = a
                .args
                .iter()
                .map(|t| if facts { Self::const_term(t) } else { Self::term(t) })
                .collect();
            match self.schema.relation(&a.rel.text).cloned() {
                None => {
                    let known: Vec<String> = self.schema.relations().map(|r| r.name.to_string()).collect();
                    let hint = if known.is_empty() {
                        "declare it in a `source` or `replicate` statement".to_string()
                    } else {
                        format!("known relations: {}", known.join(", "))
                    };
                    self.err(&a.rel, format!("unknown relation `{}`", a.rel.text), Some(hint));
                    ok = false;
                }
                Some(sym) => {
                    if sym.arity != args.len() {
                        self.err(
                            &a.rel,
                            format!("relation `{}` has arity {}, found {} arguments", sym.name, sym.arity, args.len()),
                            Some(format!("write {}({})", sym.name, placeholder(sym.arity))),
                        );
                        ok = false;
                    } else if let Some(s) = visible {
                        if !sym.visible_at(s) {
                            let at: Vec<String> = sym.sources().iter().map(|x| x.to_string()).collect();
                            self.err(
                                &a.rel,
                                format!("relation `{}` is not visible at source `{s}`", sym.name),
                                Some(format!("`{}` lives at {}", sym.name, at.join(", "))),
                            );
                            ok = false;
                        }
                    }
                }
            }
            out.push(Atom::new(&a.rel.text, args));
        }
        ok.then_some(out)
    }

    fn model_err(&mut self, at: &Sp, e: ModelError) {
        let hint = match &e {
            ModelError::UnboundFreeVar { .. } => Some("every head variable must occur in the body".to_string()),
            ModelError::DuplicateFreeVar { .. } => Some("list each head variable once".to_string()),
            _ => None,
        };
        self.err(at, e.to_string(), hint);
    }
}

fn placeholder(n: usize) -> String {
    (1..=n).map(|k| format!("t{k}")).collect::<Vec<_>>().join(", ")
}

fn duplicate(diags: &mut Vec<Diagnostic>, seen: &mut BTreeMap<String, usize>, id: &Sp, kind: &str) -> bool {
    if let Some(line) = seen.get(&id.text) {
        diags.push(Diagnostic {
            line: id.line,
            col: id.col,
            message: format!("{kind} `{}` is already defined on line {line}", id.text),
            hint: Some(format!("rename one of the {kind}s")),
        });
        return true;
    }
    seen.insert(id.text.clone(), id.line);
    false
}

fn build(stmts: Vec<Stmt>, diags: &mut Vec<Diagnostic>) -> Workspace {
    let mut ck = Checker {
        diags,
        schema: DSchema::new(),
    };
    let mut ws = Workspace::default();
    // Sources first so that statements may come in any order.
    let mut seen_sources = BTreeMap::new();
    for s in &stmts {
        if let Stmt::Source { id, .. } = s {
            if !duplicate(ck.diags, &mut seen_sources, id, "source") {
                ck.schema.add_source(&id.text);
            }
        }
    }
    let mut rel_lines: BTreeMap<String, (usize, bool)> = BTreeMap::new();
    for s in &stmts {
        match s {
            Stmt::Source { id, rels } => {
                for (r, n) in rels {
                    if let Some((line, rep)) = rel_lines.get(&r.text) {
                        let hint = if *rep {
                            "a relation is either local to one source or replicated, not both"
                        } else {
                            "relation names are unique across the schema"
                        };
                        ck.err(
                            r,
                            format!("relation `{}` is already declared on line {line}", r.text),
                            Some(hint.into()),
                        );
                        continue;
                    }
                    rel_lines.insert(r.text.clone(), (r.line, false));
                    ck.schema.add_local(&id.text, &r.text, *n).ok();
                }
            }
            Stmt::Replicate { rel, arity, across } => {
                if let Some((line, rep)) = rel_lines.get(&rel.text) {
                    let hint = if *rep {
                        "list every member source in one `replicate` statement"
                    } else {
                        "a relation is either local to one source or replicated, not both"
                    };
                    ck.err(
                        rel,
                        format!("relation `{}` is already declared on line {line}", rel.text),
                        Some(hint.into()),
                    );
                    continue;
                }
                let mut ok = true;
                for s in across {
                    if !ck.schema.sources().iter().any(|x| **x == *s.text) {
                        ck.err(s, format!("unknown source `{}`", s.text), Some("declare it with `source`".into()));
                        ok = false;
                    }
                }
                if !ok {
                    continue;
                }
                let names: Vec<&str> = across.iter().map(|s| s.text.as_str()).collect();
                match ck.schema.add_replicated(&rel.text, *arity, &names) {
                    Ok(()) => {
                        rel_lines.insert(rel.text.clone(), (rel.line, true));
                    }
                    Err(e) => {
                        let hint = Some("replicate across at least two distinct sources".to_string());
                        ck.err(rel, e.to_string(), hint);
                    }
                }
            }
            _ => {}
        }
    }

    let mut seen_q = BTreeMap::new();
    let mut seen_p = BTreeMap::new();
    let mut seen_r = BTreeMap::new();
    let mut seen_v = BTreeMap::new();
    let mut seen_d = BTreeMap::new();
    let mut seen_i = BTreeMap::new();
    let mut view_names = BTreeSet::new();
    for s in &stmts {
        match s {
            Stmt::Query { secret, id, head, body } => {
                let (seen, kind) = if *secret { (&mut seen_p, "secret") } else { (&mut seen_q, "query") };
                if duplicate(ck.diags, seen, id, kind) {
                    continue;
                }
                let Some(atoms) = ck.atoms(body, None, false) else { continue };
                let free: Vec<Name> = head.iter().flatten().map(|v| name(&v.text)).collect();
                match ConjunctiveQuery::from_parts(name(&id.text), free, atoms) {
                    Ok(q) if *secret => ws.secrets.push(q),
                    Ok(q) => ws.queries.push(q),
                    Err(e) => ck.model_err(id, e),
                }
            }
            Stmt::Rule { id, body, exists, head } => {
                if duplicate(ck.diags, &mut seen_r, id, "rule") {
                    continue;
                }
                let Some(b) = ck.atoms(body, None, false) else { continue };
                let r = match head {
                    RawHead::Atoms(h) => {
                        let Some(h) = ck.atoms(h, None, false) else { continue };
                        ExistentialRule::tgd(&id.text, b, h)
                    }
                    RawHead::Eq(l, r) => ExistentialRule::equality(&id.text, b, Checker::term(l), Checker::term(r)),
                };
                match r {
                    Ok(r) => {
                        if let Some(ex) = exists {
                            let declared: BTreeSet<Name> = ex.iter().map(|v| name(&v.text)).collect();
                            let actual: BTreeSet<Name> = r.existential_vars().into_iter().collect();
                            if declared != actual {
                                let list: Vec<&str> = actual.iter().map(|v| &**v).collect();
                                ck.err(
                                    &ex[0],
                                    "the exists clause does not list exactly the head-only variables".into(),
                                    Some(if list.is_empty() {
                                        "drop the exists clause".to_string()
                                    } else {
                                        format!("write `exists {} .`", list.join(", "))
                                    }),
                                );
                                continue;
                            }
                        }
                        ws.rules.push(r);
                    }
                    Err(e) => ck.model_err(id, e),
                }
            }
            Stmt::View {
                id,
                head,
                source,
                bodies,
                guard,
            } => {
                if duplicate(ck.diags, &mut seen_v, id, "view") {
                    continue;
                }
                view_names.insert(id.text.clone());
                if !ck.schema.sources().iter().any(|s| **s == *source.text) {
                    ck.err(source, format!("unknown source `{}`", source.text), Some("declare it with `source`".into()));
                    continue;
                }
                let vars: Vec<Name> = head.iter().map(|v| name(&v.text)).collect();
                let mut ok = true;
                for (k, v) in head.iter().enumerate() {
                    if head[..k].iter().any(|w| w.text == v.text) {
                        ck.err(v, format!("view variable `{}` listed twice", v.text), None);
                        ok = false;
                    }
                }
                let mut lits = Vec::new();
                for (a, eq, b) in guard {
                    for x in [a, b] {
                        if !vars.iter().any(|v| **v == *x.text) {
                            ck.err(x, format!("`{}` is not a variable of view `{}`", x.text, id.text), Some("guards may only mention head variables".into()));
                            ok = false;
                        }
                    }
                    lits.push(if *eq {
                        GuardLit::Eq(name(&a.text), name(&b.text))
                    } else {
                        GuardLit::Neq(name(&a.text), name(&b.text))
                    });
                }
                let mut disjuncts = Vec::new();
                for body in bodies {
                    let Some(atoms) = ck.atoms(body, Some(&source.text), false) else {
                        ok = false;
                        continue;
                    };
                    let present: BTreeSet<Name> = viewforge_core::model::vars_in_order(&atoms).into_iter().collect();
                    let free: Vec<Name> = vars.iter().filter(|v| present.contains(*v)).cloned().collect();
                    match ConjunctiveQuery::from_parts(name(&id.text), free, atoms) {
                        Ok(q) => disjuncts.push(q),
                        Err(e) => {
                            ck.model_err(id, e);
                            ok = false;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                let def = if disjuncts.len() == 1 && lits.is_empty() && disjuncts[0].free.len() == vars.len() {
                    let mut q = disjuncts.pop().unwrap();
                    q.free = vars;
                    ViewDef::Cq(q)
                } else {
                    ViewDef::Dcq(Dcq {
                        vars,
                        disjuncts,
                        guard: lits,
                    })
                };
                ws.views.push(View {
                    name: name(&id.text),
                    source: name(&source.text),
                    def,
                });
            }
            _ => {}
        }
    }
    for s in &stmts {
        match s {
            Stmt::DView { id, members } => {
                if duplicate(ck.diags, &mut seen_d, id, "d-view") {
                    continue;
                }
                let mut ok = true;
                for m in members {
                    if !view_names.contains(&m.text) {
                        ck.err(m, format!("unknown view `{}`", m.text), Some("define it with a `view` statement".into()));
                        ok = false;
                    }
                }
                if ok {
                    ws.dviews.push((name(&id.text), members.iter().map(|m| name(&m.text)).collect()));
                }
            }
            Stmt::Instance { id, facts } => {
                if duplicate(ck.diags, &mut seen_i, id, "instance") {
                    continue;
                }
                if let Some(atoms) = ck.atoms(facts, None, true) {
                    ws.instances.push((name(&id.text), atoms.into_iter().collect()));
                }
            }
            _ => {}
        }
    }
    ws.schema = ck.schema;
    ws
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn fact_text(a: &Atom) -> String {
    let args: Vec<String> = a
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) if is_ident(c) => c.to_string(),
            other => other.to_string(),
        })
        .collect();
    format!("{}({})", a.rel, args.join(", "))
}

/// The `view` statement defining `v`.
pub fn view_text(v: &View) -> String {
    let (vars, bodies, guard): (Vec<Name>, Vec<&[Atom]>, Vec<GuardLit>) = match &v.def {
        ViewDef::Cq(q) => (q.free.clone(), vec![&q.atoms[..]], vec![]),
        ViewDef::Dcq(d) => (d.vars.clone(), d.disjuncts.iter().map(|q| &q.atoms[..]).collect(), d.guard.clone()),
        ViewDef::Ra(e) => return format!("# {} @ {} := {e}", v.name, v.source),
    };
    let mut s = format!("view {}", v.name);
    if !vars.is_empty() {
        s += &format!("({})", viewforge_core::model::join_names(&vars));
    }
    s += &format!(" @ {} := ", v.source);
    let bodies: Vec<String> = bodies.iter().map(|b| viewforge_core::model::join_atoms(b.iter())).collect();
    s += &bodies.join(" | ");
    if !guard.is_empty() {
        let lits: Vec<String> = guard
            .iter()
            .map(|g| match g {
                GuardLit::Eq(a, b) => format!("{a} = {b}"),
                GuardLit::Neq(a, b) => format!("{a} != {b}"),
            })
            .collect();
        s += &format!(" where {}", lits.join(", "));
    }
    s
}

/// Normalized text of a workspace: statements grouped by kind, each group
/// in declaration order, relations sorted within a source.
pub fn print_workspace(ws: &Workspace) -> String {
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut schema = Vec::new();
    for s in ws.schema.sources() {
        let rels: Vec<String> = ws
            .schema
            .relations()
            .filter(|r| matches!(&r.placement, Placement::Local(x) if x == s))
            .map(|r| format!("{}/{}", r.name, r.arity))
            .collect();
        if rels.is_empty() {
            schema.push(format!("source {s} {{ }}"));
        } else {
            schema.push(format!("source {s} {{ {} }}", rels.join(", ")));
        }
    }
    for r in ws.schema.relations() {
        if let Placement::Replicated(members) = &r.placement {
            let m: Vec<&str> = members.iter().map(|x| &**x).collect();
            schema.push(format!("replicate {}/{} across {}", r.name, r.arity, m.join(", ")));
        }
    }
    groups.push(schema);
    groups.push(ws.queries.iter().map(|q| format!("query {q}")).collect());
    groups.push(ws.secrets.iter().map(|q| format!("secret {q}")).collect());
    groups.push(ws.rules.iter().map(|r| r.to_string()).collect());
    groups.push(ws.views.iter().map(view_text).collect());
    groups.push(
        ws.dviews
            .iter()
            .map(|(d, m)| {
                if m.is_empty() {
                    format!("dview {d} {{ }}")
                } else {
                    format!("dview {d} {{ {} }}", viewforge_core::model::join_names(m))
                }
            })
            .collect(),
    );
    groups.push(
        ws.instances
            .iter()
            .map(|(n, i)| {
                let facts: Vec<String> = i.iter().map(|a| format!("{}.", fact_text(a))).collect();
                if facts.is_empty() {
                    format!("instance {n} {{ }}")
                } else {
                    format!("instance {n} {{ {} }}", facts.join(" "))
                }
            })
            .collect(),
    );
    let blocks: Vec<String> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| g.join("\n"))
        .collect();
    if blocks.is_empty() {
        String::new()
    } else {
        blocks.join("\n\n") + "\n"
    }
}
