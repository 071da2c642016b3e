//! Symbolic building blocks: terms, atoms, distributed schemas, queries,
//! rules, views and (distributed) instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::ra::RaExpr;

/// Interned-ish identifier used for relation, variable and constant names.
pub type Name = Arc<str>;

/// Source identifier in a distributed schema.
pub type SourceId = Name;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// The element of the critical instance.
pub const CRITICAL: &str = "*";

/// A term occurring in an atom.
///
/// Constants and variables carry their identifier; labeled nulls carry a
/// deterministic label produced by the operation that created them; pairs
/// are the elements built by synchronous products.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Name),
    Var(Name),
    Null(Name),
    Pair(Arc<(Term, Term)>),
}

impl Term {
    pub fn constant(s: &str) -> Term {
        Term::Const(name(s))
    }

    pub fn var(s: &str) -> Term {
        Term::Var(name(s))
    }

    pub fn null(s: &str) -> Term {
        Term::Null(name(s))
    }

    pub fn pair(left: Term, right: Term) -> Term {
        Term::Pair(Arc::new((left, right)))
    }

    pub fn critical() -> Term {
        Term::constant(CRITICAL)
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn pair_height(&self) -> usize {
        match self {
            Term::Pair(p) => p.0.pair_height().max(p.1.pair_height()) + 1,
            _ => 0,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "\"{c}\""),
            Term::Var(v) => write!(f, "{v}"),
            Term::Null(n) => write!(f, "_{n}"),
            Term::Pair(p) => write!(f, "<{}, {}>", p.0, p.1),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A relational atom (or fact, when all arguments are elements).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub rel: Name,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(rel: &str, args: Vec<Term>) -> Atom {
        Atom {
            rel: name(rel),
            args,
        }
    }

    /// Atom whose arguments are all variables.
    pub fn vars(rel: &str, vars: &[&str]) -> Atom {
        Atom::new(rel, vars.iter().map(|v| Term::var(v)).collect())
    }

    /// Fact whose arguments are all constants.
    pub fn fact(rel: &str, consts: &[&str]) -> Atom {
        Atom::new(rel, consts.iter().map(|c| Term::constant(c)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Atom {
        Atom {
            rel: self.rel.clone(),
            args: self.args.iter().map(&mut f).collect(),
        }
    }

    pub fn with_rel(&self, rel: Name) -> Atom {
        Atom {
            rel,
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Variables of a list of atoms in order of first occurrence.
pub fn vars_in_order<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Vec<Name> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for a in atoms {
        for t in &a.args {
            if let Term::Var(v) = t {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("query `{query}`: free variable `{var}` does not occur in any atom")]
    UnboundFreeVar { query: Name, var: Name },
    #[error("query `{0}` has no atoms")]
    EmptyQuery(Name),
    #[error("query `{query}`: argument `{term}` is not a variable or constant")]
    BadQueryTerm { query: Name, term: String },
    #[error("query `{query}`: free variable `{var}` listed twice")]
    DuplicateFreeVar { query: Name, var: Name },
    #[error("relation `{0}` declared twice")]
    DuplicateRelation(Name),
    #[error("relation `{0}` is replicated across fewer than two sources")]
    DegenerateReplication(Name),
    #[error("unknown source `{0}`")]
    UnknownSource(Name),
    #[error("unknown relation `{0}`")]
    UnknownRelation(Name),
    #[error("atom {atom} has arity {found}, relation `{rel}` expects {expected}")]
    Arity {
        atom: String,
        rel: Name,
        expected: usize,
        found: usize,
    },
    #[error("view `{view}` reads relation `{rel}` which is not visible at source `{at}`")]
    ViewOutsideSource { view: Name, rel: Name, at: Name },
    #[error("rule `{rule}`: {reason}")]
    BadRule { rule: Name, reason: String },
    #[error("view `{view}`: {reason}")]
    BadView { view: Name, reason: String },
}

/// Where a relation lives in a distributed schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Local(SourceId),
    Replicated(BTreeSet<SourceId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSymbol {
    pub name: Name,
    pub arity: usize,
    pub placement: Placement,
}

impl RelationSymbol {
    pub fn sources(&self) -> Vec<SourceId> {
        match &self.placement {
            Placement::Local(s) => vec![s.clone()],
            Placement::Replicated(ss) => ss.iter().cloned().collect(),
        }
    }

    pub fn is_replicated(&self) -> bool {
        matches!(self.placement, Placement::Replicated(_))
    }

    pub fn visible_at(&self, source: &str) -> bool {
        match &self.placement {
            Placement::Local(s) => &**s == source,
            Placement::Replicated(ss) => ss.iter().any(|s| &**s == source),
        }
    }
}

/// A distributed schema: sources and the relations assigned to them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DSchema {
    sources: Vec<SourceId>,
    relations: BTreeMap<Name, RelationSymbol>,
}

impl DSchema {
    pub fn new() -> DSchema {
        DSchema::default()
    }

    pub fn add_source(&mut self, source: &str) {
        if !self.sources.iter().any(|s| &**s == source) {
            self.sources.push(name(source));
        }
    }

    pub fn add_local(&mut self, source: &str, rel: &str, arity: usize) -> Result<(), ModelError> {
        if !self.sources.iter().any(|s| &**s == source) {
            return Err(ModelError::UnknownSource(name(source)));
        }
        self.insert(RelationSymbol {
            name: name(rel),
            arity,
            placement: Placement::Local(name(source)),
        })
    }

    pub fn add_replicated(
        &mut self,
        rel: &str,
        arity: usize,
        sources: &[&str],
    ) -> Result<(), ModelError> {
        let mut set = BTreeSet::new();
        for s in sources {
            if !self.sources.iter().any(|x| &**x == *s) {
                return Err(ModelError::UnknownSource(name(s)));
            }
            set.insert(name(s));
        }
        if set.len() < 2 {
            return Err(ModelError::DegenerateReplication(name(rel)));
        }
        self.insert(RelationSymbol {
            name: name(rel),
            arity,
            placement: Placement::Replicated(set),
        })
    }

    fn insert(&mut self, sym: RelationSymbol) -> Result<(), ModelError> {
        if self.relations.contains_key(&sym.name) {
            return Err(ModelError::DuplicateRelation(sym.name));
        }
        self.relations.insert(sym.name.clone(), sym);
        Ok(())
    }

    pub fn sources(&self) -> &[SourceId] {
        &self.sources
    }

    pub fn relation(&self, rel: &str) -> Option<&RelationSymbol> {
        self.relations.get(rel)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationSymbol> {
        self.relations.values()
    }

    /// Relations visible at a source, local and replicated.
    pub fn relations_at<'a>(&'a self, source: &'a str) -> impl Iterator<Item = &'a RelationSymbol> {
        self.relations.values().filter(move |r| r.visible_at(source))
    }

    pub fn sources_of(&self, rel: &str) -> Vec<SourceId> {
        self.relation(rel).map(|r| r.sources()).unwrap_or_default()
    }

    pub fn check_atom(&self, atom: &Atom) -> Result<(), ModelError> {
        let sym = self
            .relation(&atom.rel)
            .ok_or_else(|| ModelError::UnknownRelation(atom.rel.clone()))?;
        if sym.arity != atom.arity() {
            return Err(ModelError::Arity {
                atom: atom.to_string(),
                rel: atom.rel.clone(),
                expected: sym.arity,
                found: atom.arity(),
            });
        }
        Ok(())
    }

    pub fn check_query(&self, q: &ConjunctiveQuery) -> Result<(), ModelError> {
        q.atoms.iter().try_for_each(|a| self.check_atom(a))
    }

    /// Relations replicated across every source of the schema.
    pub fn fully_replicated(&self) -> Vec<&RelationSymbol> {
        self.relations
            .values()
            .filter(|r| match &r.placement {
                Placement::Replicated(ss) => self.sources.iter().all(|s| ss.contains(s)),
                Placement::Local(_) => false,
            })
            .collect()
    }
}

/// A conjunctive query `Q(free) := atoms`; variables not listed as free are
/// existentially quantified.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConjunctiveQuery {
    pub name: Name,
    pub free: Vec<Name>,
    pub atoms: Vec<Atom>,
}

impl ConjunctiveQuery {
    pub fn new(qname: &str, free: &[&str], atoms: Vec<Atom>) -> Result<Self, ModelError> {
        Self::from_parts(name(qname), free.iter().map(|v| name(v)).collect(), atoms)
    }

    pub fn from_parts(qname: Name, free: Vec<Name>, atoms: Vec<Atom>) -> Result<Self, ModelError> {
        if atoms.is_empty() {
            return Err(ModelError::EmptyQuery(qname));
        }
        for a in &atoms {
            for t in &a.args {
                if !matches!(t, Term::Var(_) | Term::Const(_)) {
                    return Err(ModelError::BadQueryTerm {
                        query: qname,
                        term: t.to_string(),
                    });
                }
            }
        }
        let vars: BTreeSet<Name> = vars_in_order(&atoms).into_iter().collect();
        let mut seen = BTreeSet::new();
        for v in &free {
            if !vars.contains(v) {
                return Err(ModelError::UnboundFreeVar {
                    query: qname,
                    var: v.clone(),
                });
            }
            if !seen.insert(v.clone()) {
                return Err(ModelError::DuplicateFreeVar {
                    query: qname,
                    var: v.clone(),
                });
            }
        }
        Ok(ConjunctiveQuery {
            name: qname,
            free,
            atoms,
        })
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    pub fn vars(&self) -> Vec<Name> {
        vars_in_order(&self.atoms)
    }

    pub fn bound_vars(&self) -> Vec<Name> {
        self.vars()
            .into_iter()
            .filter(|v| !self.free.contains(v))
            .collect()
    }

    pub fn relations(&self) -> BTreeSet<Name> {
        self.atoms.iter().map(|a| a.rel.clone()).collect()
    }

    pub fn renamed(&self, qname: &str) -> ConjunctiveQuery {
        ConjunctiveQuery {
            name: name(qname),
            ..self.clone()
        }
    }

    /// Substitute variables; free variables are mapped too and deduplicated.
    pub fn substitute(&self, map: &BTreeMap<Name, Name>) -> ConjunctiveQuery {
        let sub = |v: &Name| map.get(v).cloned().unwrap_or_else(|| v.clone());
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                a.map_terms(|t| match t {
                    Term::Var(v) => Term::Var(sub(v)),
                    other => other.clone(),
                })
            })
            .collect();
        let mut free = Vec::new();
        for v in &self.free {
            let w = sub(v);
            if !free.contains(&w) {
                free.push(w);
            }
        }
        ConjunctiveQuery {
            name: self.name.clone(),
            free,
            atoms,
        }
    }

    /// Boolean closure: every variable existentially quantified.
    pub fn boolean_closure(&self) -> ConjunctiveQuery {
        ConjunctiveQuery {
            name: self.name.clone(),
            free: Vec::new(),
            atoms: self.atoms.clone(),
        }
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.free.is_empty() {
            write!(f, "({})", join_names(&self.free))?;
        }
        write!(f, " := {}", join_atoms(&self.atoms))
    }
}

impl fmt::Debug for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn join_names(names: &[Name]) -> String {
    names.iter().map(|n| &**n).collect::<Vec<_>>().join(", ")
}

pub fn join_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> String {
    atoms
        .into_iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Constant standing for variable `v` in a canonical database.
pub fn canon_const(v: &str) -> Term {
    Term::Const(name(&format!("c_{v}")))
}

/// Freeze a query: one fact per atom, each variable `v` replaced by `c_v`.
pub fn build_canondb(q: &ConjunctiveQuery) -> Instance {
    freeze_atoms(&q.atoms)
}

pub fn freeze_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Instance {
    atoms
        .into_iter()
        .map(|a| {
            a.map_terms(|t| match t {
                Term::Var(v) => canon_const(v),
                other => other.clone(),
            })
        })
        .collect()
}

/// A finite set of facts.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    facts: BTreeSet<Atom>,
}

impl Instance {
    pub fn new() -> Instance {
        Instance::default()
    }

    pub fn insert(&mut self, fact: Atom) -> bool {
        self.facts.insert(fact)
    }

    pub fn remove(&mut self, fact: &Atom) -> bool {
        self.facts.remove(fact)
    }

    pub fn contains(&self, fact: &Atom) -> bool {
        self.facts.contains(fact)
    }

    pub fn get(&self, fact: &Atom) -> Option<&Atom> {
        self.facts.get(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter()
    }

    pub fn facts(&self) -> &BTreeSet<Atom> {
        &self.facts
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Atom>) {
        self.facts.extend(other);
    }

    pub fn union(&self, other: &Instance) -> Instance {
        let mut out = self.clone();
        out.facts.extend(other.facts.iter().cloned());
        out
    }

    /// Facts of one relation. Atoms order by relation first, so this is a
    /// range scan.
    pub fn facts_of<'a>(&'a self, rel: &'a str) -> impl Iterator<Item = &'a Atom> {
        let start = Atom {
            rel: name(rel),
            args: Vec::new(),
        };
        self.facts
            .range(start..)
            .take_while(move |a| &*a.rel == rel)
    }

    /// Facts of `rel` whose arguments start with `prefix`.
    pub fn facts_with_prefix<'a>(&'a self, rel: &'a str, prefix: &'a [Term]) -> impl Iterator<Item = &'a Atom> {
        let start = Atom {
            rel: name(rel),
            args: prefix.to_vec(),
        };
        self.facts
            .range(start..)
            .take_while(move |a| &*a.rel == rel && a.args.starts_with(prefix))
    }

    pub fn restrict(&self, mut keep: impl FnMut(&str) -> bool) -> Instance {
        self.facts.iter().filter(|a| keep(&a.rel)).cloned().collect()
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Instance {
        self.facts.iter().map(|a| a.map_terms(&mut f)).collect()
    }

    pub fn relations(&self) -> BTreeSet<Name> {
        self.facts.iter().map(|a| a.rel.clone()).collect()
    }

    /// Replace labeled nulls by fresh constants `<prefix><label>`.
    pub fn freeze_nulls(&self, prefix: &str) -> Instance {
        self.map_terms(|t| freeze_term(t, prefix))
    }
}

fn freeze_term(t: &Term, prefix: &str) -> Term {
    match t {
        Term::Null(n) => Term::Const(name(&format!("{prefix}{n}"))),
        Term::Pair(p) => Term::pair(freeze_term(&p.0, prefix), freeze_term(&p.1, prefix)),
        other => other.clone(),
    }
}

impl FromIterator<Atom> for Instance {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        Instance {
            facts: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Instance {
    type Item = &'a Atom;
    type IntoIter = std::collections::btree_set::Iter<'a, Atom>;
    fn into_iter(self) -> Self::IntoIter {
        self.facts.iter()
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", join_atoms(&self.facts))
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Elements occurring in some fact.
pub fn active_domain(i: &Instance) -> BTreeSet<Term> {
    i.iter().flat_map(|a| a.args.iter().cloned()).collect()
}

/// A distributed instance: one local instance per source. Facts of a
/// replicated relation are stored in every member source.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DInstance {
    pub parts: BTreeMap<SourceId, Instance>,
}

impl DInstance {
    pub fn new() -> DInstance {
        DInstance::default()
    }

    /// Distribute a global fact set along the schema (replicated facts go to
    /// every member source). Facts over unknown relations are dropped.
    pub fn distribute(schema: &DSchema, global: &Instance) -> DInstance {
        let mut d = DInstance::new();
        for s in schema.sources() {
            d.parts.insert(s.clone(), Instance::new());
        }
        for fact in global {
            for s in schema.sources_of(&fact.rel) {
                d.parts.entry(s).or_default().insert(fact.clone());
            }
        }
        d
    }

    pub fn part(&self, source: &str) -> Instance {
        self.parts.get(source).cloned().unwrap_or_default()
    }

    /// Union of all local instances.
    pub fn global(&self) -> Instance {
        let mut out = Instance::new();
        for p in self.parts.values() {
            out.extend(p.iter().cloned());
        }
        out
    }
}

/// A schema violation found by [`validate_dschema`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub source: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownSource,
    UnknownRelation,
    Placement,
    Arity,
    Replication,
}

/// Check a d-instance against a d-schema; returns every violation found.
pub fn validate_dschema(schema: &DSchema, d: &DInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    for (src, inst) in &d.parts {
        if !schema.sources().contains(src) {
            out.push(Violation {
                kind: ViolationKind::UnknownSource,
                source: Some(src.to_string()),
                detail: format!("source `{src}` is not declared"),
            });
            continue;
        }
        for fact in inst {
            let Some(sym) = schema.relation(&fact.rel) else {
                out.push(Violation {
                    kind: ViolationKind::UnknownRelation,
                    source: Some(src.to_string()),
                    detail: format!("fact {fact} uses undeclared relation `{}`", fact.rel),
                });
                continue;
            };
            if !sym.visible_at(src) {
                out.push(Violation {
                    kind: ViolationKind::Placement,
                    source: Some(src.to_string()),
                    detail: format!("relation `{}` does not belong to source `{src}`", fact.rel),
                });
            }
            if sym.arity != fact.arity() {
                out.push(Violation {
                    kind: ViolationKind::Arity,
                    source: Some(src.to_string()),
                    detail: format!(
                        "fact {fact} has arity {}, `{}` expects {}",
                        fact.arity(),
                        fact.rel,
                        sym.arity
                    ),
                });
            }
        }
    }
    for sym in schema.relations().filter(|r| r.is_replicated()) {
        let members = sym.sources();
        let reference: BTreeSet<&Atom> = d
            .parts
            .get(&members[0])
            .map(|i| i.facts_of(&sym.name).collect())
            .unwrap_or_default();
        for s in &members[1..] {
            let other: BTreeSet<&Atom> = d
                .parts
                .get(s)
                .map(|i| i.facts_of(&sym.name).collect())
                .unwrap_or_default();
            if other != reference {
                out.push(Violation {
                    kind: ViolationKind::Replication,
                    source: Some(s.to_string()),
                    detail: format!(
                        "replicated relation `{}` differs between `{}` and `{s}`",
                        sym.name, members[0]
                    ),
                });
            }
        }
    }
    out
}

/// Head of an existential rule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RuleHead {
    /// Tuple-generating head; head variables absent from the body are
    /// existentially quantified.
    Atoms(Vec<Atom>),
    /// Equality between two body terms (or a body term and a constant).
    Equality(Term, Term),
}

/// Existential rule `body -> exists ys . head`, or an equality rule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExistentialRule {
    pub name: Name,
    pub body: Vec<Atom>,
    pub head: RuleHead,
}

impl ExistentialRule {
    pub fn tgd(rname: &str, body: Vec<Atom>, head: Vec<Atom>) -> Result<Self, ModelError> {
        let r = ExistentialRule {
            name: name(rname),
            body,
            head: RuleHead::Atoms(head),
        };
        r.check()?;
        Ok(r)
    }

    pub fn equality(rname: &str, body: Vec<Atom>, lhs: Term, rhs: Term) -> Result<Self, ModelError> {
        let r = ExistentialRule {
            name: name(rname),
            body,
            head: RuleHead::Equality(lhs, rhs),
        };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::BadRule {
            rule: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.body.is_empty() {
            return Err(bad("empty body"));
        }
        let body_vars: BTreeSet<Name> = vars_in_order(&self.body).into_iter().collect();
        let term_ok = |t: &Term| match t {
            Term::Var(v) => body_vars.contains(v),
            Term::Const(_) => true,
            _ => false,
        };
        match &self.head {
            RuleHead::Atoms(h) => {
                if h.is_empty() {
                    return Err(bad("empty head"));
                }
                for a in self.body.iter().chain(h) {
                    if a.args.iter().any(|t| !matches!(t, Term::Var(_) | Term::Const(_))) {
                        return Err(bad("atoms may only use variables and constants"));
                    }
                }
            }
            RuleHead::Equality(l, r) => {
                if !term_ok(l) || !term_ok(r) {
                    return Err(bad("equality head must use body variables or constants"));
                }
            }
        }
        Ok(())
    }

    pub fn is_tgd(&self) -> bool {
        matches!(self.head, RuleHead::Atoms(_))
    }

    pub fn head_atoms(&self) -> &[Atom] {
        match &self.head {
            RuleHead::Atoms(h) => h,
            RuleHead::Equality(..) => &[],
        }
    }

    pub fn body_vars(&self) -> Vec<Name> {
        vars_in_order(&self.body)
    }

    /// Head variables that do not occur in the body.
    pub fn existential_vars(&self) -> Vec<Name> {
        let body: BTreeSet<Name> = self.body_vars().into_iter().collect();
        vars_in_order(self.head_atoms())
            .into_iter()
            .filter(|v| !body.contains(v))
            .collect()
    }

    /// Body variables that also occur in the head.
    pub fn frontier(&self) -> Vec<Name> {
        let head: BTreeSet<Name> = vars_in_order(self.head_atoms()).into_iter().collect();
        self.body_vars()
            .into_iter()
            .filter(|v| head.contains(v))
            .collect()
    }

    pub fn relations(&self) -> BTreeSet<Name> {
        self.body
            .iter()
            .chain(self.head_atoms())
            .map(|a| a.rel.clone())
            .collect()
    }

    /// Copy with every relation renamed through `f`.
    pub fn map_relations(&self, f: impl Fn(&Name) -> Name) -> ExistentialRule {
        let map = |atoms: &[Atom]| atoms.iter().map(|a| a.with_rel(f(&a.rel))).collect();
        ExistentialRule {
            name: self.name.clone(),
            body: map(&self.body),
            head: match &self.head {
                RuleHead::Atoms(h) => RuleHead::Atoms(map(h)),
                eq => eq.clone(),
            },
        }
    }
}

impl fmt::Display for ExistentialRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} := {} -> ", self.name, join_atoms(&self.body))?;
        match &self.head {
            RuleHead::Atoms(h) => {
                let ex = self.existential_vars();
                if !ex.is_empty() {
                    write!(f, "exists {} . ", join_names(&ex))?;
                }
                write!(f, "{}", join_atoms(h))
            }
            RuleHead::Equality(l, r) => write!(f, "{l} = {r}"),
        }
    }
}

/// Equality or disequality between two view variables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum GuardLit {
    Eq(Name, Name),
    Neq(Name, Name),
}

impl GuardLit {
    pub fn vars(&self) -> (&Name, &Name) {
        match self {
            GuardLit::Eq(a, b) | GuardLit::Neq(a, b) => (a, b),
        }
    }

    pub fn holds(&self, a: &Term, b: &Term) -> bool {
        match self {
            GuardLit::Eq(..) => a == b,
            GuardLit::Neq(..) => a != b,
        }
    }
}

impl fmt::Display for GuardLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardLit::Eq(a, b) => write!(f, "{a}={b}"),
            GuardLit::Neq(a, b) => write!(f, "{a}!={b}"),
        }
    }
}

/// Disjunction of CQs over a common variable list, possibly unsafe (a
/// disjunct need not mention every variable), with an optional guard.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Dcq {
    pub vars: Vec<Name>,
    /// Each disjunct's free variables are the view variables it mentions.
    pub disjuncts: Vec<ConjunctiveQuery>,
    pub guard: Vec<GuardLit>,
}

impl Dcq {
    pub fn relations(&self) -> BTreeSet<Name> {
        self.disjuncts.iter().flat_map(|d| d.relations()).collect()
    }

    /// Every disjunct mentions every variable.
    pub fn is_safe(&self) -> bool {
        self.disjuncts.iter().all(|d| d.free.len() == self.vars.len())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ViewDef {
    Cq(ConjunctiveQuery),
    Dcq(Dcq),
    Ra(RaExpr),
}

/// A named view over the relations visible at one source.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct View {
    pub name: Name,
    pub source: SourceId,
    pub def: ViewDef,
}

impl View {
    pub fn cq(vname: &str, source: &str, q: ConjunctiveQuery) -> View {
        View {
            name: name(vname),
            source: name(source),
            def: ViewDef::Cq(q.renamed(vname)),
        }
    }

    pub fn arity(&self) -> usize {
        match &self.def {
            ViewDef::Cq(q) => q.free.len(),
            ViewDef::Dcq(d) => d.vars.len(),
            ViewDef::Ra(e) => e.attrs().len(),
        }
    }

    pub fn as_cq(&self) -> Option<&ConjunctiveQuery> {
        match &self.def {
            ViewDef::Cq(q) => Some(q),
            _ => None,
        }
    }

    pub fn relations(&self) -> BTreeSet<Name> {
        match &self.def {
            ViewDef::Cq(q) => q.relations(),
            ViewDef::Dcq(d) => d.relations(),
            ViewDef::Ra(e) => e.relations(),
        }
    }

    /// Every relation read by the view is visible at its source.
    pub fn check(&self, schema: &DSchema) -> Result<(), ModelError> {
        for rel in self.relations() {
            let sym = schema
                .relation(&rel)
                .ok_or_else(|| ModelError::UnknownRelation(rel.clone()))?;
            if !sym.visible_at(&self.source) {
                return Err(ModelError::ViewOutsideSource {
                    view: self.name.clone(),
                    rel,
                    at: self.source.clone(),
                });
            }
        }
        match &self.def {
            ViewDef::Cq(q) => schema.check_query(q),
            ViewDef::Dcq(d) => d.disjuncts.iter().try_for_each(|q| schema.check_query(q)),
            ViewDef::Ra(_) => Ok(()),
        }
    }
}

/// A distributed view: a family of per-source views.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct DView {
    pub name: Name,
    pub views: Vec<View>,
}

impl DView {
    pub fn new(dname: &str, views: Vec<View>) -> DView {
        DView {
            name: name(dname),
            views,
        }
    }

    pub fn by_source(&self) -> BTreeMap<SourceId, Vec<&View>> {
        let mut out: BTreeMap<SourceId, Vec<&View>> = BTreeMap::new();
        for v in &self.views {
            out.entry(v.source.clone()).or_default().push(v);
        }
        out
    }

    pub fn all_cq(&self) -> bool {
        self.views.iter().all(|v| v.as_cq().is_some())
    }
}
