//! Named-attribute relational algebra, DCQ evaluation and the DCQ to RA
//! compilation that preserves the induced equivalence relation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::homomorphism::enumerate_matches;
use crate::model::{name, Atom, ConjunctiveQuery, Dcq, GuardLit, Instance, Name, Term, View, ViewDef};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RaExpr {
    /// Facts of a relation; variables name the columns, repeated variables
    /// and constants filter.
    Base(Atom),
    /// Unary relation holding the evaluation domain.
    Domain(Name),
    Join(Box<RaExpr>, Box<RaExpr>),
    Project(Box<RaExpr>, Vec<Name>),
    Select(Box<RaExpr>, Vec<GuardLit>),
    Union(Box<RaExpr>, Box<RaExpr>),
    Difference(Box<RaExpr>, Box<RaExpr>),
    /// Rename attributes: pairs `(old, new)`.
    Rename(Box<RaExpr>, Vec<(Name, Name)>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RaError {
    #[error("attribute mismatch: {left:?} vs {right:?}")]
    AttrMismatch { left: Vec<String>, right: Vec<String> },
    #[error("unknown attribute `{0}`")]
    UnknownAttr(Name),
}

impl RaExpr {
    pub fn join(l: RaExpr, r: RaExpr) -> RaExpr {
        RaExpr::Join(Box::new(l), Box::new(r))
    }

    pub fn union(l: RaExpr, r: RaExpr) -> RaExpr {
        RaExpr::Union(Box::new(l), Box::new(r))
    }

    pub fn difference(l: RaExpr, r: RaExpr) -> RaExpr {
        RaExpr::Difference(Box::new(l), Box::new(r))
    }

    pub fn project(e: RaExpr, attrs: Vec<Name>) -> RaExpr {
        RaExpr::Project(Box::new(e), attrs)
    }

    pub fn select(e: RaExpr, lits: Vec<GuardLit>) -> RaExpr {
        RaExpr::Select(Box::new(e), lits)
    }

    /// Output attributes in column order.
    pub fn attrs(&self) -> Vec<Name> {
        match self {
            RaExpr::Base(a) => crate::model::vars_in_order([a]),
            RaExpr::Domain(x) => vec![x.clone()],
            RaExpr::Join(l, r) => {
                let mut out = l.attrs();
                for a in r.attrs() {
                    if !out.contains(&a) {
                        out.push(a);
                    }
                }
                out
            }
            RaExpr::Project(_, attrs) => attrs.clone(),
            RaExpr::Select(e, _) => e.attrs(),
            RaExpr::Union(l, _) | RaExpr::Difference(l, _) => l.attrs(),
            RaExpr::Rename(e, map) => e
                .attrs()
                .into_iter()
                .map(|a| {
                    map.iter()
                        .find(|(o, _)| *o == a)
                        .map(|(_, n)| n.clone())
                        .unwrap_or(a)
                })
                .collect(),
        }
    }

    pub fn relations(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_relations(&mut out);
        out
    }

    fn collect_relations(&self, out: &mut BTreeSet<Name>) {
        match self {
            RaExpr::Base(a) => {
                out.insert(a.rel.clone());
            }
            RaExpr::Domain(_) => {}
            RaExpr::Join(l, r) | RaExpr::Union(l, r) | RaExpr::Difference(l, r) => {
                l.collect_relations(out);
                r.collect_relations(out);
            }
            RaExpr::Project(e, _) | RaExpr::Select(e, _) | RaExpr::Rename(e, _) => {
                e.collect_relations(out)
            }
        }
    }
}

impl fmt::Display for RaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |v: &[Name]| v.iter().map(|n| &**n).collect::<Vec<_>>().join(" ");
        match self {
            RaExpr::Base(a) => {
                write!(f, "(base {}", a.rel)?;
                for t in &a.args {
                    write!(f, " {t}")?;
                }
                write!(f, ")")
            }
            RaExpr::Domain(x) => write!(f, "(dom {x})"),
            RaExpr::Join(l, r) => write!(f, "(join {l} {r})"),
            RaExpr::Project(e, attrs) => write!(f, "(project {e} {})", names(attrs)),
            RaExpr::Select(e, lits) => {
                write!(f, "(select {e}")?;
                for l in lits {
                    match l {
                        GuardLit::Eq(a, b) => write!(f, " (= {a} {b})")?,
                        GuardLit::Neq(a, b) => write!(f, " (!= {a} {b})")?,
                    }
                }
                write!(f, ")")
            }
            RaExpr::Union(l, r) => write!(f, "(union {l} {r})"),
            RaExpr::Difference(l, r) => write!(f, "(diff {l} {r})"),
            RaExpr::Rename(e, map) => {
                write!(f, "(rename {e}")?;
                for (o, n) in map {
                    write!(f, " ({o} {n})")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A relation with named columns.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Relation {
    pub attrs: Vec<Name>,
    pub rows: BTreeSet<Vec<Term>>,
}

impl Relation {
    fn reorder(&self, attrs: &[Name]) -> Result<BTreeSet<Vec<Term>>, RaError> {
        let idx: Vec<usize> = attrs
            .iter()
            .map(|a| {
                self.attrs
                    .iter()
                    .position(|b| b == a)
                    .ok_or_else(|| RaError::UnknownAttr(a.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect())
    }
}

fn same_attr_set(a: &[Name], b: &[Name]) -> bool {
    let x: BTreeSet<&Name> = a.iter().collect();
    let y: BTreeSet<&Name> = b.iter().collect();
    x == y && a.len() == b.len()
}

/// Evaluate with `Domain` nodes ranging over the active domain of `i`.
pub fn eval_ra(e: &RaExpr, i: &Instance) -> Result<Relation, RaError> {
    let dom = crate::model::active_domain(i);
    eval_ra_in(e, i, &dom)
}

/// Evaluate with `Domain` nodes ranging over `domain`.
pub fn eval_ra_in(e: &RaExpr, i: &Instance, domain: &BTreeSet<Term>) -> Result<Relation, RaError> {
    match e {
        RaExpr::Base(atom) => {
            let attrs = e.attrs();
            let q = ConjunctiveQuery {
                name: name("base"),
                free: attrs.clone(),
                atoms: vec![atom.clone()],
            };
            Ok(Relation {
                attrs,
                rows: enumerate_matches(&q, i),
            })
        }
        RaExpr::Domain(x) => Ok(Relation {
            attrs: vec![x.clone()],
            rows: domain.iter().map(|t| vec![t.clone()]).collect(),
        }),
        RaExpr::Join(l, r) => {
            let l = eval_ra_in(l, i, domain)?;
            let r = eval_ra_in(r, i, domain)?;
            let shared: Vec<(usize, usize)> = l
                .attrs
                .iter()
                .enumerate()
                .filter_map(|(li, a)| r.attrs.iter().position(|b| b == a).map(|ri| (li, ri)))
                .collect();
            let extra: Vec<usize> = (0..r.attrs.len())
                .filter(|ri| !shared.iter().any(|(_, s)| s == ri))
                .collect();
            let mut attrs = l.attrs.clone();
            attrs.extend(extra.iter().map(|&k| r.attrs[k].clone()));
            let mut rows = BTreeSet::new();
            for lr in &l.rows {
                for rr in &r.rows {
                    if shared.iter().all(|&(a, b)| lr[a] == rr[b]) {
                        let mut row = lr.clone();
                        row.extend(extra.iter().map(|&k| rr[k].clone()));
                        rows.insert(row);
                    }
                }
            }
            Ok(Relation { attrs, rows })
        }
        RaExpr::Project(inner, attrs) => {
            let rel = eval_ra_in(inner, i, domain)?;
            Ok(Relation {
                attrs: attrs.clone(),
                rows: rel.reorder(attrs)?,
            })
        }
        RaExpr::Select(inner, lits) => {
            let rel = eval_ra_in(inner, i, domain)?;
            let pos = |a: &Name| {
                rel.attrs
                    .iter()
                    .position(|b| b == a)
                    .ok_or_else(|| RaError::UnknownAttr(a.clone()))
            };
            let mut checks = Vec::new();
            for l in lits {
                let (a, b) = l.vars();
                checks.push((l.clone(), pos(a)?, pos(b)?));
            }
            let rows = rel
                .rows
                .iter()
                .filter(|r| checks.iter().all(|(l, a, b)| l.holds(&r[*a], &r[*b])))
                .cloned()
                .collect();
            Ok(Relation {
                attrs: rel.attrs,
                rows,
            })
        }
        RaExpr::Union(l, r) | RaExpr::Difference(l, r) => {
            let l = eval_ra_in(l, i, domain)?;
            let r = eval_ra_in(r, i, domain)?;
            if !same_attr_set(&l.attrs, &r.attrs) {
                return Err(RaError::AttrMismatch {
                    left: l.attrs.iter().map(|a| a.to_string()).collect(),
                    right: r.attrs.iter().map(|a| a.to_string()).collect(),
                });
            }
            let rrows = r.reorder(&l.attrs)?;
            let rows = if matches!(e, RaExpr::Union(..)) {
                l.rows.union(&rrows).cloned().collect()
            } else {
                l.rows.difference(&rrows).cloned().collect()
            };
            Ok(Relation {
                attrs: l.attrs,
                rows,
            })
        }
        RaExpr::Rename(inner, _) => {
            let rel = eval_ra_in(inner, i, domain)?;
            Ok(Relation {
                attrs: e.attrs(),
                rows: rel.rows,
            })
        }
    }
}

/// Bindings of the DCQ's variable list into `eval_domain` satisfying the
/// guard and some disjunct. Variables a satisfied disjunct does not mention
/// range over the whole evaluation domain.
pub fn eval_dcq(v: &Dcq, i: &Instance, eval_domain: &BTreeSet<Term>) -> BTreeSet<Vec<Term>> {
    let dom: Vec<Term> = eval_domain.iter().cloned().collect();
    let pos: BTreeMap<&Name, usize> = v.vars.iter().enumerate().map(|(k, x)| (x, k)).collect();
    let mut out = BTreeSet::new();
    for d in &v.disjuncts {
        let missing: Vec<usize> = (0..v.vars.len())
            .filter(|k| !d.free.contains(&v.vars[*k]))
            .collect();
        for m in enumerate_matches(d, i) {
            let mut row: Vec<Option<Term>> = vec![None; v.vars.len()];
            for (x, t) in d.free.iter().zip(m) {
                row[pos[x]] = Some(t);
            }
            pad(&mut row, &missing, &dom, &mut |full| {
                let ok = v.guard.iter().all(|l| {
                    let (a, b) = l.vars();
                    l.holds(&full[pos[a]], &full[pos[b]])
                });
                if ok {
                    out.insert(full.to_vec());
                }
            });
        }
    }
    out
}

fn pad(row: &mut Vec<Option<Term>>, missing: &[usize], dom: &[Term], emit: &mut dyn FnMut(&[Term])) {
    match missing.split_first() {
        None => {
            let full: Vec<Term> = row.iter().map(|t| t.clone().unwrap()).collect();
            emit(&full);
        }
        Some((&k, rest)) => {
            for t in dom {
                row[k] = Some(t.clone());
                pad(row, rest, dom, emit);
            }
            row[k] = None;
        }
    }
}

/// Guard literals implied on the variable subset `s`, assuming the other
/// variables may take any value (an infinite domain).
pub fn project_guard(guard: &[GuardLit], s: &[Name]) -> Vec<GuardLit> {
    let mut vars: Vec<Name> = Vec::new();
    for l in guard {
        let (a, b) = l.vars();
        for x in [a, b] {
            if !vars.contains(x) {
                vars.push(x.clone());
            }
        }
    }
    let mut class: BTreeMap<Name, usize> = vars.iter().enumerate().map(|(k, v)| (v.clone(), k)).collect();
    loop {
        let mut changed = false;
        for l in guard {
            if let GuardLit::Eq(a, b) = l {
                let (ca, cb) = (class[a], class[b]);
                if ca != cb {
                    let (lo, hi) = (ca.min(cb), ca.max(cb));
                    for c in class.values_mut() {
                        if *c == hi {
                            *c = lo;
                        }
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let neq: BTreeSet<(usize, usize)> = guard
        .iter()
        .filter_map(|l| match l {
            GuardLit::Neq(a, b) => {
                let (x, y) = (class[a], class[b]);
                Some((x.min(y), x.max(y)))
            }
            GuardLit::Eq(..) => None,
        })
        .collect();
    let inside: Vec<&Name> = s.iter().filter(|x| class.contains_key(*x)).collect();
    let mut out = Vec::new();
    for (k, a) in inside.iter().enumerate() {
        for b in &inside[k + 1..] {
            let (x, y) = (class[*a], class[*b]);
            if x == y {
                out.push(GuardLit::Eq((*a).clone(), (*b).clone()));
            } else if neq.contains(&(x.min(y), x.max(y))) {
                out.push(GuardLit::Neq((*a).clone(), (*b).clone()));
            }
        }
    }
    // A contradictory guard empties the view.
    if neq.iter().any(|(x, y)| x == y) {
        if let Some(a) = s.first() {
            out.push(GuardLit::Neq(a.clone(), a.clone()));
        }
    }
    out
}

/// RA expression for a CQ: join of its atoms projected on `attrs`.
pub fn cq_to_ra(q: &ConjunctiveQuery, attrs: &[Name]) -> RaExpr {
    let mut it = q.atoms.iter().map(|a| RaExpr::Base(a.clone()));
    let first = it.next().expect("queries have atoms");
    let joined = it.fold(first, RaExpr::join);
    if joined.attrs() == attrs {
        joined
    } else {
        RaExpr::project(joined, attrs.to_vec())
    }
}

/// Variables a disjunct fixes: its own, closed under the guard's
/// equalities, in view-variable order.
fn var_subset(v: &Dcq, d: &ConjunctiveQuery) -> Vec<Name> {
    let mut fixed: BTreeSet<&Name> = d.free.iter().collect();
    loop {
        let before = fixed.len();
        for l in &v.guard {
            if let GuardLit::Eq(a, b) = l {
                if fixed.contains(a) || fixed.contains(b) {
                    fixed.insert(a);
                    fixed.insert(b);
                }
            }
        }
        if fixed.len() == before {
            break;
        }
    }
    v.vars.iter().filter(|x| fixed.contains(x)).cloned().collect()
}

/// A disjunct over `s`; variables it only fixes through the guard are
/// domain columns pinned by the projected guard.
fn disjunct_to_ra(d: &ConjunctiveQuery, s: &[Name]) -> RaExpr {
    let own: Vec<Name> = s.iter().filter(|x| d.free.contains(x)).cloned().collect();
    let mut e = cq_to_ra(d, &own);
    for x in s.iter().filter(|x| !d.free.contains(x)) {
        e = RaExpr::join(e, RaExpr::Domain(x.clone()));
    }
    if e.attrs() == s {
        e
    } else {
        RaExpr::project(e, s.to_vec())
    }
}

fn guarded_union(v: &Dcq, s: &[Name]) -> RaExpr {
    let mut parts = v
        .disjuncts
        .iter()
        .filter(|d| var_subset(v, d) == s)
        .map(|d| disjunct_to_ra(d, s));
    let first = parts.next().expect("subset is realized");
    let union = parts.fold(first, RaExpr::union);
    let lits = project_guard(&v.guard, s);
    if lits.is_empty() {
        union
    } else {
        RaExpr::select(union, lits)
    }
}

/// Compile a DCQ view into one RA view per realized variable subset `S`:
/// the S-disjuncts minus the (domain-extended) disjuncts over strictly
/// smaller subsets.
pub fn compile_dcq_to_ra(view_name: &str, source: &str, v: &Dcq) -> Vec<View> {
    let mut subsets: Vec<Vec<Name>> = Vec::new();
    for d in &v.disjuncts {
        let s = var_subset(v, d);
        if !subsets.contains(&s) {
            subsets.push(s);
        }
    }
    let mut out = Vec::new();
    for s in &subsets {
        let mut expr = guarded_union(v, s);
        for smaller in subsets.iter().filter(|t| *t != s && t.iter().all(|x| s.contains(x))) {
            let mut ext = guarded_union(v, smaller);
            for x in s.iter().filter(|x| !smaller.contains(x)) {
                ext = RaExpr::join(ext, RaExpr::Domain(x.clone()));
            }
            let ext = if ext.attrs() == *s {
                ext
            } else {
                RaExpr::project(ext, s.clone())
            };
            expr = RaExpr::difference(expr, ext);
        }
        let vname = if s.is_empty() {
            format!("{view_name}_")
        } else {
            format!(
                "{view_name}_{}",
                s.iter().map(|x| &**x).collect::<Vec<_>>().join("_")
            )
        };
        out.push(View {
            name: name(&vname),
            source: name(source),
            def: ViewDef::Ra(expr),
        });
    }
    out
}
