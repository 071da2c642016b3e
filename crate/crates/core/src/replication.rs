//! Synchronous products and the `Str` transformation for queries over a
//! fully replicated relation.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::disclosure::critical_instance;
use crate::homomorphism::{cq_homomorphism, find_homomorphism, holds, Assignment};
use crate::model::{build_canondb, ConjunctiveQuery, DInstance, DSchema, Instance, Name, Placement, SourceId, Term};

/// Facts `R((x1,y1), ..., (xn,yn))` for `R(x) ∈ i1` and `R(y) ∈ i2`.
pub fn synchronous_product(i1: &Instance, i2: &Instance) -> Instance {
    let mut out = Instance::new();
    for rel in i1.relations() {
        for a in i1.facts_of(&rel) {
            for b in i2.facts_of(&rel) {
                if a.arity() != b.arity() {
                    continue;
                }
                out.insert(crate::model::Atom {
                    rel: rel.clone(),
                    args: a
                        .args
                        .iter()
                        .zip(&b.args)
                        .map(|(x, y)| Term::pair(x.clone(), y.clone()))
                        .collect(),
                });
            }
        }
    }
    out
}

fn project(i: &Instance, left: bool) -> Instance {
    i.map_terms(|t| match t {
        Term::Pair(p) if left => p.0.clone(),
        Term::Pair(p) => p.1.clone(),
        other => other.clone(),
    })
}

/// Both component projections of `prod` are homomorphisms into the factors.
pub fn check_projections(i1: &Instance, i2: &Instance, prod: &Instance) -> bool {
    let top_pairs = prod.iter().all(|a| a.args.iter().all(|t| matches!(t, Term::Pair(_))));
    top_pairs
        && project(prod, true).iter().all(|a| i1.contains(a))
        && project(prod, false).iter().all(|a| i2.contains(a))
}

/// Replace every source's instance by its product with `canondb(q)`.
pub fn str_transform(d: &DInstance, q: &ConjunctiveQuery) -> DInstance {
    let canon = build_canondb(q);
    DInstance {
        parts: d
            .parts
            .iter()
            .map(|(s, i)| (s.clone(), synchronous_product(i, &canon)))
            .collect(),
    }
}

pub fn str_iterate(d: &DInstance, q: &ConjunctiveQuery, n: usize) -> DInstance {
    let mut cur = d.clone();
    for _ in 0..n {
        cur = str_transform(&cur, q);
    }
    cur
}

/// Minimal pair height over elements of replicated relations; `None` when
/// they are all empty.
pub fn min_replicated_pair_height(d: &DInstance, schema: &DSchema) -> Option<usize> {
    let g = d.global();
    schema
        .relations()
        .filter(|r| r.is_replicated())
        .flat_map(|r| g.facts_of(&r.name).flat_map(|a| a.args.iter().map(|t| t.pair_height())).collect::<Vec<_>>())
        .min()
}

/// Relations of non-zero arity replicated across every source.
pub fn fully_replicated_in(q: &ConjunctiveQuery, schema: &DSchema) -> Vec<Name> {
    let all = schema.sources().len();
    schema
        .relations()
        .filter(|r| {
            r.arity > 0
                && q.relations().contains(&r.name)
                && matches!(&r.placement, Placement::Replicated(m) if m.len() == all)
        })
        .map(|r| r.name.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The second instance is an iterate of the first.
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrEquivalence {
    /// Per source: iterate count and direction, when related.
    pub per_source: Vec<(String, Option<(usize, Direction)>)>,
    pub global: Option<(usize, Direction)>,
    /// Per-source and global relations coincide, checked when the first
    /// instance satisfies the query.
    pub coincide: Option<bool>,
}

impl StrEquivalence {
    pub fn all_sources(&self) -> bool {
        self.per_source.iter().all(|(_, r)| r.is_some())
    }
}

fn related<T: PartialEq>(a: &T, b: &T, iter: impl Fn(&T, usize) -> T, max_iter: usize) -> Option<(usize, Direction)> {
    for i in 0..=max_iter {
        if &iter(a, i) == b {
            return Some((i, Direction::Forward));
        }
        if &iter(b, i) == a {
            return Some((i, Direction::Backward));
        }
    }
    None
}

pub fn str_equivalent(
    d: &DInstance,
    d2: &DInstance,
    q: &ConjunctiveQuery,
    schema: &DSchema,
    max_iter: usize,
) -> StrEquivalence {
    let canon = build_canondb(q);
    let iter_local = |i: &Instance, n: usize| {
        let mut cur = i.clone();
        for _ in 0..n {
            cur = synchronous_product(&cur, &canon);
        }
        cur
    };
    let per_source: Vec<(String, Option<(usize, Direction)>)> = schema
        .sources()
        .iter()
        .map(|s| (s.to_string(), related(&d.part(s), &d2.part(s), iter_local, max_iter)))
        .collect();
    let global = related(d, d2, |x, n| str_iterate(x, q, n), max_iter);
    let coincide = holds(q, &d.global()).then(|| per_source.iter().all(|(_, r)| r.is_some()) == global.is_some());
    StrEquivalence {
        per_source,
        global,
        coincide,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullRepDemo {
    pub iterates: Vec<DInstance>,
    pub projections_ok: bool,
    /// The secret holds on the sample and fails on every later iterate.
    pub secret_killed: bool,
    pub query_preserved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FullRepVerdict {
    Applicable { relation: Name, description: String, demo: FullRepDemo },
    NotApplicable { reason: String, homomorphism: Option<Assignment> },
}

/// Is the `Str`-based design available for `q` and secret `p`?
pub fn fullrep_design(q: &ConjunctiveQuery, p: &ConjunctiveQuery, schema: &DSchema) -> FullRepVerdict {
    let reps = fully_replicated_in(q, schema);
    let Some(rel) = reps.first().cloned() else {
        return FullRepVerdict::NotApplicable {
            reason: "no relation of the query is replicated across every source".into(),
            homomorphism: None,
        };
    };
    if let Some(h) = cq_homomorphism(p, q) {
        return FullRepVerdict::NotApplicable {
            reason: "the secret maps homomorphically into the query".into(),
            homomorphism: Some(h),
        };
    }
    let d0 = critical_instance(schema);
    let iterates: Vec<DInstance> = (0..3).map(|n| str_iterate(&d0, q, n)).collect();
    let canon = build_canondb(q);
    let projections_ok = iterates.windows(2).all(|w| {
        w[0].parts
            .iter()
            .all(|(s, i)| check_projections(i, &canon, &w[1].part(s)))
    });
    let secret_killed = holds(p, &iterates[0].global()) && iterates[1..].iter().all(|d| !holds(p, &d.global()));
    let q0 = holds(q, &iterates[0].global());
    let query_preserved = iterates.iter().all(|d| holds(q, &d.global()) == q0);
    let description = format!(
        "each source's instances are equivalent when one is an iterated product of the other with canondb({}); \
         the replicated relation {rel} keeps the iterate count aligned across sources",
        q.name
    );
    FullRepVerdict::Applicable {
        relation: rel,
        description,
        demo: FullRepDemo {
            iterates,
            projections_ok,
            secret_killed,
            query_preserved,
        },
    }
}

/// Lift a match of `q` on `d` to its `Str` image: `x ↦ (h(x), c_x)`.
pub fn lift_match(q: &ConjunctiveQuery, h: &Assignment) -> Assignment {
    h.iter()
        .map(|(k, v)| match k {
            Term::Var(x) => (k.clone(), Term::pair(v.clone(), crate::model::canon_const(x))),
            _ => (k.clone(), v.clone()),
        })
        .filter(|(k, _)| k.as_var().is_some_and(|x| q.vars().contains(x)))
        .collect()
}

/// Match of `q` on the global instance, if any.
pub fn global_match(q: &ConjunctiveQuery, d: &DInstance) -> Option<Assignment> {
    find_homomorphism(&q.atoms, &d.global(), &Assignment::new())
}

/// Per-source part sizes, for reports.
pub fn part_sizes(d: &DInstance) -> BTreeMap<SourceId, usize> {
    d.parts.iter().map(|(s, i)| (s.clone(), i.len())).collect()
}
