//! Brute-force ground truth over small instances: bounded enumeration,
//! exact (s,Q)-equivalence through canonical contexts, determinacy
//! refutation and a bounded disclosure search.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use crate::canonical::{canonical_context, canonical_view_query, CanonicalError};
use crate::chase::satisfies;
use crate::homomorphism::{enumerate_matches, holds, holds_at};
use crate::model::{
    active_domain, canon_const, Atom, ConjunctiveQuery, DSchema, DView, ExistentialRule, Instance, Name, Term, View,
    ViewDef,
};
use crate::ra::{eval_dcq, eval_ra_in};

/// Element `d<k>` of an enumeration domain.
pub fn domain_elem(k: usize) -> Term {
    Term::constant(&format!("d{k}"))
}

pub fn domain_elems(k: usize) -> Vec<Term> {
    (1..=k).map(domain_elem).collect()
}

/// Fresh padding elements `f<k>`, outside every enumeration domain.
pub fn fresh_elems(n: usize) -> Vec<Term> {
    (1..=n).map(|k| Term::constant(&format!("f{k}"))).collect()
}

fn tuples(domain: &[Term], arity: usize) -> Vec<Vec<Term>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                domain.iter().map(move |d| {
                    let mut t = t.clone();
                    t.push(d.clone());
                    t
                })
            })
            .collect();
    }
    out
}

/// Subsets of `n` facts with at most `m` elements, by size then
/// lexicographically.
fn bounded_subsets(n: usize, m: usize) -> Vec<u64> {
    assert!(n <= 64, "at most 64 facts per relation");
    let mut out = Vec::new();
    fn combos(start: usize, n: usize, left: usize, acc: u64, out: &mut Vec<u64>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for k in start..n {
            combos(k + 1, n, left - 1, acc | (1u64 << k), out);
        }
    }
    for size in 0..=m.min(n) {
        combos(0, n, size, 0, &mut out);
    }
    out
}

/// All facts over a fixed relation list and domain, with the bounded
/// subsets of every relation.
#[derive(Debug, Clone)]
pub struct Universe {
    pub relations: Vec<(Name, usize)>,
    pub domain: Vec<Term>,
    pub facts: Vec<Vec<Atom>>,
    pub subsets: Vec<Vec<u64>>,
}

impl Universe {
    pub fn new(relations: Vec<(Name, usize)>, domain: Vec<Term>, max_facts: usize) -> Universe {
        let facts: Vec<Vec<Atom>> = relations
            .iter()
            .map(|(r, a)| tuples(&domain, *a).into_iter().map(|t| Atom::new(r, t)).collect())
            .collect();
        let subsets = facts.iter().map(|f| bounded_subsets(f.len(), max_facts)).collect();
        Universe {
            relations,
            domain,
            facts,
            subsets,
        }
    }

    /// Relations visible at `source`, or all relations.
    pub fn for_schema(schema: &DSchema, source: Option<&str>, k: usize, max_facts: usize) -> Universe {
        let rels = schema
            .relations()
            .filter(|r| source.is_none_or(|s| r.visible_at(s)))
            .map(|r| (r.name.clone(), r.arity))
            .collect();
        Universe::new(rels, domain_elems(k), max_facts)
    }

    pub fn count(&self) -> u128 {
        self.subsets.iter().map(|s| s.len() as u128).product()
    }

    pub fn relation_index(&self, rel: &str) -> Option<usize> {
        self.relations.iter().position(|(r, _)| &**r == rel)
    }

    fn add_relation(&self, k: usize, mask: u64, out: &mut Instance) {
        for (j, f) in self.facts[k].iter().enumerate() {
            if mask >> j & 1 == 1 {
                out.insert(f.clone());
            }
        }
    }

    /// The instance selected by one subset index per relation.
    pub fn instance(&self, idx: &[usize]) -> Instance {
        let mut out = Instance::new();
        for (k, &i) in idx.iter().enumerate() {
            self.add_relation(k, self.subsets[k][i], &mut out);
        }
        out
    }

    /// Only the listed relations of the selected instance.
    pub fn sub_instance(&self, idx: &[usize], rels: &[usize]) -> Instance {
        let mut out = Instance::new();
        for &k in rels {
            self.add_relation(k, self.subsets[k][idx[k]], &mut out);
        }
        out
    }

    /// Index tuples in lexicographic order, the first relation most
    /// significant.
    pub fn indices(&self) -> IndexIter<'_> {
        IndexIter {
            sizes: self.subsets.iter().map(|s| s.len()).collect(),
            next: if self.subsets.iter().all(|s| !s.is_empty()) {
                Some(vec![0; self.subsets.len()])
            } else {
                None
            },
            _u: std::marker::PhantomData,
        }
    }

    pub fn instances(&self) -> impl Iterator<Item = Instance> + '_ {
        self.indices().map(move |idx| self.instance(&idx))
    }
}

pub struct IndexIter<'a> {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
    _u: std::marker::PhantomData<&'a ()>,
}

impl Iterator for IndexIter<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut n = cur.clone();
        let mut k = n.len();
        loop {
            if k == 0 {
                self.next = None;
                break;
            }
            k -= 1;
            n[k] += 1;
            if n[k] < self.sizes[k] {
                self.next = Some(n);
                break;
            }
            n[k] = 0;
        }
        Some(cur)
    }
}

/// Instances over `{d1..dk}` with at most `max_facts` facts per relation
/// that satisfy `rules`, in lexicographic order.
pub fn enumerate_instances<'a>(
    schema: &DSchema,
    source: Option<&str>,
    k: usize,
    max_facts: usize,
    rules: &'a [ExistentialRule],
) -> impl Iterator<Item = Instance> + 'a {
    let u = Universe::for_schema(schema, source, k, max_facts);
    let all: Vec<Vec<usize>> = u.indices().collect();
    all.into_iter()
        .map(move |idx| u.instance(&idx))
        .filter(move |i| satisfies(i, rules))
}

/// Dense ids for hashable values.
#[derive(Debug, Default)]
pub struct Interner<T: Hash + Eq> {
    ids: HashMap<T, u32>,
}

impl<T: Hash + Eq> Interner<T> {
    pub fn new() -> Self {
        Interner { ids: HashMap::new() }
    }

    pub fn id(&mut self, v: T) -> u32 {
        let n = self.ids.len() as u32;
        *self.ids.entry(v).or_insert(n)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Output of any view on an instance, with `domain` standing for the
/// evaluation domain of unsafe and domain-reading definitions.
pub fn view_output(view: &View, i: &Instance, domain: &BTreeSet<Term>) -> BTreeSet<Vec<Term>> {
    match &view.def {
        ViewDef::Cq(q) => enumerate_matches(q, i),
        ViewDef::Dcq(d) => eval_dcq(d, i, domain),
        ViewDef::Ra(e) => eval_ra_in(e, i, domain).map(|r| r.rows).unwrap_or_default(),
    }
}

pub fn max_arity(v: &DView) -> usize {
    v.views.iter().map(|w| w.arity()).max().unwrap_or(0)
}

/// `adom(i1) ∪ adom(i2)` plus one fresh element per view position.
pub fn padded_domain(v: &DView, i1: &Instance, i2: &Instance) -> BTreeSet<Term> {
    let mut d = active_domain(i1);
    d.extend(active_domain(i2));
    d.extend(fresh_elems(max_arity(v)));
    d
}

/// Equal images on every view under the padded evaluation domain.
pub fn views_agree(v: &DView, d1: &Instance, d2: &Instance) -> bool {
    let dom = padded_domain(v, d1, d2);
    v.views
        .iter()
        .all(|w| view_output(w, d1, &dom) == view_output(w, d2, &dom))
}

/// A canonical context that separates two source instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWitness {
    /// The context was built from a match on the first instance.
    pub from_first: bool,
    pub binding: Vec<(Name, Term)>,
    pub context: Instance,
}

/// Exact (s,Q)-equivalence of two instances of `source`: every canonical
/// context built from a match on one side must complete a match of `q`
/// on the other.
pub fn sq_equivalence_exact(
    i1: &Instance,
    i2: &Instance,
    q: &ConjunctiveQuery,
    source: &str,
    schema: &DSchema,
) -> Result<Option<ContextWitness>, CanonicalError> {
    let canonv = match canonical_view_query(q, source, schema) {
        Ok(c) => c,
        Err(CanonicalError::EmptySourceBody(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let ctx = canonical_context(q, source, schema)?;
    let qb = q.boolean_closure();
    for (from_first, a, b) in [(true, i1, i2), (false, i2, i1)] {
        for tuple in enumerate_matches(&canonv, a) {
            let binding: BTreeMap<Name, Term> = canonv.free.iter().cloned().zip(tuple).collect();
            let context: Instance = ctx
                .atoms
                .iter()
                .map(|at| {
                    at.map_terms(|t| match t {
                        Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| canon_const(v)),
                        other => other.clone(),
                    })
                })
                .collect();
            if !holds(&qb, &b.union(&context)) {
                return Ok(Some(ContextWitness {
                    from_first,
                    binding: binding.into_iter().collect(),
                    context,
                }));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub domain_size: usize,
    pub max_facts: usize,
}

/// Two instances with equal view images and different query answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminacyCounterexample {
    pub first: Instance,
    pub second: Instance,
}

/// Search for a pair of instances over `{d1..dk}` that the views cannot
/// tell apart but the query can. Images are taken over the fixed domain
/// plus fresh padding, which by genericity is the same as the pairwise
/// padded domain.
pub fn refute_determinacy(
    q: &ConjunctiveQuery,
    v: &DView,
    schema: &DSchema,
    bounds: Bounds,
    rules: &[ExistentialRule],
) -> Option<DeterminacyCounterexample> {
    let u = Universe::for_schema(schema, None, bounds.domain_size, bounds.max_facts);
    let mut dom: BTreeSet<Term> = u.domain.iter().cloned().collect();
    dom.extend(fresh_elems(max_arity(v)));
    let view_rels: Vec<Vec<usize>> = v
        .views
        .iter()
        .map(|w| {
            let rels: BTreeSet<Name> = match &w.def {
                ViewDef::Cq(c) => c.relations(),
                ViewDef::Dcq(d) => d.relations(),
                ViewDef::Ra(e) => e.relations(),
            };
            rels.iter().filter_map(|r| u.relation_index(r)).collect()
        })
        .collect();
    let mut memo: Vec<HashMap<Vec<usize>, u32>> = vec![HashMap::new(); v.views.len()];
    let mut outputs: Interner<BTreeSet<Vec<Term>>> = Interner::new();
    type Seen = HashMap<Vec<u32>, (BTreeSet<Vec<Term>>, Vec<usize>)>;
    let mut seen: Seen = HashMap::new();
    for idx in u.indices() {
        let inst = u.instance(&idx);
        if !satisfies(&inst, rules) {
            continue;
        }
        let mut key = Vec::with_capacity(v.views.len());
        for (k, w) in v.views.iter().enumerate() {
            let sub: Vec<usize> = view_rels[k].iter().map(|&r| idx[r]).collect();
            let id = match memo[k].get(&sub) {
                Some(&id) => id,
                None => {
                    let out = view_output(w, &u.sub_instance(&idx, &view_rels[k]), &dom);
                    let id = outputs.id(out);
                    memo[k].insert(sub, id);
                    id
                }
            };
            key.push(id);
        }
        let answer = enumerate_matches(q, &inst);
        match seen.get(&key) {
            Some((a, first)) if *a != answer => {
                return Some(DeterminacyCounterexample {
                    first: u.instance(first),
                    second: inst,
                })
            }
            Some(_) => {}
            None => {
                seen.insert(key, (answer, idx));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleDisclosure {
    /// Every instance found with the witness's view image satisfies the
    /// secret at `tuple`.
    Disclosing { witness: Instance, tuple: Vec<Term> },
    NoWitnessUpToBound { candidates: usize },
}

impl OracleDisclosure {
    pub fn is_disclosing(&self) -> bool {
        matches!(self, OracleDisclosure::Disclosing { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisclosureBounds {
    /// Domain of candidate witnesses.
    pub witness_domain: usize,
    /// Domain of the alternative instances, containing the witness domain.
    pub alt_domain: usize,
    /// Facts per relation in brute-force enumeration.
    pub max_facts: usize,
}

impl Default for DisclosureBounds {
    fn default() -> Self {
        DisclosureBounds {
            witness_domain: 1,
            alt_domain: 3,
            max_facts: 3,
        }
    }
}

/// Search for an alternative to `target` among CQ views: same images, the
/// secret false at `tuple`. Every constraint but "each target tuple is
/// produced" is closed under subsets, so branches are cut as soon as one
/// fails and when even all remaining addable facts cannot produce the
/// target.
fn cq_alternative_exists(
    views: &[&ConjunctiveQuery],
    target: &[BTreeSet<Vec<Term>>],
    p: &ConjunctiveQuery,
    tuple: &[Term],
    facts: &[Atom],
) -> bool {
    let closed_ok = |i: &Instance| {
        !holds_at(p, i, tuple)
            && views
                .iter()
                .zip(target)
                .all(|(q, t)| enumerate_matches(q, i).is_subset(t))
    };
    let produces = |i: &Instance| {
        views
            .iter()
            .zip(target)
            .all(|(q, t)| t.is_subset(&enumerate_matches(q, i)))
    };
    fn go(
        k: usize,
        cur: &mut Instance,
        facts: &[Atom],
        closed_ok: &dyn Fn(&Instance) -> bool,
        produces: &dyn Fn(&Instance) -> bool,
    ) -> bool {
        let mut bound = cur.clone();
        for f in &facts[k..] {
            cur.insert(f.clone());
            if closed_ok(cur) {
                bound.insert(f.clone());
            }
            cur.remove(f);
        }
        if !produces(&bound) {
            return false;
        }
        if k == facts.len() {
            return true;
        }
        cur.insert(facts[k].clone());
        if closed_ok(cur) && go(k + 1, cur, facts, closed_ok, produces) {
            return true;
        }
        cur.remove(&facts[k]);
        go(k + 1, cur, facts, closed_ok, produces)
    }
    let mut cur = Instance::new();
    closed_ok(&cur) && go(0, &mut cur, facts, &closed_ok, &produces)
}

/// Bounded search for a disclosure witness: an instance satisfying the
/// secret at some tuple such that every alternative with the same view
/// image satisfies it too. Never claims non-disclosure.
pub fn check_un_disclosure_oracle(
    v: &DView,
    p: &ConjunctiveQuery,
    schema: &DSchema,
    rules: &[ExistentialRule],
    bounds: DisclosureBounds,
) -> OracleDisclosure {
    let witness_u = Universe::for_schema(schema, None, bounds.witness_domain, usize::MAX);
    let alt_u = Universe::for_schema(schema, None, bounds.alt_domain.max(bounds.witness_domain), bounds.max_facts);
    let all_facts: Vec<Atom> = Universe::for_schema(schema, None, bounds.alt_domain.max(bounds.witness_domain), 0)
        .facts
        .into_iter()
        .flatten()
        .collect();
    let cq_views: Option<Vec<&ConjunctiveQuery>> = v.views.iter().map(|w| w.as_cq()).collect();
    let mut dom: BTreeSet<Term> = alt_u.domain.iter().cloned().collect();
    dom.extend(fresh_elems(max_arity(v)));
    let image = |i: &Instance| -> Vec<BTreeSet<Vec<Term>>> { v.views.iter().map(|w| view_output(w, i, &dom)).collect() };
    let mut candidates = 0;
    for witness in witness_u.instances() {
        if !satisfies(&witness, rules) {
            continue;
        }
        for tuple in enumerate_matches(p, &witness) {
            candidates += 1;
            let target = image(&witness);
            let escapes = match (&cq_views, rules.is_empty()) {
                (Some(cqs), true) => cq_alternative_exists(cqs, &target, p, &tuple, &all_facts),
                _ => alt_u
                    .instances()
                    .any(|alt| satisfies(&alt, rules) && !holds_at(p, &alt, &tuple) && image(&alt) == target),
            };
            if !escapes {
                return OracleDisclosure::Disclosing { witness, tuple };
            }
        }
    }
    OracleDisclosure::NoWitnessUpToBound { candidates }
}
