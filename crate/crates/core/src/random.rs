//! Seeded generators of small schemas, queries, views and instances.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::model::{Atom, ConjunctiveQuery, DSchema, DView, Instance, Term, View};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct SchemaShape {
    pub max_sources: usize,
    pub max_relations: usize,
    pub max_arity: usize,
    /// Allow one relation replicated across two sources.
    pub replication: bool,
}

impl Default for SchemaShape {
    fn default() -> Self {
        SchemaShape {
            max_sources: 2,
            max_relations: 3,
            max_arity: 2,
            replication: true,
        }
    }
}

const REL_NAMES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];
const VAR_NAMES: [&str; 6] = ["x", "y", "z", "u", "v", "w"];

pub fn random_schema(rng: &mut impl Rng, shape: SchemaShape) -> DSchema {
    let n_src = rng.gen_range(1..=shape.max_sources.max(1));
    let mut s = DSchema::new();
    let srcs: Vec<String> = (0..n_src).map(|k| format!("s{k}")).collect();
    for src in &srcs {
        s.add_source(src);
    }
    let n_rel = rng.gen_range(n_src..=shape.max_relations.max(n_src)).min(REL_NAMES.len());
    let mut replicated = false;
    for (k, rel) in REL_NAMES.iter().take(n_rel).enumerate() {
        let arity = rng.gen_range(1..=shape.max_arity.max(1));
        if shape.replication && n_src >= 2 && !replicated && k >= n_src && rng.gen_bool(0.3) {
            let members: Vec<&str> = srcs.iter().take(2).map(|x| x.as_str()).collect();
            s.add_replicated(rel, arity, &members).unwrap();
            replicated = true;
        } else {
            // The first relations land one per source so no source is empty.
            let src = if k < n_src { &srcs[k] } else { srcs.choose(rng).unwrap() };
            s.add_local(src, rel, arity).unwrap();
        }
    }
    s
}

fn random_atoms(rng: &mut impl Rng, rels: &[(String, usize)], n_atoms: usize, n_vars: usize) -> Vec<Atom> {
    (0..n_atoms)
        .map(|_| {
            let (r, a) = rels.choose(rng).unwrap();
            let args = (0..*a)
                .map(|_| Term::var(VAR_NAMES[rng.gen_range(0..n_vars)]))
                .collect();
            Atom::new(r, args)
        })
        .collect()
}

fn relations_of(schema: &DSchema, source: Option<&str>) -> Vec<(String, usize)> {
    schema
        .relations()
        .filter(|r| source.is_none_or(|s| r.visible_at(s)))
        .map(|r| (r.name.to_string(), r.arity))
        .collect()
}

/// A CQ with up to `max_atoms` atoms over the schema, with up to
/// `max_free` free variables.
pub fn random_cq(rng: &mut impl Rng, schema: &DSchema, qname: &str, max_atoms: usize, max_free: usize) -> ConjunctiveQuery {
    let rels = relations_of(schema, None);
    let n_atoms = rng.gen_range(1..=max_atoms.max(1));
    let n_vars = rng.gen_range(1..=VAR_NAMES.len().min(n_atoms * 2));
    let atoms = random_atoms(rng, &rels, n_atoms, n_vars);
    let mut vars = crate::model::vars_in_order(&atoms);
    vars.shuffle(rng);
    let n_free = rng.gen_range(0..=max_free.min(vars.len()));
    let free: Vec<&str> = vars[..n_free].iter().map(|v| &**v).collect();
    ConjunctiveQuery::new(qname, &free, atoms).unwrap()
}

/// Up to `max_per_source` CQ views per source with at most `max_atoms`
/// atoms each.
pub fn random_views(rng: &mut impl Rng, schema: &DSchema, max_per_source: usize, max_atoms: usize) -> DView {
    let mut views = Vec::new();
    for s in schema.sources() {
        let rels = relations_of(schema, Some(s));
        if rels.is_empty() {
            continue;
        }
        for _ in 0..rng.gen_range(0..=max_per_source) {
            let vname = format!("V{}", views.len());
            let n_atoms = rng.gen_range(1..=max_atoms.max(1));
            let n_vars = rng.gen_range(1..=VAR_NAMES.len().min(n_atoms * 2));
            let atoms = random_atoms(rng, &rels, n_atoms, n_vars);
            let vars = crate::model::vars_in_order(&atoms);
            let free: Vec<&str> = vars.iter().filter(|_| rng.gen_bool(0.5)).map(|v| &**v).collect();
            let q = ConjunctiveQuery::new(&vname, &free, atoms).unwrap();
            views.push(View::cq(&vname, s, q));
        }
    }
    DView::new("random", views)
}

/// Each possible fact over `{e1..ek}` kept with probability `density`.
pub fn random_instance(rng: &mut impl Rng, schema: &DSchema, k: usize, density: f64) -> Instance {
    let dom: Vec<Term> = (1..=k).map(|i| Term::constant(&format!("e{i}"))).collect();
    let mut out = Instance::new();
    for r in schema.relations() {
        let u = crate::oracle::Universe::new(vec![(r.name.clone(), r.arity)], dom.clone(), 0);
        for f in &u.facts[0] {
            if rng.gen_bool(density) {
                out.insert(f.clone());
            }
        }
    }
    out
}
