use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::Rng;

use viewforge_core::canonical::{canonical_dview, canonical_view_query, source_atoms};
use viewforge_core::chase::{is_weakly_acyclic, replay, run_chase, satisfies, ChaseConfig};
use viewforge_core::homomorphism::{
    apply_all, cq_homomorphism, enumerate_matches, find_homomorphism, hom_equivalent, holds, Assignment,
};
use viewforge_core::minimize::{is_minimal, minimize};
use viewforge_core::model::{
    active_domain, build_canondb, name, validate_dschema, Atom, ConjunctiveQuery, DInstance, DSchema,
    ExistentialRule, Instance, Term,
};
use viewforge_core::oracle::{domain_elems, Universe};
use viewforge_core::random;
use viewforge_core::replication::{check_projections, str_iterate, str_transform, synchronous_product};

fn small_schema() -> DSchema {
    let mut s = DSchema::new();
    s.add_source("s");
    s.add_local("s", "A", 1).unwrap();
    s.add_local("s", "E", 2).unwrap();
    s
}

fn random_rule(rng: &mut impl Rng, k: usize) -> ExistentialRule {
    let vars = ["x", "y", "z"];
    let atom = |rng: &mut dyn rand::RngCore, pool: &[&str]| {
        if rng.gen_bool(0.4) {
            Atom::vars("A", &[pool[rng.gen_range(0..pool.len())]])
        } else {
            Atom::vars("E", &[pool[rng.gen_range(0..pool.len())], pool[rng.gen_range(0..pool.len())]])
        }
    };
    let body: Vec<Atom> = (0..rng.gen_range(1..=2)).map(|_| atom(rng, &vars[..2])).collect();
    let bvars: Vec<&str> = vars[..2]
        .iter()
        .copied()
        .filter(|v| body.iter().any(|a| a.args.contains(&Term::var(v))))
        .collect();
    // Heads use body variables plus possibly the existential z.
    let mut pool = bvars.clone();
    if rng.gen_bool(0.5) {
        pool.push("z");
    }
    let head = vec![atom(rng, &pool)];
    ExistentialRule::tgd(&format!("r{k}"), body, head).unwrap()
}

fn random_rules(seed: u64) -> Vec<ExistentialRule> {
    let mut rng = random::rng(seed);
    (0..rng.gen_range(1..=3)).map(|k| random_rule(&mut rng, k)).collect()
}

/// Every assignment of the query's variables into the active domain.
fn naive_matches(q: &ConjunctiveQuery, i: &Instance) -> BTreeSet<Vec<Term>> {
    let dom: Vec<Term> = active_domain(i).into_iter().collect();
    let vars = q.vars();
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; vars.len()];
    if dom.is_empty() && !vars.is_empty() {
        return out;
    }
    loop {
        let h: Assignment = vars
            .iter()
            .zip(&idx)
            .map(|(v, &k)| (Term::Var(v.clone()), dom[k].clone()))
            .collect();
        if apply_all(&h, &q.atoms).iter().all(|a| i.contains(a)) {
            out.insert(q.free.iter().map(|v| h[&Term::Var(v.clone())].clone()).collect());
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < dom.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Constants become variables so the instance can be a source.
fn as_query(i: &Instance) -> Vec<Atom> {
    i.iter()
        .map(|a| {
            a.map_terms(|t| match t {
                Term::Const(c) => Term::var(c),
                o => o.clone(),
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_agree_with_naive_enumeration(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let schema = small_schema();
        let q = random::random_cq(&mut rng, &schema, "Q", 3, 2);
        let k = rng.gen_range(1..=4);
        let i = random::random_instance(&mut rng, &schema, k, 0.35);
        prop_assert_eq!(enumerate_matches(&q, &i), naive_matches(&q, &i));
    }

    #[test]
    fn homomorphisms_compose(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let schema = small_schema();
        let a = random::random_instance(&mut rng, &schema, 3, 0.3);
        let b = random::random_instance(&mut rng, &schema, 3, 0.5);
        let c = random::random_instance(&mut rng, &schema, 2, 0.7);
        let src = as_query(&a);
        let mid = as_query(&b);
        if let (Some(h), Some(g)) = (
            find_homomorphism(&src, &b, &Assignment::new()),
            find_homomorphism(&mid, &c, &Assignment::new()),
        ) {
            // b's constants are g's variables.
            let g: Assignment = g
                .into_iter()
                .map(|(k, v)| match k {
                    Term::Var(x) => (Term::constant(&x), v),
                    o => (o, v),
                })
                .collect();
            let composed = apply_all(&g, apply_all(&h, &src).iter());
            prop_assert!(composed.iter().all(|f| c.contains(f)));
        }
    }

    #[test]
    fn chase_completes_on_weakly_acyclic_rules(seed in any::<u64>()) {
        let rules = random_rules(seed);
        prop_assume!(is_weakly_acyclic(&rules).unwrap().weakly_acyclic);
        let mut rng = random::rng(seed ^ 0x5eed);
        let start = random::random_instance(&mut rng, &small_schema(), 3, 0.3);
        prop_assume!(start.len() <= 10);
        let res = run_chase(&start, &rules, &ChaseConfig::default()).unwrap();
        let done = res.completed().expect("weakly acyclic chase completes");
        prop_assert!(satisfies(done, &rules));
        prop_assert_eq!(&replay(&start, &res.trace), done);
        let again = run_chase(&start, &rules, &ChaseConfig::default()).unwrap();
        prop_assert_eq!(again, res);
    }

    #[test]
    fn chase_result_is_universal(seed in any::<u64>()) {
        let rules = random_rules(seed);
        prop_assume!(is_weakly_acyclic(&rules).unwrap().weakly_acyclic);
        let mut rng = random::rng(seed ^ 0xc4a5e);
        let start = random::random_instance(&mut rng, &small_schema(), 2, 0.25);
        let chased = run_chase(&start, &rules, &ChaseConfig::default()).unwrap();
        let chased = chased.completed().unwrap().clone();
        let atoms: Vec<Atom> = chased.iter().cloned().collect();
        let dom: Vec<Term> = (1..=3).map(|k| Term::constant(&format!("e{k}"))).collect();
        let u = Universe::new(vec![(name("A"), 1), (name("E"), 2)], dom, 3);
        for j in u.instances() {
            if start.iter().all(|f| j.contains(f)) && satisfies(&j, &rules) {
                prop_assert!(find_homomorphism(&atoms, &j, &Assignment::new()).is_some(), "{j}");
            }
        }
    }

    #[test]
    fn minimization(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let schema = small_schema();
        let q = random::random_cq(&mut rng, &schema, "Q", 5, 1);
        let m = minimize(&q);
        prop_assert!(hom_equivalent(&q, &m));
        prop_assert!(is_minimal(&m).minimal);
        prop_assert!(m.atoms.len() <= q.atoms.len());
        // No endomorphism of a minimal query identifies two variables.
        let db = build_canondb(&m);
        let pinned: Assignment = m.free.iter().map(|v| (Term::Var(v.clone()), viewforge_core::model::canon_const(v))).collect();
        viewforge_core::homomorphism::for_each_homomorphism(&m.atoms, &db, &pinned, |h| {
            let images: BTreeSet<&Term> = h.values().collect();
            assert_eq!(images.len(), h.len(), "{m}: {h:?}");
            true
        });
    }

    #[test]
    fn synchronous_products_project(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let schema = small_schema();
        let a = random::random_instance(&mut rng, &schema, 3, 0.3);
        let b = random::random_instance(&mut rng, &schema, 2, 0.5);
        let prod = synchronous_product(&a, &b);
        prop_assert!(check_projections(&a, &b, &prod));
    }

    #[test]
    fn str_kills_secrets_and_keeps_the_query(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let (schema, q) = viewforge_core::fixtures::square();
        let p = random::random_cq(&mut rng, &schema, "p", 3, 0);
        let g = random::random_instance(&mut rng, &schema, 2, 0.5);
        let d = DInstance::distribute(&schema, &g);
        let n = rng.gen_range(1..=2);
        let dn = str_iterate(&d, &q, n);
        prop_assert!(validate_dschema(&schema, &dn).is_empty());
        prop_assert_eq!(holds(&q, &d.global()), holds(&q, &dn.global()));
        if cq_homomorphism(&p, &q).is_none() {
            prop_assert!(!holds(&p, &str_transform(&d, &q).global()));
        }
    }

    #[test]
    fn canonical_views_rewrite_the_query(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let schema = random::random_schema(&mut rng, random::SchemaShape::default());
        let q = random::random_cq(&mut rng, &schema, "Q", 4, 0);
        let v = canonical_dview(&q, &schema).unwrap();
        // Bodies cover the query, duplicating only replicated atoms.
        let mut covered: BTreeMap<Atom, usize> = BTreeMap::new();
        for s in schema.sources() {
            let mine: BTreeSet<Atom> = source_atoms(&q, s, &schema).into_iter().collect();
            for a in mine {
                *covered.entry(a).or_default() += 1;
            }
        }
        for a in &q.atoms {
            let k = covered.get(a).copied().unwrap_or(0);
            let replicated = schema.relation(&a.rel).unwrap().is_replicated();
            prop_assert!(k >= 1 && (k == 1 || replicated));
        }
        // Q holds iff the canonical views join.
        let i = random::random_instance(&mut rng, &schema, 2, 0.4);
        let mut joined = Vec::new();
        for view in &v.views {
            let c = canonical_view_query(&q, &view.source, &schema).unwrap();
            joined.extend(c.atoms.iter().cloned());
        }
        let rewrite = ConjunctiveQuery::new("J", &[], joined).unwrap();
        prop_assert_eq!(holds(&q, &i), holds(&rewrite, &i));
    }
}

#[test]
fn canonical_databases_are_stable() {
    let (_, q) = viewforge_core::fixtures::square();
    assert_eq!(build_canondb(&q), build_canondb(&q.clone()));
    let mut t = Term::constant("a");
    for h in 0..5 {
        assert_eq!(t.pair_height(), h);
        t = Term::pair(t.clone(), Term::constant("b"));
    }
    assert_eq!(domain_elems(3).len(), 3);
}
