use viewforge_core::fixtures;
use viewforge_core::model::{ConjunctiveQuery, DSchema, DView, Instance};
use viewforge_core::oracle::{domain_elems, enumerate_instances, sq_equivalence_exact, views_agree};
use viewforge_core::random;
use viewforge_core::shuffle::{
    build_shuffle_views, shuffle_dview, shuffle_equivalent, ShuffleConfig, ShuffleEquivalence,
};
use viewforge_core::Tri;

fn source_views(q: &ConjunctiveQuery, schema: &DSchema, source: &str) -> DView {
    let all = build_shuffle_views(q, schema, &[], &ShuffleConfig::default()).unwrap();
    let mine: Vec<_> = all.into_iter().filter(|v| &*v.source == source).collect();
    shuffle_dview(&mine)
}

/// Shuffle equivalence, exact context equivalence and agreement of the
/// shuffle views coincide on every pair of instances given.
fn assert_three_way(q: &ConjunctiveQuery, schema: &DSchema, source: &str, insts: &[Instance]) -> usize {
    let views = source_views(q, schema, source);
    let mut separated = 0;
    for (a, i1) in insts.iter().enumerate() {
        for i2 in &insts[a..] {
            let ShuffleEquivalence { verdict, witness } =
                shuffle_equivalent(i1, i2, q, source, schema, &[], &ShuffleConfig::default()).unwrap();
            let exact = sq_equivalence_exact(i1, i2, q, source, schema).unwrap().is_none();
            let agree = views_agree(&views, i1, i2);
            assert_eq!(verdict, Tri::from(exact), "{i1} vs {i2}");
            assert_eq!(agree, exact, "{i1} vs {i2}");
            assert_eq!(witness.is_none(), exact);
            separated += usize::from(!exact);
        }
    }
    separated
}

#[test]
fn es_symmetric_exhaustive_domain_three() {
    let (schema, q) = fixtures::es_symmetric();
    let insts: Vec<Instance> = enumerate_instances(&schema, Some("s1"), 3, 3, &[]).collect();
    assert_eq!(insts.len(), 130);
    let separated = assert_three_way(&q, &schema, "s1", &insts);
    assert!(separated > 0);
    // E(a,b) and E(b,a) are indistinguishable; E(a,a) is not like E(a,b).
    let d = domain_elems(2);
    let e = |x: usize, y: usize| -> Instance {
        [viewforge_core::model::Atom::new("E", vec![d[x].clone(), d[y].clone()])]
            .into_iter()
            .collect()
    };
    let sc = ShuffleConfig::default();
    assert_eq!(shuffle_equivalent(&e(0, 1), &e(1, 0), &q, "s1", &schema, &[], &sc).unwrap().verdict, Tri::Yes);
    assert_eq!(shuffle_equivalent(&e(0, 0), &e(0, 1), &q, "s1", &schema, &[], &sc).unwrap().verdict, Tri::No);
}

#[test]
fn es_symmetric_unary_side() {
    let (schema, q) = fixtures::es_symmetric();
    let insts: Vec<Instance> = enumerate_instances(&schema, Some("s2"), 3, 3, &[]).collect();
    assert_three_way(&q, &schema, "s2", &insts);
}

#[test]
fn example_one_hospital_side() {
    let (schema, q) = fixtures::example_one();
    let q = q.boolean_closure();
    let insts: Vec<Instance> = enumerate_instances(&schema, Some("hospital"), 2, 2, &[]).collect();
    assert!(assert_three_way(&q, &schema, "hospital", &insts) > 0);
}

#[test]
fn random_boolean_queries() {
    let mut pairs = 0;
    for seed in 0..30u64 {
        let mut rng = random::rng(1000 + seed);
        let shape = random::SchemaShape {
            replication: false,
            ..Default::default()
        };
        let schema = random::random_schema(&mut rng, shape);
        let q = random::random_cq(&mut rng, &schema, "Q", 4, 0);
        for s in schema.sources().to_vec() {
            let insts: Vec<Instance> = (0..8)
                .map(|_| {
                    let i = random::random_instance(&mut rng, &schema, 2, 0.4);
                    i.restrict(|r| schema.relation(r).is_some_and(|x| x.visible_at(&s)))
                })
                .collect();
            assert_three_way(&q, &schema, &s, &insts);
            pairs += insts.len() * (insts.len() + 1) / 2;
        }
    }
    assert!(pairs > 0);
}

#[test]
fn non_boolean_queries_are_rejected() {
    let (schema, q) = fixtures::example_one();
    assert!(build_shuffle_views(&q, &schema, &[], &ShuffleConfig::default()).is_err());
}
