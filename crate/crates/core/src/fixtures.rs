//! Small schemas and queries used throughout the test suites and the CLI
//! demos.

use crate::model::{name, Atom, ConjunctiveQuery, Dcq, DSchema, DView, View};

/// Treatments at a hospital, demographics at a registry, joined on `pid`.
pub fn example_one() -> (DSchema, ConjunctiveQuery) {
    let mut s = DSchema::new();
    s.add_source("hospital");
    s.add_source("registry");
    s.add_local("hospital", "Trtmnt", 3).unwrap();
    s.add_local("registry", "Patient", 3).unwrap();
    let q = ConjunctiveQuery::new(
        "Q",
        &["tinfo", "age"],
        vec![
            Atom::vars("Trtmnt", &["pid", "tinfo", "tdate"]),
            Atom::vars("Patient", &["pid", "age", "address"]),
        ],
    )
    .unwrap();
    (s, q)
}

/// Secret of the hospital example: which patients had which treatment.
pub fn example_one_secret() -> ConjunctiveQuery {
    ConjunctiveQuery::new(
        "p",
        &["pid", "tinfo"],
        vec![Atom::vars("Trtmnt", &["pid", "tinfo", "tdate"])],
    )
    .unwrap()
}

/// Sources `P` and `S` with eponymous binary relations and a binary `T`
/// replicated across both, plus the four-cycle query over them.
pub fn square() -> (DSchema, ConjunctiveQuery) {
    let mut s = DSchema::new();
    s.add_source("P");
    s.add_source("S");
    s.add_local("P", "P", 2).unwrap();
    s.add_local("S", "S", 2).unwrap();
    s.add_replicated("T", 2, &["P", "S"]).unwrap();
    let q = ConjunctiveQuery::new(
        "Q",
        &[],
        vec![
            Atom::vars("T", &["x", "y"]),
            Atom::vars("S", &["y", "z"]),
            Atom::vars("T", &["z", "w"]),
            Atom::vars("P", &["w", "x"]),
        ],
    )
    .unwrap();
    (s, q)
}

/// The three secrets over the square schema.
pub fn square_secrets() -> Vec<ConjunctiveQuery> {
    vec![
        ConjunctiveQuery::new("p1", &[], vec![Atom::vars("S", &["x", "x"])]).unwrap(),
        ConjunctiveQuery::new(
            "p2",
            &[],
            vec![Atom::vars("T", &["x", "y"]), Atom::vars("S", &["y", "x"])],
        )
        .unwrap(),
        ConjunctiveQuery::new(
            "p3",
            &[],
            vec![
                Atom::vars("T", &["x", "y"]),
                Atom::vars("S", &["y", "z"]),
                Atom::vars("T", &["z", "x"]),
            ],
        )
        .unwrap(),
    ]
}

fn cq(qname: &str, free: &[&str], atoms: Vec<Atom>) -> ConjunctiveQuery {
    ConjunctiveQuery::new(qname, free, atoms).unwrap()
}

/// The useful d-views listed for the square query, each paired with the
/// index of the secret it is meant to protect. The two entries for the
/// second secret join each `S` or `P` edge with a neighbouring `T` edge.
pub fn square_designs() -> Vec<(DView, usize)> {
    let v = |n: &str, src: &str, free: &[&str], atoms: Vec<Atom>| View::cq(n, src, cq(n, free, atoms));
    let d1 = DView::new(
        "design_p1",
        vec![
            v(
                "Q_S",
                "S",
                &["x", "w"],
                vec![
                    Atom::vars("T", &["x", "y"]),
                    Atom::vars("S", &["y", "z"]),
                    Atom::vars("T", &["z", "w"]),
                ],
            ),
            v("Q_P", "P", &["w", "x"], vec![Atom::vars("P", &["w", "x"])]),
        ],
    );
    let d2a = DView::new(
        "design_p2a",
        vec![
            v(
                "Q_S",
                "S",
                &["y", "w"],
                vec![Atom::vars("S", &["y", "z"]), Atom::vars("T", &["z", "w"])],
            ),
            v(
                "Q_P",
                "P",
                &["w", "y"],
                vec![Atom::vars("P", &["w", "x"]), Atom::vars("T", &["x", "y"])],
            ),
        ],
    );
    let d2b = DView::new(
        "design_p2b",
        vec![
            v(
                "Q_S",
                "S",
                &["x", "z"],
                vec![Atom::vars("T", &["x", "y"]), Atom::vars("S", &["y", "z"])],
            ),
            v(
                "Q_P",
                "P",
                &["z", "x"],
                vec![Atom::vars("T", &["z", "w"]), Atom::vars("P", &["w", "x"])],
            ),
        ],
    );
    let d3 = DView::new(
        "design_p3",
        vec![
            v("Q_S", "S", &["y", "z"], vec![Atom::vars("S", &["y", "z"])]),
            v(
                "Q_P",
                "P",
                &["z", "y"],
                vec![
                    Atom::vars("T", &["z", "w"]),
                    Atom::vars("P", &["w", "x"]),
                    Atom::vars("T", &["x", "y"]),
                ],
            ),
        ],
    );
    vec![(d1, 0), (d2a, 1), (d2b, 1), (d3, 2)]
}

/// `E` on source `s1`, unary `S` on `s2`; the query is symmetric in its two
/// join variables.
pub fn es_symmetric() -> (DSchema, ConjunctiveQuery) {
    let mut s = DSchema::new();
    s.add_source("s1");
    s.add_source("s2");
    s.add_local("s1", "E", 2).unwrap();
    s.add_local("s2", "S", 1).unwrap();
    let q = ConjunctiveQuery::new(
        "Q",
        &[],
        vec![
            Atom::vars("E", &["x", "y"]),
            Atom::vars("S", &["x"]),
            Atom::vars("S", &["y"]),
        ],
    )
    .unwrap();
    (s, q)
}

/// `R(x,y,z) | P(x,y,z) | W(x,y,w) | T(x,y)` over one source.
pub fn makesafe_example() -> (DSchema, Dcq) {
    let mut s = DSchema::new();
    s.add_source("src");
    s.add_local("src", "R", 3).unwrap();
    s.add_local("src", "P", 3).unwrap();
    s.add_local("src", "W", 3).unwrap();
    s.add_local("src", "T", 2).unwrap();
    let dcq = Dcq {
        vars: ["x", "y", "z", "w"].iter().map(|v| name(v)).collect(),
        disjuncts: vec![
            cq("V", &["x", "y", "z"], vec![Atom::vars("R", &["x", "y", "z"])]),
            cq("V", &["x", "y", "z"], vec![Atom::vars("P", &["x", "y", "z"])]),
            cq("V", &["x", "y", "w"], vec![Atom::vars("W", &["x", "y", "w"])]),
            cq("V", &["x", "y"], vec![Atom::vars("T", &["x", "y"])]),
        ],
        guard: vec![],
    };
    (s, dcq)
}
